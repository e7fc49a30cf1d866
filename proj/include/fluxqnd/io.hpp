#pragma once

// CSV and JSON serialization of the data products. Numbers are written with
// 17 significant digits so reruns compare byte for byte.

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fluxqnd/analytic.hpp"
#include "fluxqnd/measure.hpp"
#include "fluxqnd/noise.hpp"
#include "fluxqnd/solver.hpp"

namespace fluxqnd {

using json = nlohmann::ordered_json;

std::string format_number(double x);

json to_json(const FidelityReport& report);
json to_json(const Distinguishability& d);
json to_json(const EnsembleReport& report);

/// Every CSV starts with "# manifest <hash>" when a hash is given.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::string& manifest_hash = {});
/// phi, P_ccw, P_cw.
void write_distribution_csv(std::ostream& os, const PointerDistribution& dist, const std::string& manifest_hash = {});
/// One named column each, all of equal length.
void write_columns_csv(std::ostream& os, const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns, const std::string& manifest_hash = {});
void write_backaction_csv(std::ostream& os, const BackactionTrace& trace, const std::string& manifest_hash = {});
void write_psd_csv(std::ostream& os, const PsdEstimate& psd, const std::string& manifest_hash = {});
void write_ensemble_csv(std::ostream& os, const EnsembleReport& report, const std::string& manifest_hash = {});
void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows,
                           const std::string& manifest_hash = {});

}  // namespace fluxqnd
