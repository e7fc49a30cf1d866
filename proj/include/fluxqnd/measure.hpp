#pragma once

#include <optional>
#include <vector>

#include "fluxqnd/fockspace.hpp"
#include "fluxqnd/model.hpp"
#include "fluxqnd/solver.hpp"

namespace fluxqnd {

/// Everything needed to run the protocol once.
struct ProtocolSetup {
  CircuitParams params;
  Schedule schedule = Schedule::linear(10.0, 1.0, 2.0);
  SolverOptions solver;
  PhaseGrid grid;
};

struct ProtocolRun {
  std::optional<Branch> prepared;  ///< set for persistent-current preparations
  Trajectory trajectory;
  PointerDistribution distribution;  ///< final phase marginal
};

/// sigma(T) of the Gaussian pointer, the resolution the phase grid must meet.
double pointer_width(const ProtocolSetup& setup);

ProtocolRun run_from(const ProtocolSetup& setup, const JointState& initial, const FluxDrive& drive = {});
/// Qubit prepared in a persistent-current state, probe in its vacuum.
ProtocolRun run_prepared(const ProtocolSetup& setup, Branch prepared, const FluxDrive& drive = {});

/// Probability that the pointer lands on the half line of the prepared
/// branch: (-inf, 0] for ccw, [0, inf) for cw. The phi = 0 node is shared
/// half and half.
double state_fidelity(const PointerDistribution& final_distribution, Branch prepared);
double state_fidelity(const JointState& final_state, Branch prepared, const PhaseGrid& grid, double xi,
                      double pointer_width);

/// (F_ccw + F_cw) / 2 from one run per preparation. ScheduleMismatch when the
/// two runs used different schedules.
double measurement_fidelity(const ProtocolRun& ccw_run, const ProtocolRun& cw_run);

/// Mean survival probability of the prepared persistent-current state, taken
/// relative to the reduced trace.
double qnd_fidelity(const ProtocolRun& ccw_run, const ProtocolRun& cw_run);

struct Distinguishability {
  double mean_ccw = 0.0;
  double mean_cw = 0.0;
  double std_ccw = 0.0;
  double std_cw = 0.0;
  double gap = 0.0;        ///< <phi>_cw - <phi>_ccw
  double threshold = 0.0;  ///< 2 (sigma_cw + sigma_ccw)
  bool satisfied = false;

  double ratio() const { return threshold > 0.0 ? gap / threshold : 0.0; }
};

/// Compares the two branch-conditional densities of one distribution.
/// EmptyBranchError when either carries less than 1e-6 probability.
Distinguishability distinguishability(const PointerDistribution& distribution);
/// Uses the final branch-summed density of each prepared run.
Distinguishability distinguishability(const ProtocolRun& ccw_run, const ProtocolRun& cw_run);

struct FidelityReport {
  double fidelity_ccw = 0.0;
  double fidelity_cw = 0.0;
  double fidelity_meas = 0.0;
  double fidelity_qnd = 0.0;
  Distinguishability distinguishability;
  QndBudget qnd_budget;
};

struct ProtocolOutcome {
  ProtocolRun ccw;
  ProtocolRun cw;
  FidelityReport report;
};

/// Runs both persistent-current preparations and assembles the report.
ProtocolOutcome evaluate_protocol(const ProtocolSetup& setup, const FluxDrive& drive = {});

struct ConvergenceConfig {
  double dt = 1e-3;
  int n_max = 100;
};

struct ConvergenceRow {
  ConvergenceConfig config;
  double fidelity_meas = 0.0;
  double fidelity_qnd = 0.0;
  double max_norm_drift = 0.0;
  double delta_meas = 0.0;  ///< against the finest configuration
  double delta_qnd = 0.0;
};

/// Reruns the protocol per (dt, n_max). The finest configuration is the one
/// with the largest n_max, ties broken by the smallest dt.
std::vector<ConvergenceRow> convergence_scan(const ProtocolSetup& setup, const std::vector<ConvergenceConfig>& configs);

}  // namespace fluxqnd
