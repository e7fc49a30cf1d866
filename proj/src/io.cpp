#include "fluxqnd/io.hpp"

#include <cmath>
#include <complex>

#include <fmt/format.h>

#include "fluxqnd/errors.hpp"

namespace fluxqnd {

namespace {

void header(std::ostream& os, const std::string& hash) {
  if (!hash.empty()) os << "# manifest " << hash << '\n';
}

template <typename... Ts>
void row(std::ostream& os, double first, Ts... rest) {
  os << format_number(first);
  ((os << ',' << format_number(static_cast<double>(rest))), ...);
  os << '\n';
}

}  // namespace

std::string format_number(double x) { return fmt::format("{:.17g}", x); }

json to_json(const Distinguishability& d) {
  return json{{"mean_ccw", d.mean_ccw}, {"mean_cw", d.mean_cw}, {"std_ccw", d.std_ccw},
              {"std_cw", d.std_cw},     {"gap", d.gap},         {"threshold", d.threshold},
              {"ratio", d.ratio()},     {"satisfied", d.satisfied}};
}

json to_json(const FidelityReport& r) {
  return json{{"fidelity_ccw", r.fidelity_ccw},
              {"fidelity_cw", r.fidelity_cw},
              {"fidelity_meas", r.fidelity_meas},
              {"fidelity_qnd", r.fidelity_qnd},
              {"distinguishability", to_json(r.distinguishability)},
              {"qnd_budget", {{"integral", r.qnd_budget.integral}, {"naive", r.qnd_budget.naive}}}};
}

json to_json(const EnsembleReport& r) {
  return json{{"trajectories", r.members.size()},
              {"baseline", to_json(r.baseline)},
              {"mean_delta_meas", r.mean_delta_meas},
              {"std_delta_meas", r.std_delta_meas},
              {"mean_abs_delta_meas", r.mean_abs_delta_meas},
              {"mean_delta_qnd", r.mean_delta_qnd},
              {"mean_abs_delta_qnd", r.mean_abs_delta_qnd},
              {"max_abs_delta_qnd", r.max_abs_delta_qnd}};
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj, const std::string& hash) {
  header(os, hash);
  os << "t,norm,re_rho_00,im_rho_00,re_rho_01,im_rho_01,re_rho_10,im_rho_10,re_rho_11,im_rho_11,phi_mean,"
        "phi_mean_ccw,phi_mean_cw,energy,coupling,beta,delta_eff\n";
  for (const auto& s : traj.samples) {
    const auto& r = s.rho;
    row(os, s.t, s.norm, r(0, 0).real(), r(0, 0).imag(), r(0, 1).real(), r(0, 1).imag(), r(1, 0).real(),
        r(1, 0).imag(), r(1, 1).real(), r(1, 1).imag(), s.phi_mean, s.phi_mean_ccw, s.phi_mean_cw, s.energy,
        s.coupling, s.beta, s.delta_eff);
  }
}

void write_distribution_csv(std::ostream& os, const PointerDistribution& d, const std::string& hash) {
  write_columns_csv(os, {"phi", "P_ccw", "P_cw"}, {d.phi, d.density_ccw, d.density_cw}, hash);
}

void write_columns_csv(std::ostream& os, const std::vector<std::string>& names,
                       const std::vector<std::vector<double>>& columns, const std::string& hash) {
  if (names.size() != columns.size() || columns.empty()) {
    throw InvalidArgument("write_columns_csv: one name per column required");
  }
  for (const auto& c : columns) {
    if (c.size() != columns.front().size()) throw InvalidArgument("write_columns_csv: ragged columns");
  }
  header(os, hash);
  for (std::size_t j = 0; j < names.size(); ++j) os << (j ? "," : "") << names[j];
  os << '\n';
  for (std::size_t k = 0; k < columns.front().size(); ++k) {
    for (std::size_t j = 0; j < columns.size(); ++j) os << (j ? "," : "") << format_number(columns[j][k]);
    os << '\n';
  }
}

void write_backaction_csv(std::ostream& os, const BackactionTrace& tr, const std::string& hash) {
  header(os, hash);
  os << "t,phi_p,omega_tilde,phi_p_tilde,gamma,Gamma,gamma_static,Gamma_static,delta_tilde,delta_tilde_halfsq,"
        "delta_tilde_gauss,delta_tilde_coherent,kappa,rho_00,rho_11,re_rho_01,im_rho_01,rho_00_static,abs_rho_01_static\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const auto& r = tr.rho[k];
    const auto& rs = tr.rho_static[k];
    row(os, tr.t[k], tr.phi_p[k], tr.omega_tilde[k], tr.phi_p_tilde[k], tr.gamma[k], tr.big_gamma[k],
        tr.gamma_static[k], tr.big_gamma_static[k], tr.delta_tilde[k], tr.delta_tilde_halfsq[k],
        tr.delta_tilde_gauss[k], tr.delta_tilde_coherent[k], tr.kappa[k], r(0, 0).real(), r(1, 1).real(),
        r(0, 1).real(), r(0, 1).imag(), rs(0, 0).real(), std::abs(rs(0, 1)));
  }
}

void write_psd_csv(std::ostream& os, const PsdEstimate& psd, const std::string& hash) {
  header(os, hash);
  os << "f,S\n";
  for (std::size_t k = 0; k < psd.frequency.size(); ++k) row(os, psd.frequency[k], psd.power[k]);
}

void write_ensemble_csv(std::ostream& os, const EnsembleReport& rep, const std::string& hash) {
  header(os, hash);
  os << "index,offset_small,offset_large,fidelity_meas,fidelity_qnd,delta_meas,delta_qnd\n";
  for (const auto& m : rep.members) {
    os << m.index << ',';
    row(os, m.offset_small, m.offset_large, m.fidelity_meas, m.fidelity_qnd, m.delta_meas, m.delta_qnd);
  }
}

void write_convergence_csv(std::ostream& os, const std::vector<ConvergenceRow>& rows, const std::string& hash) {
  header(os, hash);
  os << "dt,n_max,fidelity_meas,fidelity_qnd,max_norm_drift,delta_meas,delta_qnd\n";
  for (const auto& r : rows) {
    row(os, r.config.dt, r.config.n_max, r.fidelity_meas, r.fidelity_qnd, r.max_norm_drift, r.delta_meas,
        r.delta_qnd);
  }
}

}  // namespace fluxqnd
