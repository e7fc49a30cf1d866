#include "fluxqnd/measure.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fluxqnd/errors.hpp"

namespace fluxqnd {

double pointer_width(const ProtocolSetup& setup) {
  return geometry_at(setup.schedule.duration(), setup.params, setup.schedule).sigma;
}

ProtocolRun run_from(const ProtocolSetup& setup, const JointState& initial, const FluxDrive& drive) {
  ProtocolRun run;
  run.trajectory = propagate(initial, setup.params, setup.schedule, setup.solver, drive);
  run.distribution = fock_to_phase(run.trajectory.final_state, setup.grid, setup.params.xi, pointer_width(setup));
  return run;
}

ProtocolRun run_prepared(const ProtocolSetup& setup, Branch prepared, const FluxDrive& drive) {
  auto run = run_from(setup, JointState::prepared(setup.params.basis(), prepared), drive);
  run.prepared = prepared;
  return run;
}

double state_fidelity(const PointerDistribution& dist, Branch prepared) {
  const auto n = dist.phi.size();
  const double h = dist.spacing();
  const auto w = trapezoid_weights(n, h);
  const auto& ccw = dist.density_ccw;
  const auto& cw = dist.density_cw;
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = dist.phi[k];
    double weight = 0.0;
    if (std::abs(x) < 1e-12 * h) {
      weight = 0.5 * w[k];
    } else if ((prepared == Branch::Clockwise) == (x > 0.0)) {
      weight = w[k];
    }
    sum += weight * (ccw[k] + cw[k]);
  }
  return sum;
}

double state_fidelity(const JointState& final_state, Branch prepared, const PhaseGrid& grid, double xi,
                      double width) {
  return state_fidelity(fock_to_phase(final_state, grid, xi, width), prepared);
}

namespace {

void check_pair(const ProtocolRun& ccw_run, const ProtocolRun& cw_run) {
  if (ccw_run.prepared != Branch::CounterClockwise || cw_run.prepared != Branch::Clockwise) {
    throw InvalidArgument("need one run prepared in ccw and one in cw");
  }
  if (!(ccw_run.trajectory.schedule == cw_run.trajectory.schedule)) {
    throw ScheduleMismatch("the two preparations were run with different schedules");
  }
}

}  // namespace

double measurement_fidelity(const ProtocolRun& ccw_run, const ProtocolRun& cw_run) {
  check_pair(ccw_run, cw_run);
  return 0.5 * (state_fidelity(ccw_run.distribution, Branch::CounterClockwise) +
                state_fidelity(cw_run.distribution, Branch::Clockwise));
}

double qnd_fidelity(const ProtocolRun& ccw_run, const ProtocolRun& cw_run) {
  check_pair(ccw_run, cw_run);
  const auto rho_ccw = partial_trace_probe(ccw_run.trajectory.final_state);
  const auto rho_cw = partial_trace_probe(cw_run.trajectory.final_state);
  // Populations relative to the trace, so integrator norm loss does not read as demolition.
  return 0.5 * (rho_ccw(0, 0).real() / rho_ccw.trace().real() + rho_cw(1, 1).real() / rho_cw.trace().real());
}

Distinguishability distinguishability(const PointerDistribution& dist) {
  const auto s0 = dist.stats(Branch::CounterClockwise);
  const auto s1 = dist.stats(Branch::Clockwise);
  if (s0.mass < 1e-6 || s1.mass < 1e-6) {
    throw EmptyBranchError(fmt::format("branch masses ({:.3g}, {:.3g}) too small to compare", s0.mass, s1.mass));
  }
  Distinguishability d;
  d.mean_ccw = s0.mean;
  d.mean_cw = s1.mean;
  d.std_ccw = s0.stddev;
  d.std_cw = s1.stddev;
  d.gap = s1.mean - s0.mean;
  d.threshold = 2.0 * (s0.stddev + s1.stddev);
  d.satisfied = d.gap >= d.threshold;
  return d;
}

Distinguishability distinguishability(const ProtocolRun& ccw_run, const ProtocolRun& cw_run) {
  check_pair(ccw_run, cw_run);
  PointerDistribution combined;
  combined.phi = ccw_run.distribution.phi;
  combined.density_ccw = ccw_run.distribution.total();
  combined.density_cw = cw_run.distribution.total();
  return distinguishability(combined);
}

ProtocolOutcome evaluate_protocol(const ProtocolSetup& setup, const FluxDrive& drive) {
  ProtocolOutcome out;
  out.ccw = run_prepared(setup, Branch::CounterClockwise, drive);
  out.cw = run_prepared(setup, Branch::Clockwise, drive);
  auto& r = out.report;
  r.fidelity_ccw = state_fidelity(out.ccw.distribution, Branch::CounterClockwise);
  r.fidelity_cw = state_fidelity(out.cw.distribution, Branch::Clockwise);
  r.fidelity_meas = measurement_fidelity(out.ccw, out.cw);
  r.fidelity_qnd = qnd_fidelity(out.ccw, out.cw);
  r.distinguishability = distinguishability(out.ccw, out.cw);
  r.qnd_budget = qnd_budget(setup.schedule, setup.params);
  return out;
}

std::vector<ConvergenceRow> convergence_scan(const ProtocolSetup& setup, const std::vector<ConvergenceConfig>& configs) {
  if (configs.size() < 2) throw InvalidArgument("convergence_scan: need at least two configurations");
  std::vector<ConvergenceRow> rows;
  rows.reserve(configs.size());
  for (const auto& c : configs) {
    ProtocolSetup s = setup;
    s.params.n_max = c.n_max;
    s.solver.dt = c.dt;
    s.solver.max_refinements = 0;  // the scan is about the requested dt
    s.solver.keep_states = false;
    const auto outcome = evaluate_protocol(s);
    ConvergenceRow row;
    row.config = c;
    row.fidelity_meas = outcome.report.fidelity_meas;
    row.fidelity_qnd = outcome.report.fidelity_qnd;
    row.max_norm_drift = std::max(outcome.ccw.trajectory.max_norm_drift, outcome.cw.trajectory.max_norm_drift);
    rows.push_back(row);
  }
  const auto finest = std::max_element(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    if (a.config.n_max != b.config.n_max) return a.config.n_max < b.config.n_max;
    return a.config.dt > b.config.dt;
  });
  const double ref_meas = finest->fidelity_meas;
  const double ref_qnd = finest->fidelity_qnd;
  for (auto& row : rows) {
    row.delta_meas = row.fidelity_meas - ref_meas;
    row.delta_qnd = row.fidelity_qnd - ref_qnd;
  }
  return rows;
}

}  // namespace fluxqnd
