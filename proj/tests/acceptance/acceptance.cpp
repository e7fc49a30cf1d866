// Acceptance suite: one PASS/FAIL line per criterion, details indented below.
//
// Exit status is nonzero when any criterion fails, unless that criterion was
// named with --expect-fail (its FAIL line is still printed).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "fluxqnd/analytic.hpp"
#include "fluxqnd/experiment.hpp"
#include "fluxqnd/measure.hpp"
#include "fluxqnd/noise.hpp"
#include "fluxqnd/parallel.hpp"

using namespace fluxqnd;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  // Records one sub-check; the criterion passes only if all of them do.
  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    notes.push_back(fmt::format("{} {}", ok ? "ok  " : "MISS", what));
  }
  void info(const std::string& what) { notes.push_back("info " + what); }
};

ExperimentConfig defaults(FrequencyConvention conv) {
  ExperimentConfig c;
  c.convention = conv;
  c.solver.keep_states = false;
  return c;
}

ProtocolSetup setup_for(const ExperimentConfig& c) {
  auto s = c.setup();
  s.solver.keep_states = false;
  return s;
}

// Sub-grid peak position: parabola through the maximum and its neighbours.
double peak_position(const std::vector<double>& phi, const std::vector<double>& p, bool positive_side) {
  std::size_t best = 0;
  double best_val = -1.0;
  for (std::size_t k = 1; k + 1 < phi.size(); ++k) {
    if ((phi[k] > 0.0) != positive_side) continue;
    if (p[k] > best_val) {
      best_val = p[k];
      best = k;
    }
  }
  const double y0 = p[best - 1], y1 = p[best], y2 = p[best + 1];
  const double denom = y0 - 2.0 * y1 + y2;
  const double shift = denom != 0.0 ? 0.5 * (y0 - y2) / denom : 0.0;
  return phi[best] + shift * (phi[1] - phi[0]);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Shared {
  FrequencyConvention matched = FrequencyConvention::InverseCyclic;
  ProtocolOutcome defaults_outcome;
  double defaults_drift = 0.0;
};

Verdict criterion2(Shared& sh, int workers) {
  Verdict v;
  struct Point {
    FrequencyConvention conv;
    double T;
    double f = 0.0;
  };
  std::vector<Point> pts;
  for (auto conv : {FrequencyConvention::Angular, FrequencyConvention::InverseCyclic})
    for (double T : {10.0, 40.0}) pts.push_back({conv, T});
  parallel_for(pts.size(), workers, [&](std::size_t i) {
    auto c = defaults(pts[i].conv);
    c.params.g_max = 0.1;
    c.duration = pts[i].T;
    pts[i].f = evaluate_protocol(setup_for(c)).report.fidelity_meas;
  });

  // A convention matches when both quoted numbers are reproduced; failing
  // that, the one closest to them in units of the tolerance.
  double best_score = 1e300;
  for (auto conv : {FrequencyConvention::Angular, FrequencyConvention::InverseCyclic}) {
    double f10 = 0.0, f40 = 0.0;
    for (const auto& p : pts)
      if (p.conv == conv) (p.T == 10.0 ? f10 : f40) = p.f;
    const double score = std::abs(f10 - 0.808) / 0.05 + std::max(0.0, 0.95 - f40) / 0.05;
    v.info(fmt::format("{:<14} F_meas(T=10) = {:.6f}  F_meas(T=40) = {:.6f}", convention_name(conv), f10, f40));
    if (score < best_score) {
      best_score = score;
      sh.matched = conv;
    }
  }
  double f10 = 0.0, f40 = 0.0;
  for (const auto& p : pts)
    if (p.conv == sh.matched) (p.T == 10.0 ? f10 : f40) = p.f;
  v.info(fmt::format("matched convention: {}", convention_name(sh.matched)));
  v.check(std::abs(f10 - 0.808) <= 0.05, fmt::format("T=10: F_meas = {:.6f}, target 0.808 +- 0.05", f10));
  v.check(f40 >= 0.95, fmt::format("T=40: F_meas = {:.6f}, target >= 0.95", f40));
  return v;
}

Verdict criterion1(Shared& sh) {
  Verdict v;
  const auto c = defaults(sh.matched);
  sh.defaults_outcome = evaluate_protocol(setup_for(c));
  sh.defaults_drift = std::max(sh.defaults_outcome.ccw.trajectory.max_norm_drift,
                               sh.defaults_outcome.cw.trajectory.max_norm_drift);
  const auto& r = sh.defaults_outcome.report;
  v.check(r.fidelity_meas >= 0.999, fmt::format("F_meas = {:.8f} at dt = {:g}, n_max = {} ({})", r.fidelity_meas,
                                                c.solver.dt, c.params.n_max, convention_name(sh.matched)));

  // Runtime at the quoted resolution. dt = 1e-3 drifts slightly above the
  // default 1e-8 norm guard, so the guard is opened for this timing run.
  auto timing = setup_for(c);
  timing.solver.dt = 1e-3;
  timing.solver.norm_tolerance = 1e-6;
  const auto t0 = Clock::now();
  const auto coarse = evaluate_protocol(timing);
  const double elapsed = seconds_since(t0);
  v.check(elapsed < 60.0, fmt::format("runtime {:.2f} s single-threaded at n_max = 100, dt = 1e-3 (< 60 s)", elapsed));
  v.info(fmt::format("F_meas at dt = 1e-3: {:.8f}", coarse.report.fidelity_meas));

  const auto ang = evaluate_protocol(setup_for(defaults(FrequencyConvention::Angular))).report;
  v.info(fmt::format("angular convention: F_meas = {:.8f}, F_QND = {:.8f}", ang.fidelity_meas, ang.fidelity_qnd));
  return v;
}

Verdict criterion3(const Shared& sh) {
  Verdict v;
  const auto& out = sh.defaults_outcome;
  v.check(std::abs(out.report.fidelity_qnd - 0.996) <= 0.005,
          fmt::format("F_QND = {:.8f}, target 0.996 +- 0.005", out.report.fidelity_qnd));
  double dev = 0.0;
  for (const auto& s : out.ccw.trajectory.samples) dev = std::max(dev, std::abs(s.rho(0, 0).real() - 1.0));
  v.check(dev <= 5e-3, fmt::format("max_t |rho_00(t) - 1| for prepared ccw = {:.3e} (<= 5e-3)", dev));
  return v;
}

Verdict criterion4(const Shared& sh) {
  Verdict v;
  auto c = defaults(sh.matched);
  c.bias_frequency = c.qubit_frequency;
  const auto r = evaluate_protocol(setup_for(c)).report;
  v.check(r.fidelity_meas >= 0.995,
          fmt::format("epsilon = Delta = {:.6g}: F_meas = {:.8f} (>= 0.995)", c.resolved_params().epsilon,
                      r.fidelity_meas));
  v.info(fmt::format("F_QND = {:.8f}", r.fidelity_qnd));
  return v;
}

Verdict criterion5(const Shared& sh, int workers) {
  Verdict v;
  const auto base = defaults(sh.matched);
  struct Point {
    double xi, g, f = 0.0;
  };
  std::vector<Point> pts;
  for (double xi : base.sweep_xi)
    for (double g : base.sweep_g_max) pts.push_back({xi, g});
  parallel_for(pts.size(), workers, [&](std::size_t i) {
    auto c = base;
    c.params.xi = pts[i].xi;
    c.params.g_max = pts[i].g;
    pts[i].f = evaluate_protocol(setup_for(c)).report.fidelity_meas;
  });

  for (double xi : base.sweep_xi) {
    std::vector<const Point*> row;
    for (const auto& p : pts)
      if (p.xi == xi) row.push_back(&p);
    std::string line = fmt::format("xi = {:<5g} 1 - F:", xi);
    bool monotone = true;
    for (std::size_t k = 0; k < row.size(); ++k) {
      line += fmt::format(" {:.2e}", 1.0 - row[k]->f);
      if (k > 0 && row[k]->f < row[k - 1]->f) monotone = false;
    }
    v.info(line);
    v.check(monotone, fmt::format("F(g_max) non-decreasing at xi = {:g}", xi));
    if (xi == 0.1) {
      double g_plateau = -1.0;
      for (const auto* p : row)
        if (p->f > 0.999) {
          g_plateau = p->g;
          break;
        }
      v.check(g_plateau > 0.0 && g_plateau < 1.0,
              fmt::format("xi = 0.1 plateau F > 0.999 first reached at g_max = {:g} (< 1)", g_plateau));
      // Decay of log10(1 - F) over the pre-plateau points.
      bool decreasing = true;
      for (std::size_t k = 1; k < row.size() && row[k - 1]->f <= 0.999; ++k)
        if (std::log10(1.0 - row[k]->f) >= std::log10(1.0 - row[k - 1]->f)) decreasing = false;
      v.check(decreasing, "xi = 0.1 log10(1 - F) strictly decreasing up to the plateau");
    }
  }
  return v;
}

Verdict criterion6(const Shared& sh) {
  Verdict v;
  const auto c = defaults(sh.matched);
  const auto setup = setup_for(c);
  const auto& out = sh.defaults_outcome;
  const auto pointer = gaussian_pointer(setup.params, setup.schedule, setup.schedule.duration());
  const double phi_p = pointer.mean(Branch::Clockwise);

  const auto& phi = out.cw.distribution.phi;
  const double peak_cw = peak_position(phi, out.cw.distribution.total(), true);
  const double peak_ccw = peak_position(phi, out.ccw.distribution.total(), false);
  const double rel_cw = std::abs(peak_cw - phi_p) / phi_p;
  const double rel_ccw = std::abs(-peak_ccw - phi_p) / phi_p;
  v.check(rel_cw <= 0.1 && rel_ccw <= 0.1,
          fmt::format("peaks {:+.4f} / {:+.4f} vs analytic +-{:.4f}: {:.2f}% / {:.2f}% (<= 10%)", peak_ccw, peak_cw,
                      phi_p, 100.0 * rel_ccw, 100.0 * rel_cw));
  v.check(peak_cw > phi_p && -peak_ccw > phi_p, "numeric peaks sit at larger |phi| than the Gaussian ones");
  const auto s_cw = out.cw.distribution.stats(Branch::Clockwise);
  v.info(fmt::format("conditional mean {:.4f}, std {:.4f}; Gaussian std {:.4f}", s_cw.mean, s_cw.stddev,
                     pointer.sigma()));
  const double fa = analytic_fidelity(setup.params, setup.schedule);
  v.check(std::abs(fa - out.report.fidelity_meas) <= 0.02,
          fmt::format("analytic F = {:.8f} vs numeric {:.8f} (within 0.02)", fa, out.report.fidelity_meas));
  return v;
}

Verdict criterion7(const Shared& sh, BackactionTrace& trace) {
  Verdict v;
  const auto setup = setup_for(defaults(sh.matched));
  trace = backaction_trace(setup.params, setup.schedule, 2001);
  const auto& r = trace.rho.back();
  v.check(std::abs(r(0, 0).real() - 0.5) <= 1e-2, fmt::format("analytic rho_00(T) = {:.6f} (1/2 within 1e-2)",
                                                                r(0, 0).real()));
  v.check(std::abs(r(0, 1)) < 1e-3, fmt::format("analytic |rho_01(T)| = {:.3e} (< 1e-3)", std::abs(r(0, 1))));
  return v;
}

Verdict criterion8(const Shared& sh, int workers, std::uint64_t seed) {
  Verdict v;
  const auto t0 = Clock::now();
  NoiseConfig nc;
  nc.seed = seed;
  for (bool biased : {false, true}) {
    auto c = defaults(sh.matched);
    if (biased) c.bias_frequency = c.qubit_frequency;
    const auto rep = ensemble_run(setup_for(c), nc, 100, workers);
    const char* tag = biased ? "epsilon = Delta" : "epsilon = 0";
    v.check(rep.mean_abs_delta_meas <= 5e-3,
            fmt::format("{}: mean |dF_meas| = {:.3e} over {} trajectories (<= 5e-3)", tag, rep.mean_abs_delta_meas,
                        rep.members.size()));
    v.check(rep.max_abs_delta_qnd <= 1e-2, fmt::format("{}: max |dF_QND| = {:.3e} (<= 1e-2)", tag,
                                                       rep.max_abs_delta_qnd));
  }
  double slope_small = 0.0, slope_large = 0.0;
  const double T = defaults(sh.matched).duration;
  for (int k = 0; k < 100; ++k) {
    const auto tr = make_noise_trace(nc, T, k);
    const double fs_rate = (tr.t.size() - 1) / T;
    slope_small += psd_estimate(tr.small_loop, fs_rate).slope / 100.0;
    slope_large += psd_estimate(tr.large_loop, fs_rate).slope / 100.0;
  }
  v.check(std::abs(slope_small + 1.0) <= 0.2 && std::abs(slope_large + 1.0) <= 0.2,
          fmt::format("PSD slope small {:.3f}, large {:.3f} (-1 +- 0.2)", slope_small, slope_large));
  const double elapsed = seconds_since(t0);
  v.check(elapsed < 1800.0, fmt::format("runtime {:.1f} s with {} worker(s) (< 30 min)", elapsed, workers));
  return v;
}

Verdict criterion9(const Shared& sh, const BackactionTrace& trace) {
  Verdict v;
  const auto c = defaults(sh.matched);
  const auto setup = setup_for(c);
  const auto& r = sh.defaults_outcome.report;

  v.check(sh.defaults_drift < 1e-8, fmt::format("norm drift {:.3e} (< 1e-8)", sh.defaults_drift));

  const auto rows = convergence_scan(setup, {{setup.solver.dt, 100}, {setup.solver.dt, 140}});
  v.check(std::abs(rows[0].delta_meas) < 1e-6 && std::abs(rows[0].delta_qnd) < 1e-6,
          fmt::format("n_max 100 -> 140: |dF_meas| = {:.2e}, |dF_QND| = {:.2e} (< 1e-6)", std::abs(rows[0].delta_meas),
                      std::abs(rows[0].delta_qnd)));

  {
    // beta = 0, Delta = 0, linear coupling ramp: <phi>_cw = (g/sqrt(xi)) (t - sin t) / T.
    ProtocolSetup s = setup;
    s.params.delta = 0.0;
    s.schedule = Schedule::linear(setup.schedule.duration(), 0.3, 0.0);
    const auto run = run_prepared(s, Branch::Clockwise);
    const double T = s.schedule.duration();
    const double amp = 0.3 / std::sqrt(s.params.xi);
    double worst = 0.0;
    for (const auto& smp : run.trajectory.samples)
      worst = std::max(worst, std::abs(smp.phi_mean_cw - amp * (smp.t - std::sin(smp.t)) / T));
    v.check(worst < 1e-4, fmt::format("beta = 0 displaced-oscillator oracle: max |d<phi>| = {:.2e} (< 1e-4)", worst));
  }

  v.check(std::abs(r.fidelity_ccw - r.fidelity_cw) < 1e-8,
          fmt::format("mirror symmetry |F_ccw - F_cw| = {:.2e} (< 1e-8)", std::abs(r.fidelity_ccw - r.fidelity_cw)));

  {
    ProtocolSetup s = setup;
    s.params.delta = 0.0;
    const double fq = evaluate_protocol(s).report.fidelity_qnd;
    v.check(fq == 1.0, fmt::format("Delta = 0: F_QND = {:.17g} (exactly 1)", fq));
  }

  {
    double worst = 0.0;
    for (std::size_t k = 0; k < trace.size(); ++k) {
      const auto m = magnus_block(trace.big_gamma[k], trace.delta_tilde[k], trace.omega_integral[k]);
      worst = std::max(worst, (m * m.adjoint() - Eigen::Matrix2cd::Identity()).norm());
    }
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-100.0, 100.0);
    for (int k = 0; k < 10000; ++k) {
      const auto m = magnus_block(u(rng), u(rng), u(rng));
      worst = std::max(worst, (m * m.adjoint() - Eigen::Matrix2cd::Identity()).norm());
    }
    v.check(worst < 1e-12, fmt::format("Magnus blocks unitary: max ||V V^+ - 1|| = {:.2e} (< 1e-12)", worst));
  }

  {
    const auto root = fs::temp_directory_path() / fmt::format("fluxqnd_acceptance_{}", ::getpid());
    fs::remove_all(root);
    const auto first = run_protocol(c, root / "a");
    const auto again = run_protocol(load_config(root / "a" / "manifest.json"), root / "b");
    bool identical = first.manifest_hash == again.manifest_hash && first.files.size() == again.files.size();
    for (std::size_t k = 0; identical && k < first.files.size(); ++k)
      identical = slurp(first.files[k]) == slurp(again.files[k]);
    v.check(identical, fmt::format("rerun from manifest {} is byte-identical ({} files)", first.manifest_hash,
                                   first.files.size()));
    fs::remove_all(root);
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fluxqnd acceptance suite"};
  int workers = 0;
  std::uint64_t seed = 20240101;
  std::vector<int> expect_fail;
  app.add_option("--workers", workers, "worker threads (0: FLUXQND_WORKERS or all cores)");
  app.add_option("--seed", seed, "master seed of the noise ensemble");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail; reported but not fatal");
  CLI11_PARSE(app, argc, argv);
  workers = resolve_workers(workers);
  const std::set<int> expected(expect_fail.begin(), expect_fail.end());

  const char* titles[] = {"",
                          "default-protocol fidelity",
                          "weak-coupling point",
                          "QND fidelity at defaults",
                          "off-degeneracy run",
                          "fidelity sweep shape",
                          "analytic vs numeric overlay",
                          "backaction model",
                          "noise ensemble",
                          "property suite"};

  Shared sh;
  BackactionTrace trace;
  int unexpected = 0;
  const auto total0 = Clock::now();
  const auto report = [&](int id, const std::function<Verdict()>& body) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = body();
    } catch (const std::exception& e) {
      v.check(false, fmt::format("exception: {}", e.what()));
    }
    const bool known = expected.count(id) > 0;
    std::string tag;
    if (!v.pass) tag = known ? " (expected failure)" : "";
    if (!v.pass && !known) ++unexpected;
    fmt::print("{} {}. {}{} [{:.1f} s]\n", v.pass ? "PASS" : "FAIL", id, titles[id], tag, seconds_since(t0));
    for (const auto& n : v.notes) fmt::print("       {}\n", n);
    std::fflush(stdout);
  };

  fmt::print("workers: {}\n", workers);
  // Criterion 2 runs first: it decides the frequency convention the others use.
  report(2, [&] { return criterion2(sh, workers); });
  report(1, [&] { return criterion1(sh); });
  report(3, [&] { return criterion3(sh); });
  report(4, [&] { return criterion4(sh); });
  report(5, [&] { return criterion5(sh, workers); });
  report(6, [&] { return criterion6(sh); });
  report(7, [&] { return criterion7(sh, trace); });
  report(8, [&] { return criterion8(sh, workers, seed); });
  report(9, [&] { return criterion9(sh, trace); });
  fmt::print("total {:.1f} s, unexpected failures: {}\n", seconds_since(total0), unexpected);
  return unexpected == 0 ? 0 : 1;
}
