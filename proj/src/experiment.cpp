#include "fluxqnd/experiment.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>

#include <fmt/format.h>

#include "fluxqnd/analytic.hpp"
#include "fluxqnd/errors.hpp"
#include "fluxqnd/parallel.hpp"

namespace fluxqnd {

namespace fs = std::filesystem;

namespace {

constexpr const char* kKindNames[] = {"protocol", "sweep", "backaction", "analytic-overlay", "noise-ensemble",
                                      "convergence"};

// Reads typed values out of one JSON object and rejects unknown keys.
class Section {
 public:
  Section(const json& doc, std::string prefix) : doc_(doc), prefix_(std::move(prefix)) {
    if (!doc_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      target = doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key), fmt::format("wrong type ({})", e.what()));
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return doc_.contains(key) && !doc_.at(key).is_null();
  }
  const json& at(const std::string& key) const { return doc_.at(key); }
  std::string path(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError(path(key), "unknown key");
    }
  }

 private:
  const json& doc_;
  std::string prefix_;
  std::set<std::string> seen_;
};

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class OutputDir {
 public:
  OutputDir(const fs::path& dir, const ExperimentConfig& config) : dir_(dir) {
    fs::create_directories(dir_);
    result.manifest_hash = manifest_hash(config);
    json m = manifest_json(config);
    m["manifest_hash"] = result.manifest_hash;
    write("manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = dir_ / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(fmt::format("cannot open {} for writing", path.string()));
    body(os);
    if (!os) throw Error(fmt::format("failed writing {}", path.string()));
    result.files.push_back(path);
  }

  void write_json(const std::string& name, json doc) {
    doc["manifest_hash"] = result.manifest_hash;
    write(name, [&](std::ostream& os) { os << doc.dump(2) << '\n'; });
  }

  const std::string& hash() const { return result.manifest_hash; }

  RunResult result;

 private:
  fs::path dir_;
};

void check_grid(const ExperimentConfig& c, const CircuitParams& p, double duration, double g_max) {
  const auto sched = Schedule::linear(duration, g_max, p.beta_max);
  WellGeometry g;
  try {
    g = geometry_at(duration, p, c.schedule_shape == "linear" ? sched : c.schedule());
  } catch (const CurvatureError& e) {
    throw ConfigError("params", e.what());
  }
  const double support = g.phi_p + 6.0 * g.sigma;
  if (c.grid.phi_max < support) {
    throw ConfigError("grid.phi_max", fmt::format("{} is narrower than the pointer support phi_p + 6 sigma = {:.4f}",
                                                  c.grid.phi_max, support));
  }
  if (c.grid.spacing() > g.sigma / 10.0) {
    throw ConfigError("grid.points", fmt::format("spacing {:.4g} does not resolve sigma(T) / 10 = {:.4g}",
                                                 c.grid.spacing(), g.sigma / 10.0));
  }
}

json report_with_extras(const ProtocolSetup& setup, const ProtocolOutcome& out) {
  json j = to_json(out.report);
  const auto geom = geometry_at(setup.schedule.duration(), setup.params, setup.schedule);
  j["analytic"] = {{"fidelity", analytic_fidelity(setup.params, setup.schedule)},
                   {"phi_p", geom.phi_p},
                   {"sigma", geom.sigma},
                   {"omega_tilde", geom.omega_tilde}};
  j["adiabaticity_margin"] = adiabaticity_margin(setup.schedule, setup.params);
  j["max_norm_drift"] = std::max(out.ccw.trajectory.max_norm_drift, out.cw.trajectory.max_norm_drift);
  j["dt_used"] = std::min(out.ccw.trajectory.step, out.cw.trajectory.step);
  j["delta"] = setup.params.delta;
  j["epsilon"] = setup.params.epsilon;
  return j;
}

}  // namespace

const char* kind_name(ExperimentKind k) { return kKindNames[static_cast<int>(k)]; }

ExperimentKind parse_kind(const std::string& name) {
  for (int k = 0; k < 6; ++k) {
    if (name == kKindNames[k]) return static_cast<ExperimentKind>(k);
  }
  throw ConfigError("kind", fmt::format("unknown experiment kind '{}'", name));
}

CircuitParams ExperimentConfig::resolved_params() const {
  CircuitParams p = params;
  p.delta = qubit_coefficient(qubit_frequency, convention);
  p.epsilon = qubit_coefficient(bias_frequency, convention);
  return p;
}

Schedule ExperimentConfig::schedule() const {
  if (schedule_shape == "linear") return Schedule::linear(duration, params.g_max, params.beta_max);
  return Schedule::table(table_t, table_g, table_beta);
}

ProtocolSetup ExperimentConfig::setup() const {
  ProtocolSetup s;
  s.params = resolved_params();
  s.schedule = schedule();
  s.solver = solver;
  s.grid = grid;
  return s;
}

void ExperimentConfig::validate() const {
  if (!(params.xi > 0.0)) throw ConfigError("params.xi", fmt::format("must be > 0, got {}", params.xi));
  if (params.beta_max > params.screening_prefactor) {
    throw ConfigError("params.beta_max", fmt::format("{} exceeds the screening prefactor {}", params.beta_max,
                                                     params.screening_prefactor));
  }
  if (!(qubit_frequency >= 0.0)) throw ConfigError("params.qubit_frequency", "must be >= 0");
  try {
    resolved_params().validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError("params", e.what());
  }
  if (schedule_shape == "linear") {
    if (!(duration > 0.0)) throw ConfigError("schedule.duration", fmt::format("must be > 0, got {}", duration));
  } else if (schedule_shape == "table") {
    try {
      const auto s = schedule();
      if (!s.starts_decoupled()) throw ConfigError("schedule", "a protocol must start at g = beta = 0");
    } catch (const InvalidArgument& e) {
      throw ConfigError("schedule", e.what());
    }
  } else {
    throw ConfigError("schedule.shape", fmt::format("unknown shape '{}'", schedule_shape));
  }
  if (!(solver.dt > 0.0)) throw ConfigError("solver.dt", "must be > 0");
  if (solver.dt > 1e-3 * schedule().duration()) throw ConfigError("solver.dt", "must not exceed 1e-3 T");
  if (solver.sample_stride < 1) throw ConfigError("solver.sample_stride", "must be >= 1");
  if (solver.max_refinements < 0) throw ConfigError("solver.max_refinements", "must be >= 0");
  if (grid.points < 3 || grid.points % 2 == 0) throw ConfigError("grid.points", "must be odd and >= 3");
  if (!(grid.phi_max > 0.0)) throw ConfigError("grid.phi_max", "must be > 0");

  const auto p = resolved_params();
  const double T = schedule().duration();
  if (kind == ExperimentKind::Sweep) {
    if (sweep_g_max.empty() || sweep_xi.empty()) throw ConfigError("sweep", "needs at least one g_max and one xi");
    for (double xi : sweep_xi) {
      if (!(xi > 0.0)) throw ConfigError("sweep.xi", fmt::format("must be > 0, got {}", xi));
      for (double g : sweep_g_max) {
        if (!(g >= 0.0)) throw ConfigError("sweep.g_max", fmt::format("must be >= 0, got {}", g));
        auto q = p;
        q.xi = xi;
        q.g_max = g;
        check_grid(*this, q, T, g);
      }
    }
  } else {
    check_grid(*this, p, T, p.g_max);
  }
  if (kind == ExperimentKind::NoiseEnsemble) {
    if (!noise) throw ConfigError("noise", "a noise-ensemble run needs a noise section");
    try {
      noise->validate();
    } catch (const InvalidArgument& e) {
      throw ConfigError("noise", e.what());
    }
    if (trajectories < 1) throw ConfigError("ensemble.trajectories", "must be >= 1");
  }
  if (kind == ExperimentKind::Convergence && convergence.size() < 2) {
    throw ConfigError("convergence", "needs at least two (dt, n_max) entries");
  }
  if (kind == ExperimentKind::Backaction && backaction_points < 3) {
    throw ConfigError("backaction.points", "must be >= 3");
  }
}

ExperimentConfig parse_config(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "");
  std::string kind = kind_name(c.kind);
  root.read("kind", kind);
  c.kind = parse_kind(kind);
  root.read("seed", c.seed);
  root.read("output_dir", c.output_dir);
  {
    // Echoed manifests carry these; they are derived, not inputs.
    std::string ignored_hash;
    json ignored_resolved;
    root.read("manifest_hash", ignored_hash);
    root.read("resolved", ignored_resolved);
  }

  if (root.has("params")) {
    Section s(root.at("params"), "params");
    s.read("xi", c.params.xi);
    s.read("qubit_frequency", c.qubit_frequency);
    s.read("bias_frequency", c.bias_frequency);
    std::string conv = convention_name(c.convention);
    s.read("frequency_convention", conv);
    try {
      c.convention = parse_convention(conv);
    } catch (const InvalidArgument& e) {
      throw ConfigError("params.frequency_convention", e.what());
    }
    s.read("beta_max", c.params.beta_max);
    s.read("g_max", c.params.g_max);
    s.read("n_max", c.params.n_max);
    s.read("screening_prefactor", c.params.screening_prefactor);
    s.finish();
  }
  if (root.has("schedule")) {
    Section s(root.at("schedule"), "schedule");
    s.read("shape", c.schedule_shape);
    s.read("duration", c.duration);
    s.read("t", c.table_t);
    s.read("g", c.table_g);
    s.read("beta", c.table_beta);
    s.finish();
  }
  if (root.has("solver")) {
    Section s(root.at("solver"), "solver");
    s.read("dt", c.solver.dt);
    s.read("sample_stride", c.solver.sample_stride);
    s.read("norm_tolerance", c.solver.norm_tolerance);
    s.read("keep_states", c.solver.keep_states);
    s.read("max_refinements", c.solver.max_refinements);
    s.finish();
  }
  if (root.has("grid")) {
    Section s(root.at("grid"), "grid");
    s.read("phi_max", c.grid.phi_max);
    s.read("points", c.grid.points);
    s.finish();
  }
  if (root.has("noise")) {
    NoiseConfig n;
    Section s(root.at("noise"), "noise");
    s.read("alpha", n.alpha);
    s.read("n_samples", n.n_samples);
    s.read("amplitude_small", n.amplitude_small);
    s.read("amplitude_large", n.amplitude_large);
    s.read("waveform_duration", n.waveform_duration);
    s.read("reset_duration", n.reset_duration);
    s.read("repetitions", n.repetitions);
    s.read("include_offsets", n.include_offsets);
    std::string norm = normalization_name(n.normalization);
    s.read("normalization", norm);
    try {
      n.normalization = parse_normalization(norm);
    } catch (const InvalidArgument& e) {
      throw ConfigError("noise.normalization", e.what());
    }
    s.finish();
    c.noise = n;
  }
  if (root.has("ensemble")) {
    Section s(root.at("ensemble"), "ensemble");
    s.read("trajectories", c.trajectories);
    s.finish();
  }
  if (root.has("sweep")) {
    Section s(root.at("sweep"), "sweep");
    s.read("g_max", c.sweep_g_max);
    s.read("xi", c.sweep_xi);
    s.finish();
  }
  if (root.has("convergence")) {
    const auto& list = root.at("convergence");
    if (!list.is_array()) throw ConfigError("convergence", "expected an array of {dt, n_max}");
    c.convergence.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      ConvergenceConfig cc;
      Section s(list[i], fmt::format("convergence[{}]", i));
      s.read("dt", cc.dt);
      s.read("n_max", cc.n_max);
      s.finish();
      c.convergence.push_back(cc);
    }
  }
  if (root.has("backaction")) {
    Section s(root.at("backaction"), "backaction");
    s.read("points", c.backaction_points);
    s.finish();
  }
  root.finish();
  if (c.noise) c.noise->seed = c.seed;
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--config", fmt::format("cannot read {}", path.string()));
  json doc;
  try {
    doc = json::parse(is, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("--config", fmt::format("invalid JSON in {}: {}", path.string(), e.what()));
  }
  return parse_config(doc);
}

json manifest_json(const ExperimentConfig& c) {
  const auto p = c.resolved_params();
  json m;
  m["kind"] = kind_name(c.kind);
  m["seed"] = c.seed;
  m["params"] = {{"xi", c.params.xi},
                 {"qubit_frequency", c.qubit_frequency},
                 {"bias_frequency", c.bias_frequency},
                 {"frequency_convention", convention_name(c.convention)},
                 {"beta_max", c.params.beta_max},
                 {"g_max", c.params.g_max},
                 {"n_max", c.params.n_max},
                 {"screening_prefactor", c.params.screening_prefactor}};
  m["resolved"] = {{"delta", p.delta}, {"epsilon", p.epsilon}};
  m["schedule"] = {{"shape", c.schedule_shape}, {"duration", c.duration}};
  if (c.schedule_shape == "table") {
    m["schedule"]["t"] = c.table_t;
    m["schedule"]["g"] = c.table_g;
    m["schedule"]["beta"] = c.table_beta;
  }
  m["solver"] = {{"dt", c.solver.dt},
                 {"sample_stride", c.solver.sample_stride},
                 {"norm_tolerance", c.solver.norm_tolerance},
                 {"keep_states", c.solver.keep_states},
                 {"max_refinements", c.solver.max_refinements}};
  m["grid"] = {{"phi_max", c.grid.phi_max}, {"points", c.grid.points}};
  if (c.noise) {
    const auto& n = *c.noise;
    m["noise"] = {{"alpha", n.alpha},
                  {"n_samples", n.n_samples},
                  {"amplitude_small", n.amplitude_small},
                  {"amplitude_large", n.amplitude_large},
                  {"waveform_duration", n.waveform_duration},
                  {"reset_duration", n.reset_duration},
                  {"repetitions", n.repetitions},
                  {"include_offsets", n.include_offsets},
                  {"normalization", normalization_name(n.normalization)}};
  }
  m["ensemble"] = {{"trajectories", c.trajectories}};
  m["sweep"] = {{"g_max", c.sweep_g_max}, {"xi", c.sweep_xi}};
  json conv = json::array();
  for (const auto& cc : c.convergence) conv.push_back({{"dt", cc.dt}, {"n_max", cc.n_max}});
  m["convergence"] = conv;
  m["backaction"] = {{"points", c.backaction_points}};
  return m;
}

std::string manifest_hash(const ExperimentConfig& config) {
  return fmt::format("{:016x}", fnv1a(manifest_json(config).dump()));
}

RunResult run_protocol(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  OutputDir out(out_dir, config);
  const auto setup = config.setup();
  const auto outcome = evaluate_protocol(setup);

  out.write("trajectory_ccw.csv", [&](std::ostream& os) { write_trajectory_csv(os, outcome.ccw.trajectory, out.hash()); });
  out.write("trajectory_cw.csv", [&](std::ostream& os) { write_trajectory_csv(os, outcome.cw.trajectory, out.hash()); });

  PointerDistribution final_dist;
  final_dist.phi = outcome.ccw.distribution.phi;
  final_dist.density_ccw = outcome.ccw.distribution.total();
  final_dist.density_cw = outcome.cw.distribution.total();
  out.write("distribution.csv", [&](std::ostream& os) { write_distribution_csv(os, final_dist, out.hash()); });

  const auto pointer = gaussian_pointer(setup.params, setup.schedule, setup.schedule.duration());
  const auto gauss = gaussian_overlay(pointer, setup.grid, 1.0);
  out.write("analytic_overlay.csv", [&](std::ostream& os) {
    write_columns_csv(os, {"phi", "numeric_ccw", "numeric_cw", "gauss_ccw", "gauss_cw"},
                      {final_dist.phi, final_dist.density_ccw, final_dist.density_cw, gauss.density_ccw,
                       gauss.density_cw},
                      out.hash());
  });

  json report = report_with_extras(setup, outcome);
  out.write_json("report.json", report);
  out.result.summary = report;
  return out.result;
}

RunResult run_sweep(const ExperimentConfig& config, const fs::path& out_dir, int workers) {
  ExperimentConfig base = config;
  base.kind = ExperimentKind::Sweep;
  base.validate();
  OutputDir out(out_dir, base);

  struct Point {
    double xi = 0.0, g = 0.0;
    double dt = 0.0;
    FidelityReport report;
    std::string error;
  };
  std::vector<Point> points;
  for (double xi : base.sweep_xi)
    for (double g : base.sweep_g_max) points.push_back({xi, g, 0.0, {}, {}});

  parallel_for(points.size(), workers, [&](std::size_t i) {
    auto& pt = points[i];
    try {
      ExperimentConfig c = base;
      c.params.xi = pt.xi;
      c.params.g_max = pt.g;
      auto setup = c.setup();
      setup.solver.keep_states = false;
      const auto outcome = evaluate_protocol(setup);
      pt.report = outcome.report;
      pt.dt = std::min(outcome.ccw.trajectory.step, outcome.cw.trajectory.step);
    } catch (const std::exception& e) {
      pt.error = e.what();
    }
  });

  int failed = 0;
  json errors = json::array();
  out.write("sweep.csv", [&](std::ostream& os) {
    os << "# manifest " << out.hash() << '\n';
    os << "xi,g_max,fidelity_meas,fidelity_qnd,infidelity,gap,threshold,distinguishable,qnd_budget_integral,"
          "qnd_budget_naive,dt,status\n";
    for (const auto& pt : points) {
      const auto& r = pt.report;
      os << format_number(pt.xi) << ',' << format_number(pt.g) << ',';
      if (!pt.error.empty()) {
        ++failed;
        errors.push_back({{"xi", pt.xi}, {"g_max", pt.g}, {"error", pt.error}});
        os << "nan,nan,nan,nan,nan,0,nan,nan,nan,error\n";
        continue;
      }
      os << format_number(r.fidelity_meas) << ',' << format_number(r.fidelity_qnd) << ','
         << format_number(1.0 - r.fidelity_meas) << ',' << format_number(r.distinguishability.gap) << ','
         << format_number(r.distinguishability.threshold) << ',' << (r.distinguishability.satisfied ? 1 : 0) << ','
         << format_number(r.qnd_budget.integral) << ',' << format_number(r.qnd_budget.naive) << ','
         << format_number(pt.dt) << ",ok\n";
    }
  });
  out.result.failed_points = failed;
  out.result.summary = {{"points", points.size()}, {"failed", failed}, {"errors", errors}};
  out.write_json("sweep_summary.json", out.result.summary);
  return out.result;
}

RunResult run_backaction(const ExperimentConfig& config, const fs::path& out_dir) {
  config.validate();
  OutputDir out(out_dir, config);
  const auto setup = config.setup();
  const auto trace = backaction_trace(setup.params, setup.schedule, config.backaction_points);
  out.write("backaction.csv", [&](std::ostream& os) { write_backaction_csv(os, trace, out.hash()); });

  const double a = 1.0 / std::sqrt(2.0);
  auto lean = setup;
  lean.solver.keep_states = false;
  const auto run = run_from(lean, JointState::product(setup.params.basis(), a, a), {});
  std::vector<double> t, r00, r11, re01, im01;
  for (const auto& s : run.trajectory.samples) {
    t.push_back(s.t);
    r00.push_back(s.rho(0, 0).real());
    r11.push_back(s.rho(1, 1).real());
    re01.push_back(s.rho(0, 1).real());
    im01.push_back(s.rho(0, 1).imag());
  }
  out.write("backaction_numeric.csv", [&](std::ostream& os) {
    write_columns_csv(os, {"t", "rho_00", "rho_11", "re_rho_01", "im_rho_01"}, {t, r00, r11, re01, im01}, out.hash());
  });

  const auto& rho_T = trace.rho.back();
  const auto& num_T = run.trajectory.samples.back().rho;
  out.result.summary = {{"analytic", {{"rho_00", rho_T(0, 0).real()}, {"abs_rho_01", std::abs(rho_T(0, 1))}}},
                        {"analytic_static", {{"rho_00", trace.rho_static.back()(0, 0).real()},
                                             {"abs_rho_01", std::abs(trace.rho_static.back()(0, 1))}}},
                        {"numeric", {{"rho_00", num_T(0, 0).real()}, {"abs_rho_01", std::abs(num_T(0, 1))}}}};
  out.write_json("backaction_summary.json", out.result.summary);
  return out.result;
}

RunResult run_noise_ensemble(const ExperimentConfig& config, const fs::path& out_dir, int workers) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::NoiseEnsemble;
  c.validate();
  NoiseConfig noise = *c.noise;
  noise.seed = c.seed;
  OutputDir out(out_dir, c);
  const auto setup = c.setup();
  const auto rep = ensemble_run(setup, noise, c.trajectories, workers);

  out.write("ensemble.csv", [&](std::ostream& os) { write_ensemble_csv(os, rep, out.hash()); });
  out.write("qnd_trace.csv", [&](std::ostream& os) {
    write_columns_csv(os, {"t", "survival_clean", "survival_noisy_mean"}, {rep.t, rep.survival_clean, rep.survival_noisy_mean},
                      out.hash());
  });
  // Spectrum of the unit-variance generator output behind trajectory 0.
  const auto sample = gen_colored_noise(noise.alpha, noise.n_samples, derive_seed(noise.seed, 0, 0));
  const auto psd = psd_estimate(sample, noise.n_samples / noise.waveform_duration);
  out.write("psd.csv", [&](std::ostream& os) { write_psd_csv(os, psd, out.hash()); });

  json summary = to_json(rep);
  summary["psd_slope"] = psd.slope;
  summary["psd_fit_band"] = {psd.fit_low, psd.fit_high};
  out.write_json("ensemble_summary.json", summary);
  out.result.summary = summary;
  return out.result;
}

RunResult run_convergence(const ExperimentConfig& config, const fs::path& out_dir) {
  ExperimentConfig c = config;
  c.kind = ExperimentKind::Convergence;
  c.validate();
  OutputDir out(out_dir, c);
  const auto rows = convergence_scan(c.setup(), c.convergence);
  out.write("convergence.csv", [&](std::ostream& os) { write_convergence_csv(os, rows, out.hash()); });
  json arr = json::array();
  for (const auto& r : rows) {
    arr.push_back({{"dt", r.config.dt}, {"n_max", r.config.n_max}, {"fidelity_meas", r.fidelity_meas},
                   {"fidelity_qnd", r.fidelity_qnd}, {"delta_meas", r.delta_meas}, {"delta_qnd", r.delta_qnd},
                   {"max_norm_drift", r.max_norm_drift}});
  }
  out.result.summary = {{"rows", arr}};
  out.write_json("convergence_summary.json", out.result.summary);
  return out.result;
}

RunResult run_experiment(const ExperimentConfig& config, const fs::path& out_dir, int workers) {
  switch (config.kind) {
    case ExperimentKind::Protocol:
    case ExperimentKind::AnalyticOverlay:
      return run_protocol(config, out_dir);
    case ExperimentKind::Sweep:
      return run_sweep(config, out_dir, workers);
    case ExperimentKind::Backaction:
      return run_backaction(config, out_dir);
    case ExperimentKind::NoiseEnsemble:
      return run_noise_ensemble(config, out_dir, workers);
    case ExperimentKind::Convergence:
      return run_convergence(config, out_dir);
  }
  throw ConfigError("kind", "unhandled experiment kind");
}

}  // namespace fluxqnd
