#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fluxqnd/errors.hpp"
#include "fluxqnd/experiment.hpp"
#include "fluxqnd/parallel.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 0;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "JSON experiment config (defaults apply when omitted)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "Master seed, overrides the config");
  cmd->add_option("--out", o.out, "Output directory, overrides the config");
  cmd->add_option("--workers", o.workers, "Worker threads (else FLUXQND_WORKERS, else all cores)")
      ->check(CLI::PositiveNumber);
}

int run(fluxqnd::ExperimentKind kind, const Options& o) {
  using namespace fluxqnd;
  ExperimentConfig cfg = o.config.empty() ? parse_config(json::object()) : load_config(o.config);
  cfg.kind = kind;
  if (o.seed) cfg.seed = *o.seed;
  if (kind == ExperimentKind::NoiseEnsemble && !cfg.noise) cfg.noise = NoiseConfig{};
  if (cfg.noise) cfg.noise->seed = cfg.seed;
  const std::string out = o.out.empty() ? cfg.output_dir : o.out;
  const int workers = resolve_workers(o.workers);

  const auto result = run_experiment(cfg, out, workers);
  std::cout << fmt::format("manifest {}\n", result.manifest_hash);
  for (const auto& f : result.files) std::cout << "wrote " << f.string() << '\n';
  std::cout << result.summary.dump(2) << '\n';
  if (result.failed_points > 0) {
    std::cerr << fmt::format("{} point(s) failed\n", result.failed_points);
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flux-qubit QND readout simulations"};
  app.require_subcommand(1);
  Options opts;

  struct Verb {
    const char* name;
    const char* help;
    fluxqnd::ExperimentKind kind;
  };
  const Verb verbs[] = {
      {"protocol", "Run both persistent-current preparations and report fidelities", fluxqnd::ExperimentKind::Protocol},
      {"sweep", "Fidelity table over g_max and xi", fluxqnd::ExperimentKind::Sweep},
      {"backaction", "Magnus backaction model next to the numeric |+> run", fluxqnd::ExperimentKind::Backaction},
      {"noise", "Monte Carlo ensemble with 1/f flux noise", fluxqnd::ExperimentKind::NoiseEnsemble},
      {"convergence", "Rerun the protocol over (dt, n_max) refinements", fluxqnd::ExperimentKind::Convergence},
  };
  std::optional<fluxqnd::ExperimentKind> chosen;
  for (const auto& v : verbs) {
    auto* cmd = app.add_subcommand(v.name, v.help);
    add_common(cmd, opts);
    cmd->callback([&chosen, kind = v.kind] { chosen = kind; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return run(*chosen, opts);
  } catch (const fluxqnd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
