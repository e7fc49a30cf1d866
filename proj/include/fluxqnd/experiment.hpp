#pragma once

// Declarative experiment configs (JSON), resolved manifests and the runners
// behind the command line verbs.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fluxqnd/io.hpp"
#include "fluxqnd/measure.hpp"
#include "fluxqnd/noise.hpp"

namespace fluxqnd {

enum class ExperimentKind { Protocol, Sweep, Backaction, AnalyticOverlay, NoiseEnsemble, Convergence };

const char* kind_name(ExperimentKind k);
ExperimentKind parse_kind(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::Protocol;
  CircuitParams params;  ///< delta and epsilon are ignored; see the quoted values below
  /// Qubit tunnel splitting and bias as quoted multiples of Omega; the
  /// convention turns them into Hamiltonian coefficients.
  double qubit_frequency = 0.1;
  double bias_frequency = 0.0;
  FrequencyConvention convention = FrequencyConvention::InverseCyclic;

  std::string schedule_shape = "linear";
  double duration = 10.0;
  std::vector<double> table_t, table_g, table_beta;

  /// Step refinement is on for experiments so hard sweep corners still meet
  /// the drift guard.
  SolverOptions solver{.max_refinements = 3};
  PhaseGrid grid;

  std::optional<NoiseConfig> noise;
  int trajectories = 100;

  std::vector<double> sweep_g_max{0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0};
  std::vector<double> sweep_xi{0.05, 0.1, 0.2};
  std::vector<ConvergenceConfig> convergence{{5e-4, 100}, {5e-4, 140}, {2.5e-4, 140}};
  int backaction_points = 2001;

  /// Where the CLI writes when --out is absent. Not part of the manifest.
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  /// Params with delta and epsilon resolved through the convention.
  CircuitParams resolved_params() const;
  Schedule schedule() const;
  ProtocolSetup setup() const;
  /// Field-level checks; throws ConfigError naming the offending key.
  void validate() const;
};

/// Parses a JSON document. Missing keys keep their defaults; unknown keys
/// are rejected.
ExperimentConfig parse_config(const json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Fully resolved config, defaults expanded, output location left out.
/// parse_config(manifest) gives back an equivalent config.
json manifest_json(const ExperimentConfig& config);
/// 64-bit FNV-1a of the compact manifest dump, as 16 hex digits.
std::string manifest_hash(const ExperimentConfig& config);

struct RunResult {
  std::string manifest_hash;
  std::vector<std::filesystem::path> files;
  int failed_points = 0;
  json summary;
};

RunResult run_protocol(const ExperimentConfig& config, const std::filesystem::path& out_dir);
RunResult run_sweep(const ExperimentConfig& config, const std::filesystem::path& out_dir, int workers);
RunResult run_backaction(const ExperimentConfig& config, const std::filesystem::path& out_dir);
RunResult run_noise_ensemble(const ExperimentConfig& config, const std::filesystem::path& out_dir, int workers);
RunResult run_convergence(const ExperimentConfig& config, const std::filesystem::path& out_dir);

/// Dispatches on config.kind.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir, int workers);

}  // namespace fluxqnd
