#pragma once

// 1/f^alpha flux noise on the two probe loops, injected into protocol runs.

#include <cstdint>
#include <string>
#include <vector>

#include "fluxqnd/measure.hpp"
#include "fluxqnd/model.hpp"

namespace fluxqnd {

/// How the PSD amplitude A maps onto sample variance.
enum class PsdNormalization {
  OneSided,  ///< S(f) = A / f^alpha for f > 0 only
  TwoSided,  ///< S(f) = A / |f|^alpha on both signs, twice the variance
};

const char* normalization_name(PsdNormalization n);
PsdNormalization parse_normalization(const std::string& name);

struct NoiseConfig {
  double alpha = 1.0;
  int n_samples = 5000;
  double amplitude_small = 4e-12;  ///< (2 uPhi0)^2
  double amplitude_large = 1e-10;  ///< (10 uPhi0)^2
  double waveform_duration = 10e-9;  ///< T_wf in seconds, mapped onto [0, T]
  double reset_duration = 1e-3;      ///< T_reset in seconds
  int repetitions = 100;             ///< N_r
  std::uint64_t seed = 0;
  PsdNormalization normalization = PsdNormalization::OneSided;
  bool include_offsets = true;

  void validate() const;
  /// N_r (T_wf + T_reset).
  double experiment_duration() const;

  friend bool operator==(const NoiseConfig&, const NoiseConfig&) = default;
};

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);
/// Seed of stream `stream` for ensemble member `index`.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream);

/// Zero-mean, unit-variance Gaussian sequence with one-sided PSD ~ 1/f^alpha.
/// Spectral shaping: white complex Gaussian bins scaled by k^(-alpha/2),
/// DC removed, inverse real FFT, then normalized.
std::vector<double> gen_colored_noise(double alpha, int n_samples, std::uint64_t seed);

/// One N(0, A ln(T_exp / T_wf)) draw.
double sample_offset(double amplitude, double experiment_duration, double waveform_duration, std::uint64_t seed);

/// Standard deviation of the fluctuating part implied by A and the band
/// [1/T_wf, n/(2 T_wf)].
double fluctuation_scale(double amplitude, const NoiseConfig& config);

struct NoiseTrace {
  std::vector<double> t;           ///< protocol time of each sample
  std::vector<double> small_loop;  ///< fluctuation in Phi0, offset excluded
  std::vector<double> large_loop;
  double offset_small = 0.0;
  double offset_large = 0.0;
  std::uint64_t master_seed = 0;
  std::uint64_t index = 0;

  /// Linear interpolation plus offsets. Constant outside the sampled span.
  FluxPerturbation at(double time) const;
  FluxDrive drive() const;
  bool is_zero() const;
};

/// Trace number `index` of the ensemble defined by config.seed, laid on [0, T].
NoiseTrace make_noise_trace(const NoiseConfig& config, double duration, std::uint64_t index = 0);

struct PsdEstimate {
  std::vector<double> frequency;
  std::vector<double> power;  ///< one-sided, so sum(power) * df ~ variance
  double slope = 0.0;
  double intercept = 0.0;
  double fit_low = 0.0;
  double fit_high = 0.0;
};

/// Welch estimate: 8 segments with 50% overlap, periodic Hann window, mean
/// removed per segment. The slope is a least-squares fit of log10 power
/// against log10 frequency over the central decade of the positive band.
PsdEstimate psd_estimate(const std::vector<double>& signal, double sample_rate);

struct NoisyRun {
  FidelityReport noisy;
  FidelityReport baseline;
  double delta_meas = 0.0;  ///< noisy - baseline
  double delta_qnd = 0.0;
  std::vector<double> t;
  std::vector<double> survival_noisy;  ///< <ccw|rho(t)|ccw> of the ccw-prepared run
};

/// Reruns the protocol with the trace driving both loops. GridError when the
/// trace does not cover [0, T].
NoisyRun inject_and_run(const ProtocolSetup& setup, const NoiseTrace& trace, const ProtocolOutcome& baseline);
NoisyRun inject_and_run(const ProtocolSetup& setup, const NoiseTrace& trace);

struct EnsembleMember {
  std::uint64_t index = 0;
  double offset_small = 0.0;
  double offset_large = 0.0;
  double fidelity_meas = 0.0;
  double fidelity_qnd = 0.0;
  double delta_meas = 0.0;
  double delta_qnd = 0.0;
};

struct EnsembleReport {
  FidelityReport baseline;
  std::vector<EnsembleMember> members;  ///< ordered by index
  double mean_delta_meas = 0.0;
  double std_delta_meas = 0.0;
  double mean_abs_delta_meas = 0.0;
  double mean_delta_qnd = 0.0;
  double mean_abs_delta_qnd = 0.0;
  double max_abs_delta_qnd = 0.0;
  std::vector<double> t;
  std::vector<double> survival_clean;
  std::vector<double> survival_noisy_mean;
};

/// n_traj independent traces (seeds derived from config.seed by index) run on
/// up to `workers` threads. Results do not depend on the worker count.
EnsembleReport ensemble_run(const ProtocolSetup& setup, const NoiseConfig& config, int n_traj = 100, int workers = 1);

}  // namespace fluxqnd
