#include "fluxqnd/noise.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <random>

#include <fftw3.h>
#include <fmt/format.h>

#include "fluxqnd/errors.hpp"
#include "fluxqnd/parallel.hpp"

namespace fluxqnd {

namespace {

// FFTW planning is not thread safe; execution of an existing plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : ptr(fftw_malloc(n)) {
    if (!ptr) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(ptr); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  void* ptr;
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : p_(p) {
    if (!p_) throw Error("FFTW could not create a plan");
  }
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p_);
  }
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  void execute() const { fftw_execute(p_); }

 private:
  fftw_plan p_;
};

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

}  // namespace

const char* normalization_name(PsdNormalization n) {
  return n == PsdNormalization::TwoSided ? "two_sided" : "one_sided";
}

PsdNormalization parse_normalization(const std::string& name) {
  if (name == "one_sided") return PsdNormalization::OneSided;
  if (name == "two_sided") return PsdNormalization::TwoSided;
  throw InvalidArgument(fmt::format("unknown PSD normalization '{}'", name));
}

void NoiseConfig::validate() const {
  if (!(alpha >= -2.0 && alpha <= 2.0)) throw InvalidArgument(fmt::format("noise alpha {} outside [-2, 2]", alpha));
  if (n_samples < 2) throw InvalidArgument("noise n_samples must be >= 2");
  if (amplitude_small < 0.0 || amplitude_large < 0.0) throw InvalidArgument("noise amplitudes must be >= 0");
  if (!(waveform_duration > 0.0) || !(reset_duration > 0.0)) throw InvalidArgument("noise durations must be > 0");
  if (repetitions < 1) throw InvalidArgument("noise repetitions must be >= 1");
}

double NoiseConfig::experiment_duration() const { return repetitions * (waveform_duration + reset_duration); }

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, std::uint64_t stream) {
  return mix_seed(mix_seed(mix_seed(master) ^ index) ^ (stream + 1));
}

std::vector<double> gen_colored_noise(double alpha, int n_samples, std::uint64_t seed) {
  if (!(alpha >= -2.0 && alpha <= 2.0)) throw InvalidArgument(fmt::format("alpha {} outside [-2, 2]", alpha));
  if (n_samples < 2) throw InvalidArgument("gen_colored_noise: need at least 2 samples");
  const auto n = static_cast<std::size_t>(n_samples);
  const std::size_t bins = n / 2 + 1;

  FftwBuffer spec_buf(sizeof(fftw_complex) * bins);
  FftwBuffer out_buf(sizeof(double) * n);
  auto* spec = static_cast<fftw_complex*>(spec_buf.ptr);
  auto* out = static_cast<double*>(out_buf.ptr);
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(fftw_plan_dft_c2r_1d(n_samples, spec, out, FFTW_ESTIMATE));
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  spec[0][0] = spec[0][1] = 0.0;
  for (std::size_t k = 1; k < bins; ++k) {
    const double scale = std::pow(static_cast<double>(k), -0.5 * alpha);
    const double re = normal(rng);
    const double im = normal(rng);
    spec[k][0] = scale * re;
    spec[k][1] = (n % 2 == 0 && k == n / 2) ? 0.0 : scale * im;
  }
  plan->execute();

  std::vector<double> x(out, out + n);
  const double mu = mean_of(x);
  double var = 0.0;
  for (double& v : x) {
    v -= mu;
    var += v * v;
  }
  const double sd = std::sqrt(var / n);
  if (sd > 0.0)
    for (double& v : x) v /= sd;
  return x;
}

double sample_offset(double amplitude, double experiment_duration, double waveform_duration, std::uint64_t seed) {
  if (amplitude < 0.0) throw InvalidArgument("sample_offset: amplitude must be >= 0");
  if (!(waveform_duration > 0.0) || !(experiment_duration > waveform_duration)) {
    throw InvalidArgument("sample_offset: need T_exp > T_wf > 0");
  }
  if (amplitude == 0.0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(rng) * std::sqrt(amplitude * std::log(experiment_duration / waveform_duration));
}

double fluctuation_scale(double amplitude, const NoiseConfig& config) {
  // S(f_k) df summed over f_k = k / T_wf, k = 1 .. n/2.
  double sum = 0.0;
  for (int k = 1; k <= config.n_samples / 2; ++k) sum += std::pow(static_cast<double>(k), -config.alpha);
  double var = amplitude * std::pow(config.waveform_duration, config.alpha - 1.0) * sum;
  if (config.normalization == PsdNormalization::TwoSided) var *= 2.0;
  return std::sqrt(var);
}

FluxPerturbation NoiseTrace::at(double time) const {
  FluxPerturbation p{offset_small, offset_large};
  if (t.empty()) return p;
  std::size_t j = 0;
  double w = 0.0;
  if (time <= t.front()) {
    j = 0;
  } else if (time >= t.back()) {
    j = t.size() - 1;
  } else {
    j = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), time) - t.begin()) - 1;
    w = (time - t[j]) / (t[j + 1] - t[j]);
  }
  const auto lerp = [&](const std::vector<double>& v) { return w == 0.0 ? v[j] : (1.0 - w) * v[j] + w * v[j + 1]; };
  if (!small_loop.empty()) p.small_loop += lerp(small_loop);
  if (!large_loop.empty()) p.large_loop += lerp(large_loop);
  return p;
}

FluxDrive NoiseTrace::drive() const {
  return [trace = *this](double time) { return trace.at(time); };
}

bool NoiseTrace::is_zero() const {
  const auto zero = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }); };
  return offset_small == 0.0 && offset_large == 0.0 && zero(small_loop) && zero(large_loop);
}

NoiseTrace make_noise_trace(const NoiseConfig& config, double duration, std::uint64_t index) {
  config.validate();
  if (!(duration > 0.0)) throw InvalidArgument("make_noise_trace: duration must be > 0");
  NoiseTrace tr;
  tr.master_seed = config.seed;
  tr.index = index;
  const auto n = static_cast<std::size_t>(config.n_samples);
  tr.t.resize(n);
  for (std::size_t j = 0; j < n; ++j) tr.t[j] = duration * static_cast<double>(j) / static_cast<double>(n - 1);
  tr.t.back() = duration;

  const auto port = [&](double amplitude, std::uint64_t stream) {
    if (amplitude == 0.0) return std::vector<double>(n, 0.0);
    auto x = gen_colored_noise(config.alpha, config.n_samples, derive_seed(config.seed, index, stream));
    const double s = fluctuation_scale(amplitude, config);
    for (double& v : x) v *= s;
    return x;
  };
  tr.small_loop = port(config.amplitude_small, 0);
  tr.large_loop = port(config.amplitude_large, 1);
  if (config.include_offsets) {
    const double t_exp = config.experiment_duration();
    tr.offset_small =
        sample_offset(config.amplitude_small, t_exp, config.waveform_duration, derive_seed(config.seed, index, 2));
    tr.offset_large =
        sample_offset(config.amplitude_large, t_exp, config.waveform_duration, derive_seed(config.seed, index, 3));
  }
  return tr;
}

PsdEstimate psd_estimate(const std::vector<double>& signal, double sample_rate) {
  const std::size_t n = signal.size();
  if (n < 64) throw InvalidArgument(fmt::format("psd_estimate: need at least 64 samples, got {}", n));
  if (!(sample_rate > 0.0)) throw InvalidArgument("psd_estimate: sample_rate must be > 0");
  constexpr int kSegments = 8;
  const std::size_t len = (2 * n) / (kSegments + 1);
  const std::size_t step = len / 2;
  const std::size_t bins = len / 2 + 1;

  std::vector<double> window(len);
  double window_power = 0.0;
  for (std::size_t j = 0; j < len; ++j) {
    window[j] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * j / len));
    window_power += window[j] * window[j];
  }

  FftwBuffer in_buf(sizeof(double) * len);
  FftwBuffer spec_buf(sizeof(fftw_complex) * bins);
  auto* in = static_cast<double*>(in_buf.ptr);
  auto* spec = static_cast<fftw_complex*>(spec_buf.ptr);
  std::unique_ptr<Plan> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = std::make_unique<Plan>(fftw_plan_dft_r2c_1d(static_cast<int>(len), in, spec, FFTW_ESTIMATE));
  }

  std::vector<double> acc(bins, 0.0);
  for (int s = 0; s < kSegments; ++s) {
    const std::size_t start = s * step;
    double mu = 0.0;
    for (std::size_t j = 0; j < len; ++j) mu += signal[start + j];
    mu /= len;
    for (std::size_t j = 0; j < len; ++j) in[j] = window[j] * (signal[start + j] - mu);
    plan->execute();
    for (std::size_t k = 0; k < bins; ++k) acc[k] += spec[k][0] * spec[k][0] + spec[k][1] * spec[k][1];
  }

  PsdEstimate out;
  const double norm = 1.0 / (kSegments * sample_rate * window_power);
  for (std::size_t k = 1; k < bins; ++k) {
    const bool nyquist = len % 2 == 0 && k == len / 2;
    out.frequency.push_back(sample_rate * k / len);
    out.power.push_back(acc[k] * norm * (nyquist ? 1.0 : 2.0));
  }

  const double lo = std::log10(out.frequency.front());
  const double hi = std::log10(out.frequency.back());
  const double mid = 0.5 * (lo + hi);
  out.fit_low = hi - lo > 1.0 ? mid - 0.5 : lo;
  out.fit_high = hi - lo > 1.0 ? mid + 0.5 : hi;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  int m = 0;
  for (std::size_t k = 0; k < out.frequency.size(); ++k) {
    const double x = std::log10(out.frequency[k]);
    if (x < out.fit_low || x > out.fit_high || !(out.power[k] > 0.0)) continue;
    const double y = std::log10(out.power[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 2) throw InvalidArgument("psd_estimate: too few bins in the fit window");
  out.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  out.intercept = (sy - out.slope * sx) / m;
  out.fit_low = std::pow(10.0, out.fit_low);
  out.fit_high = std::pow(10.0, out.fit_high);
  return out;
}

NoisyRun inject_and_run(const ProtocolSetup& setup, const NoiseTrace& trace, const ProtocolOutcome& baseline) {
  const double T = setup.schedule.duration();
  if (trace.t.size() < 2 || trace.t.front() > 1e-12 * T || trace.t.back() < T * (1.0 - 1e-12)) {
    throw GridError("noise trace does not cover the protocol interval [0, T]");
  }
  const auto noisy = evaluate_protocol(setup, trace.drive());
  NoisyRun out;
  out.noisy = noisy.report;
  out.baseline = baseline.report;
  out.delta_meas = noisy.report.fidelity_meas - baseline.report.fidelity_meas;
  out.delta_qnd = noisy.report.fidelity_qnd - baseline.report.fidelity_qnd;
  for (const auto& s : noisy.ccw.trajectory.samples) {
    out.t.push_back(s.t);
    out.survival_noisy.push_back(s.rho(0, 0).real());
  }
  return out;
}

NoisyRun inject_and_run(const ProtocolSetup& setup, const NoiseTrace& trace) {
  return inject_and_run(setup, trace, evaluate_protocol(setup));
}

EnsembleReport ensemble_run(const ProtocolSetup& setup, const NoiseConfig& config, int n_traj, int workers) {
  config.validate();
  if (n_traj < 1) throw InvalidArgument("ensemble_run: n_traj must be >= 1");
  ProtocolSetup lean = setup;
  lean.solver.keep_states = false;
  const auto baseline = evaluate_protocol(lean);
  const double T = lean.schedule.duration();

  const auto count = static_cast<std::size_t>(n_traj);
  std::vector<EnsembleMember> members(count);
  std::vector<std::vector<double>> survival(count);
  parallel_for(count, workers, [&](std::size_t i) {
    const auto trace = make_noise_trace(config, T, i);
    auto run = inject_and_run(lean, trace, baseline);
    auto& m = members[i];
    m.index = i;
    m.offset_small = trace.offset_small;
    m.offset_large = trace.offset_large;
    m.fidelity_meas = run.noisy.fidelity_meas;
    m.fidelity_qnd = run.noisy.fidelity_qnd;
    m.delta_meas = run.delta_meas;
    m.delta_qnd = run.delta_qnd;
    survival[i] = std::move(run.survival_noisy);
  });

  EnsembleReport rep;
  rep.baseline = baseline.report;
  rep.members = members;
  for (const auto& s : baseline.ccw.trajectory.samples) {
    rep.t.push_back(s.t);
    rep.survival_clean.push_back(s.rho(0, 0).real());
  }
  rep.survival_noisy_mean.assign(rep.t.size(), 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& m = members[i];
    rep.mean_delta_meas += m.delta_meas;
    rep.mean_abs_delta_meas += std::abs(m.delta_meas);
    rep.mean_delta_qnd += m.delta_qnd;
    rep.mean_abs_delta_qnd += std::abs(m.delta_qnd);
    rep.max_abs_delta_qnd = std::max(rep.max_abs_delta_qnd, std::abs(m.delta_qnd));
    for (std::size_t k = 0; k < rep.t.size(); ++k) rep.survival_noisy_mean[k] += survival[i][k];
  }
  const double nn = static_cast<double>(count);
  rep.mean_delta_meas /= nn;
  rep.mean_abs_delta_meas /= nn;
  rep.mean_delta_qnd /= nn;
  rep.mean_abs_delta_qnd /= nn;
  for (double& v : rep.survival_noisy_mean) v /= nn;
  if (count > 1) {
    double ss = 0.0;
    for (const auto& m : members) ss += (m.delta_meas - rep.mean_delta_meas) * (m.delta_meas - rep.mean_delta_meas);
    rep.std_delta_meas = std::sqrt(ss / (nn - 1.0));
  }
  return rep;
}

}  // namespace fluxqnd
