#include <cmath>
#include <numbers>
#include <numeric>

#include <doctest.h>

#include "fluxqnd/errors.hpp"
#include "fluxqnd/noise.hpp"

using namespace fluxqnd;

namespace {

double mean_slope(double alpha, int seeds) {
  double sum = 0.0;
  for (int s = 0; s < seeds; ++s) sum += psd_estimate(gen_colored_noise(alpha, 5000, 1000 + s), 1.0).slope;
  return sum / seeds;
}

double variance(const std::vector<double>& x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double v = 0.0;
  for (double y : x) v += (y - m) * (y - m);
  return v / x.size();
}

// Small, fast protocol for injection tests.
ProtocolSetup small_setup() {
  ProtocolSetup s;
  s.params.n_max = 40;
  s.params.delta = 0.05;
  s.schedule = Schedule::linear(10.0, 0.3, 2.0);
  s.solver.dt = 5e-4;
  s.solver.keep_states = false;
  return s;
}

}  // namespace

TEST_CASE("colored noise generator") {
  const auto x = gen_colored_noise(1.0, 5000, 42);
  CHECK(x.size() == 5000);
  CHECK(std::abs(std::accumulate(x.begin(), x.end(), 0.0)) < 1e-9);
  CHECK(variance(x) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(gen_colored_noise(1.0, 5000, 42) == x);
  const auto y = gen_colored_noise(1.0, 5000, 43);
  double c = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) c += x[k] * y[k];
  CHECK(std::abs(c / x.size()) < 0.1);

  CHECK_THROWS_AS(gen_colored_noise(2.5, 100, 1), InvalidArgument);
  CHECK_THROWS_AS(gen_colored_noise(1.0, 1, 1), InvalidArgument);
  CHECK_NOTHROW(gen_colored_noise(-2.0, 101, 1));
}

TEST_CASE("spectral slopes over 50 seeds") {
  CHECK(std::abs(mean_slope(0.0, 50)) < 0.2);
  CHECK(std::abs(mean_slope(1.0, 50) + 1.0) < 0.2);
}

TEST_CASE("PSD estimate") {
  SUBCASE("sinusoid peaks at its frequency") {
    const double fs = 1000.0, f0 = 62.5;
    std::vector<double> x(4096);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = std::sin(2.0 * std::numbers::pi * f0 * k / fs);
    const auto p = psd_estimate(x, fs);
    const auto it = std::max_element(p.power.begin(), p.power.end());
    const double f_peak = p.frequency[it - p.power.begin()];
    CHECK(std::abs(f_peak - f0) <= p.frequency[0]);
  }
  SUBCASE("Parseval") {
    const auto x = gen_colored_noise(1.0, 5000, 5);
    const double fs = 3.0;
    const auto p = psd_estimate(x, fs);
    const double df = p.frequency[1] - p.frequency[0];
    const double integral = std::accumulate(p.power.begin(), p.power.end(), 0.0) * df;
    const auto w = gen_colored_noise(0.0, 5000, 5);
    const auto pw = psd_estimate(w, fs);
    const double integral_w = std::accumulate(pw.power.begin(), pw.power.end(), 0.0) * df;
    CHECK(integral_w == doctest::Approx(variance(w)).epsilon(0.05));
    // 1/f power sits partly below the lowest Welch bin; it still lands within 5%.
    CHECK(integral == doctest::Approx(variance(x)).epsilon(0.05));
  }
  CHECK_THROWS_AS(psd_estimate(std::vector<double>(63, 1.0), 1.0), InvalidArgument);
}

TEST_CASE("offsets") {
  const NoiseConfig cfg;
  CHECK(cfg.experiment_duration() == doctest::Approx(0.100001).epsilon(1e-12));
  CHECK(sample_offset(0.0, cfg.experiment_duration(), cfg.waveform_duration, 3) == 0.0);
  CHECK_THROWS_AS(sample_offset(1.0, 1e-9, 1e-8, 3), InvalidArgument);
  CHECK_THROWS_AS(sample_offset(1.0, 1.0, 0.0, 3), InvalidArgument);

  const double expect = 8.02947212484315678e-6;  // 2e-6 sqrt(ln(0.100001 / 1e-8))
  double ss = 0.0;
  const int n = 10000;
  for (int k = 0; k < n; ++k) {
    const double o = sample_offset(cfg.amplitude_small, cfg.experiment_duration(), cfg.waveform_duration,
                                   derive_seed(9, k, 2));
    ss += o * o;
  }
  CHECK(std::sqrt(ss / n) == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("fluctuation scale") {
  NoiseConfig c;
  c.alpha = 0.0;
  c.n_samples = 1000;
  CHECK(fluctuation_scale(4e-12, c) == doctest::Approx(std::sqrt(4e-12 / 1e-8 * 500)).epsilon(1e-12));
  c.normalization = PsdNormalization::TwoSided;
  CHECK(fluctuation_scale(4e-12, c) == doctest::Approx(std::sqrt(2.0 * 4e-12 / 1e-8 * 500)).epsilon(1e-12));
  c.alpha = 1.0;
  c.normalization = PsdNormalization::OneSided;
  double h = 0.0;
  for (int k = 1; k <= 500; ++k) h += 1.0 / k;
  CHECK(fluctuation_scale(4e-12, c) == doctest::Approx(std::sqrt(4e-12 * h)).epsilon(1e-12));
}

TEST_CASE("noise traces") {
  NoiseConfig c;
  c.seed = 17;
  const auto a = make_noise_trace(c, 10.0, 3);
  const auto b = make_noise_trace(c, 10.0, 3);
  CHECK(a.small_loop == b.small_loop);
  CHECK(a.offset_large == b.offset_large);
  CHECK(a.t.front() == 0.0);
  CHECK(a.t.back() == 10.0);
  CHECK(make_noise_trace(c, 10.0, 4).small_loop != a.small_loop);

  const double tm = 0.5 * (a.t[10] + a.t[11]);
  CHECK(a.at(tm).small_loop ==
        doctest::Approx(0.5 * (a.small_loop[10] + a.small_loop[11]) + a.offset_small).epsilon(1e-12));
  CHECK(a.at(a.t[7]).large_loop == a.large_loop[7] + a.offset_large);

  NoiseConfig zero = c;
  zero.amplitude_small = zero.amplitude_large = 0.0;
  CHECK(make_noise_trace(zero, 10.0, 0).is_zero());
  CHECK_FALSE(a.is_zero());
  NoiseConfig bad = c;
  bad.alpha = 3.0;
  CHECK_THROWS_AS(make_noise_trace(bad, 10.0, 0), InvalidArgument);
}

TEST_CASE("injection") {
  const auto s = small_setup();
  NoiseConfig zero;
  zero.amplitude_small = zero.amplitude_large = 0.0;
  const auto run = inject_and_run(s, make_noise_trace(zero, s.schedule.duration(), 0));
  CHECK(run.delta_meas == 0.0);
  CHECK(run.delta_qnd == 0.0);
  CHECK(run.noisy.fidelity_meas == run.baseline.fidelity_meas);

  auto short_trace = make_noise_trace(zero, 5.0, 0);
  CHECK_THROWS_AS(inject_and_run(s, short_trace), GridError);

  NoiseConfig loud;
  loud.amplitude_small = 1e-6;
  loud.amplitude_large = 1e-6;
  loud.seed = 3;
  const auto noisy = inject_and_run(s, make_noise_trace(loud, s.schedule.duration(), 0));
  CHECK(noisy.delta_meas != 0.0);
  CHECK(noisy.t.size() == noisy.survival_noisy.size());
}

TEST_CASE("ensembles") {
  const auto s = small_setup();
  NoiseConfig zero;
  zero.amplitude_small = zero.amplitude_large = 0.0;
  const auto one = ensemble_run(s, zero, 1, 1);
  REQUIRE(one.members.size() == 1);
  CHECK(one.members[0].delta_meas == 0.0);
  CHECK(one.members[0].delta_qnd == 0.0);
  CHECK(one.survival_noisy_mean == one.survival_clean);
  CHECK_THROWS_AS(ensemble_run(s, zero, 0, 1), InvalidArgument);

  NoiseConfig cfg;
  cfg.amplitude_small = 1e-6;
  cfg.amplitude_large = 1e-6;
  cfg.seed = 99;
  const auto r1 = ensemble_run(s, cfg, 4, 1);
  const auto r2 = ensemble_run(s, cfg, 4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(r1.members[i].index == i);
    CHECK(r1.members[i].delta_meas == r2.members[i].delta_meas);
    CHECK(r1.members[i].fidelity_qnd == r2.members[i].fidelity_qnd);
  }
  CHECK(r1.mean_abs_delta_meas == r2.mean_abs_delta_meas);
  CHECK(r1.survival_noisy_mean == r2.survival_noisy_mean);
}

TEST_CASE("error response to the small-loop amplitude") {
  // Mean square fidelity error when A_small doubles. While beta ramps,
  // d beta / d Phi_c != 0 and the response is linear in the flux, so the mean
  // square scales with A (ratio 2). With beta parked at the prefactor the
  // control flux sits at the top of cos(pi Phi_c): the response turns
  // quadratic and the ratio goes to 4.
  NoiseConfig c;
  c.amplitude_large = 0.0;
  c.seed = 11;
  const auto ratio = [&](const ProtocolSetup& s) {
    const auto mean_sq = [&](double a) {
      c.amplitude_small = a;
      const auto r = ensemble_run(s, c, 8, 1);
      double m = 0.0;
      for (const auto& e : r.members) m += e.delta_meas * e.delta_meas / r.members.size();
      return m;
    };
    return mean_sq(8e-12) / mean_sq(4e-12);
  };
  auto s = small_setup();
  const double ramped = ratio(s);
  s.schedule = Schedule::constant(10.0, 0.3, 2.0);
  const double parked = ratio(s);
  MESSAGE("doubling A_small: ramped " << ramped << ", parked " << parked);
  CHECK(ramped == doctest::Approx(2.0).epsilon(0.05));
  CHECK(parked == doctest::Approx(4.0).epsilon(0.05));
}
