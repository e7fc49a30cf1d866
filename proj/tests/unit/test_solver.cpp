#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "fluxqnd/errors.hpp"
#include "fluxqnd/measure.hpp"
#include "fluxqnd/solver.hpp"

using namespace fluxqnd;

namespace {

CircuitParams default_params() {
  CircuitParams p;
  p.delta = qubit_coefficient(0.1, FrequencyConvention::InverseCyclic);
  return p;
}

JointState plus_state(const FockBasis& b) {
  const double a = 1.0 / std::sqrt(2.0);
  return JointState::product(b, a, a);
}

}  // namespace

TEST_CASE("structured kernel matches the dense Hamiltonian") {
  CircuitParams p;
  p.n_max = 41;
  p.epsilon = 0.07;
  const auto s = Schedule::linear(10.0, 1.0, 2.0);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  Eigen::VectorXcd v(p.basis().joint_dim());
  for (auto& c : v) c = cplx(n01(rng), n01(rng));
  v.normalize();
  const JointState psi(p.basis(), v);
  for (double t : {0.0, 3.3, 10.0}) {
    for (const FluxPerturbation& f : {FluxPerturbation{}, FluxPerturbation{2e-3, -5e-3}}) {
      const Eigen::VectorXcd dense = hamiltonian_at(t, p, s, f).matrix * v;
      const Eigen::VectorXcd fast = apply_hamiltonian(psi, p, terms_at(t, p, s, f));
      CHECK((dense - fast).norm() < 1e-11);
    }
  }
}

TEST_CASE("propagate preconditions") {
  CircuitParams p;
  p.n_max = 10;
  const auto s = Schedule::linear(10.0, 1.0, 2.0);
  SolverOptions o;
  o.dt = 0.02;
  CHECK_THROWS_AS(propagate(JointState::prepared(p.basis(), Branch::Clockwise), p, s, o), InvalidArgument);
  o.dt = 1e-3;
  CHECK_THROWS_AS(propagate(JointState::product(p.basis(), 1.0, 1.0), p, s, o), InvalidArgument);
  CHECK_THROWS_AS(propagate(JointState::prepared(FockBasis(5), Branch::Clockwise), p, s, o), InvalidArgument);
}

TEST_CASE("norm drift error") {
  CircuitParams p = default_params();
  const auto s = Schedule::linear(10.0, 1.0, 2.0);
  SolverOptions o;
  o.norm_tolerance = 1e-14;
  CHECK_THROWS_AS(propagate(JointState::prepared(p.basis(), Branch::Clockwise), p, s, o), NormDriftError);
}

TEST_CASE("decoupled qubit Rabi-flips, probe stays in vacuum") {
  CircuitParams p;
  p.n_max = 8;
  p.delta = 0.1;
  const double T = std::numbers::pi / p.delta;
  const auto s = Schedule::constant(T, 0.0, 0.0);
  SolverOptions o;
  o.dt = 1e-3;
  const auto tr = propagate(JointState::prepared(p.basis(), Branch::CounterClockwise), p, s, o);
  const auto rho = tr.samples.back().rho;
  CHECK(std::abs(rho(1, 1).real() - 1.0) < 1e-6);
  CHECK(std::abs(rho(0, 0).real()) < 1e-6);
  const auto& amp = tr.final_state.amplitudes();
  CHECK(std::norm(amp(0)) + std::norm(amp(p.basis().dim())) > 1.0 - 1e-12);
  for (const auto& smp : tr.samples) CHECK(std::abs(smp.phi_mean) < 1e-12);
}

TEST_CASE("sudden constant coupling drives the pointer as a forced oscillator") {
  CircuitParams p;
  p.n_max = 40;
  p.delta = 0.0;
  const double g = 0.2;
  const double phi_p = g / std::sqrt(p.xi);
  const auto s = Schedule::constant(10.0, g, 0.0);
  SolverOptions o;
  o.dt = 1e-3;
  const auto tr = propagate(JointState::prepared(p.basis(), Branch::Clockwise), p, s, o);
  double worst = 0.0;
  for (const auto& smp : tr.samples) worst = std::max(worst, std::abs(smp.phi_mean_cw - phi_p * (1.0 - std::cos(smp.t))));
  CHECK(worst < 1e-4);
}

TEST_CASE("default schedule from |+>") {
  const CircuitParams p = default_params();
  const auto s = Schedule::linear(10.0, 1.0, 2.0);
  SolverOptions o;
  o.keep_states = false;
  const auto tr = propagate(plus_state(p.basis()), p, s, o);

  CHECK(tr.samples.front().t == 0.0);
  CHECK(tr.samples.back().t == doctest::Approx(10.0).epsilon(1e-14));
  for (std::size_t k = 1; k < tr.samples.size(); ++k) CHECK(tr.samples[k].t > tr.samples[k - 1].t);
  CHECK(tr.states.empty());
  CHECK(tr.max_norm_drift < 1e-8);

  const auto series = reduced_density_series(tr);
  CHECK(series.size() == tr.samples.size());
  double diag_dev = 0.0;
  for (const auto& r : series) {
    CHECK(std::abs(r.trace() - 1.0) < 1e-8);
    CHECK((r - r.adjoint()).norm() < 1e-14);
    diag_dev = std::max(diag_dev, std::abs(r(0, 0).real() - 0.5));
  }
  CHECK(diag_dev < 4e-3);
  CHECK(std::abs(series.back()(0, 1)) < 1e-3);

  // (branch swap, phi -> -phi) mirror symmetry of the final marginal.
  ProtocolSetup setup;
  setup.params = p;
  const auto d = fock_to_phase(tr.final_state, setup.grid, p.xi, pointer_width(setup));
  const auto n = d.phi.size();
  double worst = 0.0;
  for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(d.density_ccw[k] - d.density_cw[n - 1 - k]));
  CHECK(worst < 1e-6);
}

TEST_CASE("keep_states stores every sample; t = 0 state is pure") {
  CircuitParams p;
  p.n_max = 12;
  const auto s = Schedule::linear(1.0, 0.1, 0.2);
  SolverOptions o;
  o.dt = 1e-4;
  o.sample_stride = 100;
  const auto tr = propagate(plus_state(p.basis()), p, s, o);
  CHECK(tr.states.size() == tr.samples.size());
  CHECK(tr.samples.size() == 101);  // 10^4 steps, stride 100, plus t = 0
  const auto r0 = reduced_density_series(tr).front();
  CHECK(std::abs((r0 * r0).trace() - 1.0) < 1e-14);
}

TEST_CASE("norm drift converges at fourth order") {
  const CircuitParams p = default_params();
  const auto s = Schedule::linear(10.0, 1.0, 2.0);
  SolverOptions coarse;
  coarse.dt = 1e-3;
  coarse.norm_tolerance = 1e-6;
  coarse.keep_states = false;
  SolverOptions fine = coarse;
  fine.dt = 5e-4;
  const auto init = JointState::prepared(p.basis(), Branch::Clockwise);
  const double d1 = propagate(init, p, s, coarse).max_norm_drift;
  const double d2 = propagate(init, p, s, fine).max_norm_drift;
  CHECK(std::log2(d1 / d2) >= 3.5);
}

TEST_CASE("drift refinement halves dt and keeps the sample times") {
  const CircuitParams p = default_params();
  const auto s = Schedule::linear(10.0, 1.0, 2.0);
  SolverOptions o;
  o.dt = 1e-3;
  o.keep_states = false;
  const auto init = JointState::prepared(p.basis(), Branch::Clockwise);
  CHECK_THROWS_AS(propagate(init, p, s, o), NormDriftError);  // 1.4e-8 at dt = 1e-3

  o.max_refinements = 1;
  const auto tr = propagate(init, p, s, o);
  CHECK(tr.step == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(tr.options.sample_stride == 20);
  CHECK(tr.samples.size() == 1001);
  CHECK(tr.samples[500].t == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(tr.max_norm_drift < 1e-8);

  o.max_refinements = -1;
  CHECK_THROWS_AS(propagate(init, p, s, o), InvalidArgument);
}
