#include "fluxqnd/analytic.hpp"

#include <cmath>
#include <complex>
#include <numbers>

#include "fluxqnd/errors.hpp"

namespace fluxqnd {

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> differentiate(const std::vector<double>& f, double h) {
  const std::size_t n = f.size();
  std::vector<double> d(n);
  for (std::size_t k = 1; k + 1 < n; ++k) d[k] = (f[k + 1] - f[k - 1]) / (2.0 * h);
  d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
  d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
  return d;
}

std::vector<double> running_integral(const std::vector<double>& f, double h, double scale = 1.0) {
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t k = 1; k < f.size(); ++k) out[k] = out[k - 1] + 0.5 * h * scale * (f[k - 1] + f[k]);
  return out;
}

// V_0 |+>, then coherences damped by the pointer overlap.
Eigen::Matrix2cd density_from_block(double big_gamma, double delta_tilde, double damping) {
  const Eigen::Vector2cd plus = Eigen::Vector2cd::Constant(cplx(1.0 / std::sqrt(2.0), 0.0));
  const Eigen::Vector2cd psi = magnus_block(big_gamma, delta_tilde) * plus;
  Eigen::Matrix2cd rho = psi * psi.adjoint();
  rho(0, 1) *= damping;
  rho(1, 0) *= damping;
  return rho;
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double GaussianPointer::density(Branch b, double phi) const {
  const double s = geometry.sigma;
  const double z = (phi - mean(b)) / s;
  return std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * kPi));
}

GaussianPointer gaussian_pointer(const CircuitParams& params, const Schedule& schedule, double t) {
  return GaussianPointer{geometry_at(t, params, schedule)};
}

PointerDistribution gaussian_overlay(const GaussianPointer& pointer, const PhaseGrid& grid, double weight) {
  PointerDistribution d;
  d.phi = grid.nodes();
  d.density_ccw.resize(d.phi.size());
  d.density_cw.resize(d.phi.size());
  for (std::size_t k = 0; k < d.phi.size(); ++k) {
    d.density_ccw[k] = weight * pointer.density(Branch::CounterClockwise, d.phi[k]);
    d.density_cw[k] = weight * pointer.density(Branch::Clockwise, d.phi[k]);
  }
  return d;
}

double analytic_fidelity(const CircuitParams& params, const Schedule& schedule) {
  const auto g = geometry_at(schedule.duration(), params, schedule);
  return normal_cdf(g.phi_p / g.sigma);
}

BackactionTrace backaction_trace(const CircuitParams& params, const Schedule& schedule, int points) {
  if (points < 3) throw InvalidArgument("backaction_trace: need at least 3 grid points");
  params.validate();
  const double T = schedule.duration();
  const double h = T / (points - 1);
  const double m = 1.0 / (2.0 * params.xi);
  const auto basis = params.basis();

  BackactionTrace tr;
  const auto n = static_cast<std::size_t>(points);
  tr.t.resize(n);
  tr.phi_p.resize(n);
  tr.omega_tilde.resize(n);
  tr.phi_p_tilde.resize(n);
  std::vector<double> lambda(n), ov_numeric(n), ov_halfsq(n), ov_gauss(n), ov_coherent(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = h * static_cast<double>(k);
    const auto g = geometry_at(t, params, schedule);
    tr.t[k] = t;
    tr.phi_p[k] = g.phi_p;
    tr.omega_tilde[k] = g.omega_tilde;
    tr.phi_p_tilde[k] = g.phi_p_tilde;
    lambda[k] = schedule.coupling(t) / std::sqrt(params.xi);
    ov_numeric[k] = schedule.coupling(t) == 0.0 ? 1.0 : displaced_vacuum_overlap(g.phi_p_tilde, basis);
    ov_halfsq[k] = std::exp(-0.5 * g.phi_p * g.phi_p);
    ov_gauss[k] = std::exp(-g.phi_p_tilde * g.phi_p_tilde);
    ov_coherent[k] = std::exp(-2.0 * g.phi_p_tilde * g.phi_p_tilde);
  }

  const auto phi_dot = differentiate(tr.phi_p, h);
  const auto omega_dot = differentiate(tr.omega_tilde, h);
  tr.gamma.resize(n);
  tr.gamma_static.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double inertia = phi_dot[k] * phi_dot[k] + 0.25 * (omega_dot[k] / tr.omega_tilde[k]) * tr.phi_p[k];
    tr.gamma_static[k] = -m * lambda[k] * tr.phi_p[k];
    tr.gamma[k] = -m * inertia + tr.gamma_static[k];
  }
  tr.big_gamma = running_integral(tr.gamma, h);
  tr.big_gamma_static = running_integral(tr.gamma_static, h);
  const double half_delta = 0.5 * params.delta;
  tr.delta_tilde = running_integral(ov_numeric, h, half_delta);
  tr.delta_tilde_halfsq = running_integral(ov_halfsq, h, half_delta);
  tr.delta_tilde_gauss = running_integral(ov_gauss, h, half_delta);
  tr.delta_tilde_coherent = running_integral(ov_coherent, h, half_delta);
  tr.omega_integral = running_integral(tr.omega_tilde, h, 0.5);

  tr.kappa.resize(n);
  tr.rho.resize(n);
  tr.rho_static.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    tr.kappa[k] = std::hypot(tr.big_gamma[k], tr.delta_tilde[k]);
    const double damping = std::exp(-tr.phi_p_tilde[k] * tr.phi_p_tilde[k]);
    tr.rho[k] = density_from_block(tr.big_gamma[k], tr.delta_tilde[k], damping);
    tr.rho_static[k] = density_from_block(tr.big_gamma_static[k], tr.delta_tilde[k], damping);
  }
  return tr;
}

Eigen::Matrix2cd magnus_block(double big_gamma, double delta_tilde, double omega_integral) {
  const double k = std::hypot(big_gamma, delta_tilde);
  const double k2 = k * k;
  const double sinc = k < 1e-4 ? 1.0 - k2 / 6.0 + k2 * k2 / 120.0 : std::sin(k) / k;
  const double c = std::cos(k);
  const cplx i(0.0, 1.0);
  Eigen::Matrix2cd v;
  v(0, 0) = c - i * big_gamma * sinc;
  v(1, 1) = c + i * big_gamma * sinc;
  v(0, 1) = i * delta_tilde * sinc;
  v(1, 0) = v(0, 1);
  return std::exp(-i * omega_integral) * v;
}

}  // namespace fluxqnd
