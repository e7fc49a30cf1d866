#pragma once

// Closed-form companions to the numerics: the Gaussian pointer picture and a
// first-order Magnus model of the qubit backaction.

#include <vector>

#include <Eigen/Core>

#include "fluxqnd/fockspace.hpp"
#include "fluxqnd/model.hpp"

namespace fluxqnd {

/// Standard normal CDF. Evaluated as erfc(-x / sqrt 2) / 2, accurate to a few
/// ulp over the whole real line.
double normal_cdf(double x);

/// Conditional pointer states N(-phi_p, sigma^2) for ccw and N(+phi_p, sigma^2)
/// for cw around the instantaneous potential minima.
struct GaussianPointer {
  WellGeometry geometry;

  double mean(Branch b) const { return sigma_z_eigenvalue(b) * geometry.phi_p; }
  double sigma() const { return geometry.sigma; }
  double density(Branch b, double phi) const;
};

GaussianPointer gaussian_pointer(const CircuitParams& params, const Schedule& schedule, double t);

/// Gaussian densities on a phase grid, each branch weighted by `weight`.
PointerDistribution gaussian_overlay(const GaussianPointer& pointer, const PhaseGrid& grid, double weight = 0.5);

/// Phi(phi_p(T) / sigma(T)).
double analytic_fidelity(const CircuitParams& params, const Schedule& schedule);

/// Quantities of the Magnus backaction model on a uniform time grid, for the
/// qubit starting in (|ccw> + |cw>) / sqrt 2 at eps = 0.
struct BackactionTrace {
  std::vector<double> t;
  std::vector<double> phi_p;
  std::vector<double> omega_tilde;
  std::vector<double> phi_p_tilde;
  std::vector<double> gamma;           ///< -m (phi_p'^2 + omega'/(4 omega) phi_p + lambda phi_p)
  std::vector<double> big_gamma;       ///< running integral of gamma
  std::vector<double> gamma_static;    ///< inertia terms dropped: -m lambda phi_p
  std::vector<double> big_gamma_static;
  std::vector<double> delta_tilde;     ///< (Delta/2) int <N+|N->, numeric vacuum overlap
  std::vector<double> delta_tilde_halfsq;   ///< same with exp(-phi_p^2 / 2)
  std::vector<double> delta_tilde_gauss;    ///< same with exp(-phi_p_tilde^2)
  std::vector<double> delta_tilde_coherent; ///< same with exp(-2 phi_p_tilde^2)
  std::vector<double> kappa;
  std::vector<double> omega_integral;  ///< int Omega_0 = int omega_tilde / 2
  std::vector<Eigen::Matrix2cd> rho;   ///< analytic qubit density matrix
  std::vector<Eigen::Matrix2cd> rho_static;  ///< same from big_gamma_static

  std::size_t size() const { return t.size(); }
};

/// points >= 3 grid nodes over [0, T]. Derivatives of phi_p and omega_tilde
/// use central differences with one-sided second-order stencils at the ends.
BackactionTrace backaction_trace(const CircuitParams& params, const Schedule& schedule, int points = 2001);

/// First-order Magnus block of excitation manifold N:
///   e^{-i int Omega_N} [[cos k - i (G/k) sin k, i (D/k) sin k],
///                       [i (D/k) sin k,       cos k + i (G/k) sin k]],
/// with k = sqrt(G^2 + D^2). Small k uses the series of sin k / k.
Eigen::Matrix2cd magnus_block(double big_gamma, double delta_tilde, double omega_integral = 0.0);

}  // namespace fluxqnd
