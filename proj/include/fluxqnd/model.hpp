#pragma once

// Circuit parameters, ramp schedules and the dimensionless qubit-probe
// Hamiltonian
//
//   H / Omega = a^dag a + (beta / 2 xi) cos(phi)
//               - (1 / 2 xi) (g / sqrt(xi)) phi sigma_z
//               + (eps sigma_z + Delta sigma_x) / 2,
//
// obtained from the circuit Hamiltonian with phi0^2 / L = Omega / (2 xi).
// Energies are in units of Omega, times in units of 1/Omega, hbar = 1.

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fluxqnd/fockspace.hpp"

namespace fluxqnd {

struct CircuitParams {
  double xi = 0.1;
  double epsilon = 0.0;
  double delta = 0.1;
  double beta_max = 2.0;
  double g_max = 1.0;
  int n_max = 100;
  /// 2 I0 L / phi0, used by the control-flux map only.
  double screening_prefactor = 2.0;

  void validate() const;
  FockBasis basis() const { return FockBasis(n_max); }
  /// lambda_max = g_max / sqrt(xi): coupling measured in phase units.
  double lambda_max() const;

  friend bool operator==(const CircuitParams&, const CircuitParams&) = default;
};

/// How a quoted qubit frequency "r * Omega" becomes a Hamiltonian coefficient.
enum class FrequencyConvention {
  Angular,        ///< Delta = r (angular qubit frequency in units of Omega)
  Cyclic,         ///< Delta = 2 pi r (Delta / h = r Omega, with h = 2 pi)
  InverseCyclic,  ///< Delta = r / 2 pi (angular qubit frequency vs. Omega / 2 pi)
};

double qubit_coefficient(double quoted, FrequencyConvention convention);
const char* convention_name(FrequencyConvention c);
FrequencyConvention parse_convention(const std::string& name);

enum class ScheduleShape { Linear, Table };

/// Time courses g(t) and beta(t) on [0, T].
class Schedule {
 public:
  /// Simultaneous linear ramps from (0, 0) to (g_max, beta_max).
  static Schedule linear(double duration, double g_max, double beta_max);
  /// Piecewise-linear interpolation through the given knots. Knot times must
  /// start at 0 and increase strictly.
  static Schedule table(std::vector<double> t, std::vector<double> g, std::vector<double> beta);
  /// Frozen couplings, handy for closed-form checks.
  static Schedule constant(double duration, double g, double beta);

  double duration() const noexcept { return duration_; }
  ScheduleShape shape() const noexcept { return shape_; }
  double coupling(double t) const;
  double beta(double t) const;
  double coupling_rate(double t) const;
  double beta_rate(double t) const;
  /// g(0) = beta(0) = 0: the probe starts purely quadratic and decoupled.
  bool starts_decoupled() const;

  const std::vector<double>& knot_times() const noexcept { return t_; }
  const std::vector<double>& knot_coupling() const noexcept { return g_; }
  const std::vector<double>& knot_beta() const noexcept { return beta_; }

  friend bool operator==(const Schedule&, const Schedule&) = default;

 private:
  Schedule(ScheduleShape shape, std::vector<double> t, std::vector<double> g, std::vector<double> beta);
  std::size_t segment(double t) const;

  ScheduleShape shape_;
  double duration_;
  std::vector<double> t_;
  std::vector<double> g_;
  std::vector<double> beta_;
};

/// Flux noise on the two probe loops, in units of Phi0.
struct FluxPerturbation {
  double small_loop = 0.0;
  double large_loop = 0.0;
};

using FluxDrive = std::function<FluxPerturbation(double t)>;

/// beta_cjj = prefactor * cos(pi * phi_c), phi_c in units of Phi0.
double beta_from_control_flux(double phi_c, double prefactor);
/// Inverse branch on phi_c in [0, 1/2] for beta in [0, prefactor].
double control_flux_from_beta(double beta, double prefactor);

/// Scalar coefficients of the Hamiltonian at one instant.
struct HamiltonianTerms {
  double beta = 0.0;       ///< screening, after any small-loop perturbation
  double coupling = 0.0;   ///< g(t)
  double tilt_flux = 0.0;  ///< large-loop flux offset in Phi0

  /// Coefficient of cos(phi).
  double cos_coefficient(double xi) const;
  /// Coefficient of phi (x) sigma_z.
  double coupling_coefficient(double xi) const;
  /// Coefficient of phi (x) 1.
  double tilt_coefficient(double xi) const;
};

HamiltonianTerms terms_at(double t, const CircuitParams& params, const Schedule& schedule,
                          const FluxPerturbation& perturbation = {});

/// Dense joint Hamiltonian at time t. Throws InvalidArgument outside [0, T].
OperatorMatrix hamiltonian_at(double t, const CircuitParams& params, const Schedule& schedule,
                              std::optional<FluxPerturbation> perturbation = std::nullopt);

/// Largest non-negative root of phi - beta sin(phi) - lambda = 0.
double find_potential_minimum(double beta, double lambda);

/// Omega_eff / Omega = sqrt(1 - beta cos(phi_p)); CurvatureError if <= 0.
double effective_frequency(double beta, double phi_p);

struct WellGeometry {
  double phi_p = 0.0;
  double omega_tilde = 1.0;
  double sigma = 0.0;
  /// phi_p * sqrt(m Omega_eff / 2) = phi_p / (2 sigma): coherent amplitude.
  double phi_p_tilde = 0.0;
};

WellGeometry well_geometry(double beta, double lambda, double xi);
WellGeometry geometry_at(double t, const CircuitParams& params, const Schedule& schedule);

/// <alpha| -alpha> summed over the truncated Fock amplitudes of the two
/// coherent states. Tends to exp(-2 alpha^2) as the truncation grows.
double displaced_vacuum_overlap(double alpha, const FockBasis& basis);

/// Delta * |<g-|g+>|. Without coupling the two pointers coincide and the
/// result is Delta.
double delta_eff(double t, const CircuitParams& params, const Schedule& schedule);

/// max_t max(|g'| / sqrt(xi), |beta'|) in units of Omega.
double adiabaticity_margin(const Schedule& schedule, const CircuitParams& params, int samples = 10001);

struct QndBudget {
  /// (int_0^T Delta_eff dt) / h.
  double integral = 0.0;
  /// T sqrt(Delta^2 + eps^2) / h.
  double naive = 0.0;
};

QndBudget qnd_budget(const Schedule& schedule, const CircuitParams& params, int samples = 2001);

}  // namespace fluxqnd
