#pragma once

#include <vector>

#include <Eigen/Core>

#include "fluxqnd/fockspace.hpp"
#include "fluxqnd/model.hpp"

namespace fluxqnd {

struct SolverOptions {
  /// Requested step in units of 1/Omega; rounded down so that T is an
  /// integer number of steps.
  double dt = 5e-4;
  int sample_stride = 10;
  /// Largest tolerated |<psi|psi> - 1| at any sample.
  double norm_tolerance = 1e-8;
  /// Keep the full state at every sample (the final state is always kept).
  bool keep_states = true;
  /// On a norm drift error, retry with dt halved (and the stride doubled, so
  /// sample times stay put) up to this many times before giving up.
  int max_refinements = 0;

  friend bool operator==(const SolverOptions&, const SolverOptions&) = default;
};

/// Derived quantities recorded at one sample time.
struct SampleRecord {
  double t = 0.0;
  double norm = 1.0;  ///< squared norm
  Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
  double phi_mean = 0.0;          ///< <phi> over both branches
  double phi_mean_ccw = 0.0;      ///< <phi> conditioned on the ccw branch
  double phi_mean_cw = 0.0;       ///< <phi> conditioned on the cw branch
  double energy = 0.0;            ///< <H(t)>
  double delta_eff = 0.0;
  double beta = 0.0;
  double coupling = 0.0;
};

struct Trajectory {
  CircuitParams params;
  Schedule schedule = Schedule::linear(1.0, 0.0, 0.0);
  SolverOptions options;
  double step = 0.0;  ///< step actually used
  std::vector<SampleRecord> samples;
  std::vector<JointState> states;  ///< empty unless options.keep_states
  JointState final_state = JointState::product(FockBasis(1), 1.0, 0.0);
  double max_norm_drift = 0.0;
};

/// Classic fixed-step RK4 for i d psi / dt = H(t) psi over [0, T]. No
/// renormalization; a NormDriftError is raised once the drift exceeds
/// options.norm_tolerance and the refinements are used up. The returned
/// options and step are the ones that succeeded. The optional drive adds
/// flux noise.
Trajectory propagate(const JointState& initial, const CircuitParams& params, const Schedule& schedule,
                     const SolverOptions& options = {}, const FluxDrive& drive = {});

/// H(terms) |psi> through the same structured kernel the propagator uses.
Eigen::VectorXcd apply_hamiltonian(const JointState& state, const CircuitParams& params,
                                   const HamiltonianTerms& terms);

/// Qubit reduced density matrix at each sample.
std::vector<Eigen::Matrix2cd> reduced_density_series(const Trajectory& traj);

}  // namespace fluxqnd
