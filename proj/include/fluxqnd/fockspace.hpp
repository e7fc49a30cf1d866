#pragma once

// Truncated oscillator algebra for the probe, qubit (x) probe composite
// space, and projection of joint states onto phase eigenbras.
//
// Zero-point scale of the phase operator. In units hbar = 1 the quadratic
// part of the probe Hamiltonian is
//
//     (phi0^2 / L) * (4 xi^2 q^2 / 2 + phi^2 / 2),
//
// i.e. an oscillator with "mass" m = L / (2 xi phi0)^2 and frequency
// Omega = 2 xi phi0^2 / L (so phi0^2 / L = Omega / (2 xi)). Its vacuum has
// Var(phi) = 1 / (2 m Omega) = xi, hence
//
//     phi = sqrt(xi) (a + a^dag),      q = i (a^dag - a) / (2 sqrt(xi)),
//
// with [phi, q] = i. The same number comes out of the Gaussian pointer width
// sigma = 1 / sqrt(2 m Omega_eff) at zero screening.

#include <complex>
#include <vector>

#include <Eigen/Core>

namespace fluxqnd {

using cplx = std::complex<double>;

/// Persistent-current branch of the qubit. Index 0 is the counter-clockwise
/// state (sigma_z = -1, pointer at negative phase), index 1 the clockwise one.
enum class Branch : int { CounterClockwise = 0, Clockwise = 1 };

constexpr int branch_index(Branch b) { return static_cast<int>(b); }
constexpr double sigma_z_eigenvalue(Branch b) {
  return b == Branch::Clockwise ? 1.0 : -1.0;
}
constexpr Branch opposite(Branch b) {
  return b == Branch::Clockwise ? Branch::CounterClockwise : Branch::Clockwise;
}
const char* branch_name(Branch b);

class FockBasis {
 public:
  explicit FockBasis(int n_max = 100);

  int n_max() const noexcept { return n_max_; }
  Eigen::Index dim() const noexcept { return n_max_ + 1; }
  Eigen::Index joint_dim() const noexcept { return 2 * dim(); }

  friend bool operator==(const FockBasis&, const FockBasis&) = default;

 private:
  int n_max_;
};

enum class OperatorLabel {
  Identity,
  Ladder,
  Phase,
  Charge,
  CosPhase,
  PauliX,
  PauliY,
  PauliZ,
  Parity,
  Hamiltonian,
  Composite,
};

struct OperatorMatrix {
  OperatorLabel label = OperatorLabel::Composite;
  Eigen::MatrixXcd matrix;

  Eigen::Index dim() const { return matrix.rows(); }
  /// Frobenius norm of (M - M^dag).
  double hermiticity_defect() const;
};

/// Normalized amplitude vector on qubit (x) Fock space. Amplitude of
/// |branch, n> lives at index branch * dim + n.
class JointState {
 public:
  JointState(FockBasis basis, Eigen::VectorXcd amplitudes, double time = 0.0);

  /// (ccw |ccw> + cw |cw>) (x) |fock_level>.
  static JointState product(FockBasis basis, cplx ccw, cplx cw,
                            int fock_level = 0);
  /// Persistent-current state with the probe in its vacuum.
  static JointState prepared(FockBasis basis, Branch branch);

  const FockBasis& basis() const noexcept { return basis_; }
  const Eigen::VectorXcd& amplitudes() const noexcept { return amplitudes_; }
  Eigen::VectorXcd& amplitudes() noexcept { return amplitudes_; }
  double time() const noexcept { return time_; }
  void set_time(double t) noexcept { time_ = t; }

  auto branch(Branch b) const {
    return amplitudes_.segment(branch_index(b) * basis_.dim(), basis_.dim());
  }
  double squared_norm() const { return amplitudes_.squaredNorm(); }

 private:
  FockBasis basis_;
  Eigen::VectorXcd amplitudes_;
  double time_;
};

OperatorMatrix build_identity(const FockBasis& basis);
/// Lowering operator, a|n> = sqrt(n)|n-1>.
OperatorMatrix build_ladder(const FockBasis& basis);
/// phi = sqrt(xi) (a + a^dag). Throws InvalidArgument for xi <= 0.
OperatorMatrix build_phase_op(const FockBasis& basis, double xi);
/// q = i (a^dag - a) / (2 sqrt(xi)).
OperatorMatrix build_charge_op(const FockBasis& basis, double xi);
/// cos(phi) through the eigen-decomposition of the truncated phi.
OperatorMatrix build_cos_phase(const FockBasis& basis, double xi);
/// (-1)^n on the Fock ladder; flips phi -> -phi.
OperatorMatrix build_fock_parity(const FockBasis& basis);
OperatorMatrix build_pauli(OperatorLabel which);

/// Kronecker product qubit (x) probe matching the JointState ordering.
OperatorMatrix joint(const OperatorMatrix& qubit, const OperatorMatrix& probe);

/// Uniform symmetric grid on [-phi_max, phi_max]. An odd point count keeps
/// phi = 0 on a node.
struct PhaseGrid {
  double phi_max = 3.0 * 3.14159265358979323846;
  int points = 2001;

  void validate() const;
  double spacing() const { return 2.0 * phi_max / (points - 1); }
  std::vector<double> nodes() const;
};

/// Composite trapezoid weights for n equally spaced nodes.
std::vector<double> trapezoid_weights(std::size_t n, double h);

struct BranchStats {
  double mass = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Phase-space marginal of a joint state split by qubit branch.
struct PointerDistribution {
  std::vector<double> phi;
  std::vector<double> density_ccw;
  std::vector<double> density_cw;

  const std::vector<double>& density(Branch b) const {
    return b == Branch::Clockwise ? density_cw : density_ccw;
  }
  std::vector<double> total() const;
  double spacing() const { return phi.size() > 1 ? phi[1] - phi[0] : 0.0; }
  /// Trapezoid mass of both branches.
  double mass() const;
  /// Mass, conditional mean and standard deviation of one branch.
  BranchStats stats(Branch b) const;
};

/// Oscillator eigenfunctions psi_n(phi_k) for n = 0..n_max (row n), with
/// vacuum density N(0, xi). Computed by the normalized Hermite recurrence.
Eigen::MatrixXd oscillator_eigenfunctions(int n_max, double xi,
                                          const std::vector<double>& phi);

/// Projects onto <phi, s|psi>. pointer_width is the narrowest feature the
/// grid must resolve (spacing <= pointer_width / 10); more than 1e-6 of
/// probability outside the grid is a GridError as well.
PointerDistribution fock_to_phase(const JointState& state,
                                  const PhaseGrid& grid, double xi,
                                  double pointer_width);

/// Qubit reduced density matrix in the {ccw, cw} basis.
Eigen::Matrix2cd partial_trace_probe(const JointState& state);

}  // namespace fluxqnd
