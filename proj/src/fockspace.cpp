#include "fluxqnd/fockspace.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "fluxqnd/errors.hpp"

namespace fluxqnd {

const char* branch_name(Branch b) {
  return b == Branch::Clockwise ? "cw" : "ccw";
}

FockBasis::FockBasis(int n_max) : n_max_(n_max) {
  if (n_max < 1) {
    throw InvalidArgument(fmt::format("FockBasis: n_max must be >= 1, got {}", n_max));
  }
}

double OperatorMatrix::hermiticity_defect() const {
  return (matrix - matrix.adjoint()).norm();
}

JointState::JointState(FockBasis basis, Eigen::VectorXcd amplitudes, double time)
    : basis_(basis), amplitudes_(std::move(amplitudes)), time_(time) {
  if (amplitudes_.size() != basis_.joint_dim()) {
    throw InvalidArgument(fmt::format("JointState: expected {} amplitudes, got {}",
                                      basis_.joint_dim(), amplitudes_.size()));
  }
}

JointState JointState::product(FockBasis basis, cplx ccw, cplx cw, int fock_level) {
  if (fock_level < 0 || fock_level > basis.n_max()) {
    throw InvalidArgument("JointState::product: Fock level outside the basis");
  }
  Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(basis.joint_dim());
  amp(fock_level) = ccw;
  amp(basis.dim() + fock_level) = cw;
  return JointState(basis, std::move(amp));
}

JointState JointState::prepared(FockBasis basis, Branch branch) {
  return branch == Branch::Clockwise ? product(basis, 0.0, 1.0)
                                     : product(basis, 1.0, 0.0);
}

OperatorMatrix build_identity(const FockBasis& basis) {
  return {OperatorLabel::Identity, Eigen::MatrixXcd::Identity(basis.dim(), basis.dim())};
}

OperatorMatrix build_ladder(const FockBasis& basis) {
  const auto d = basis.dim();
  Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(d, d);
  for (Eigen::Index n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return {OperatorLabel::Ladder, std::move(a)};
}

namespace {

double zero_point_scale(double xi) {
  if (!(xi > 0.0) || !std::isfinite(xi)) {
    throw InvalidArgument(fmt::format("xi must be positive and finite, got {}", xi));
  }
  return std::sqrt(xi);
}

}  // namespace

OperatorMatrix build_phase_op(const FockBasis& basis, double xi) {
  const double s = zero_point_scale(xi);
  const auto a = build_ladder(basis).matrix;
  return {OperatorLabel::Phase, s * (a + a.adjoint())};
}

OperatorMatrix build_charge_op(const FockBasis& basis, double xi) {
  const double s = zero_point_scale(xi);
  const auto a = build_ladder(basis).matrix;
  return {OperatorLabel::Charge, cplx(0.0, 1.0 / (2.0 * s)) * (a.adjoint() - a)};
}

OperatorMatrix build_cos_phase(const FockBasis& basis, double xi) {
  // phi is real symmetric in the Fock basis, so the decomposition stays real.
  const double s = zero_point_scale(xi);
  const auto d = basis.dim();
  Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index n = 1; n < d; ++n) {
    phi(n - 1, n) = phi(n, n - 1) = s * std::sqrt(static_cast<double>(n));
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(phi);
  const Eigen::VectorXd c = eig.eigenvalues().array().cos();
  Eigen::MatrixXd cos_phi = eig.eigenvectors() * c.asDiagonal() * eig.eigenvectors().transpose();
  // Symmetrize away rounding in the back-transform.
  cos_phi = 0.5 * (cos_phi + cos_phi.transpose()).eval();
  return {OperatorLabel::CosPhase, cos_phi.cast<cplx>()};
}

OperatorMatrix build_fock_parity(const FockBasis& basis) {
  Eigen::VectorXcd diag(basis.dim());
  for (Eigen::Index n = 0; n < basis.dim(); ++n) diag(n) = (n % 2 == 0) ? 1.0 : -1.0;
  return {OperatorLabel::Parity, diag.asDiagonal()};
}

OperatorMatrix build_pauli(OperatorLabel which) {
  Eigen::Matrix2cd m;
  switch (which) {
    case OperatorLabel::PauliX:
      m << 0.0, 1.0, 1.0, 0.0;
      break;
    case OperatorLabel::PauliY:
      m << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
      break;
    // Rows/columns ordered (ccw, cw); sigma_z|cw> = +|cw>.
    case OperatorLabel::PauliZ:
      m << -1.0, 0.0, 0.0, 1.0;
      break;
    case OperatorLabel::Identity:
      m.setIdentity();
      break;
    default:
      throw InvalidArgument("build_pauli: not a qubit operator label");
  }
  return {which, m};
}

OperatorMatrix joint(const OperatorMatrix& qubit, const OperatorMatrix& probe) {
  if (qubit.dim() != 2) throw InvalidArgument("joint: qubit factor must be 2x2");
  const auto d = probe.dim();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(2 * d, 2 * d);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      if (qubit.matrix(i, j) != cplx(0.0)) out.block(i * d, j * d, d, d) = qubit.matrix(i, j) * probe.matrix;
    }
  }
  return {OperatorLabel::Composite, std::move(out)};
}

void PhaseGrid::validate() const {
  if (!(phi_max > 0.0)) throw GridError("phase grid: phi_max must be positive");
  if (points < 3 || points % 2 == 0) {
    throw GridError(fmt::format("phase grid: need an odd point count >= 3, got {}", points));
  }
}

std::vector<double> PhaseGrid::nodes() const {
  validate();
  std::vector<double> out(points);
  const double h = spacing();
  const int mid = points / 2;
  for (int k = 0; k < points; ++k) out[k] = (k - mid) * h;
  return out;
}

std::vector<double> trapezoid_weights(std::size_t n, double h) {
  std::vector<double> w(n, h);
  if (n > 0) {
    w.front() = 0.5 * h;
    w.back() = 0.5 * h;
  }
  return w;
}

std::vector<double> PointerDistribution::total() const {
  std::vector<double> out(phi.size());
  for (std::size_t k = 0; k < phi.size(); ++k) out[k] = density_ccw[k] + density_cw[k];
  return out;
}

double PointerDistribution::mass() const {
  const auto w = trapezoid_weights(phi.size(), spacing());
  double m = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) m += w[k] * (density_ccw[k] + density_cw[k]);
  return m;
}

BranchStats PointerDistribution::stats(Branch b) const {
  const auto& p = density(b);
  const auto w = trapezoid_weights(phi.size(), spacing());
  BranchStats s;
  double first = 0.0, second = 0.0;
  for (std::size_t k = 0; k < phi.size(); ++k) {
    s.mass += w[k] * p[k];
    first += w[k] * p[k] * phi[k];
    second += w[k] * p[k] * phi[k] * phi[k];
  }
  if (s.mass > 0.0) {
    s.mean = first / s.mass;
    s.stddev = std::sqrt(std::max(0.0, second / s.mass - s.mean * s.mean));
  }
  return s;
}

Eigen::MatrixXd oscillator_eigenfunctions(int n_max, double xi, const std::vector<double>& phi) {
  const double s = zero_point_scale(xi);
  const Eigen::Index cols = static_cast<Eigen::Index>(phi.size());
  Eigen::MatrixXd psi(n_max + 1, cols);
  const double norm0 = std::pow(2.0 * std::numbers::pi * xi, -0.25);
  for (Eigen::Index k = 0; k < cols; ++k) {
    const double x = phi[k] / (std::numbers::sqrt2 * s);
    psi(0, k) = norm0 * std::exp(-0.5 * x * x);
    if (n_max >= 1) psi(1, k) = std::numbers::sqrt2 * x * psi(0, k);
    for (int n = 1; n < n_max; ++n) {
      psi(n + 1, k) = std::sqrt(2.0 / (n + 1)) * x * psi(n, k) - std::sqrt(static_cast<double>(n) / (n + 1)) * psi(n - 1, k);
    }
  }
  return psi;
}

PointerDistribution fock_to_phase(const JointState& state, const PhaseGrid& grid, double xi,
                                  double pointer_width) {
  grid.validate();
  const double h = grid.spacing();
  if (!(pointer_width > 0.0)) throw InvalidArgument("fock_to_phase: pointer_width must be positive");
  if (h > pointer_width / 10.0) {
    throw GridError(fmt::format("phase grid too coarse: spacing {:.4g} exceeds sigma/10 = {:.4g}", h,
                                pointer_width / 10.0));
  }
  PointerDistribution out;
  out.phi = grid.nodes();
  const Eigen::MatrixXd eigfun = oscillator_eigenfunctions(state.basis().n_max(), xi, out.phi);
  // Amplitudes <phi_k, s|psi> for both branches at once: (points x 2).
  Eigen::MatrixXcd coeff(state.basis().dim(), 2);
  coeff.col(0) = state.branch(Branch::CounterClockwise);
  coeff.col(1) = state.branch(Branch::Clockwise);
  const Eigen::MatrixXcd amp = eigfun.transpose().cast<cplx>() * coeff;
  out.density_ccw.resize(out.phi.size());
  out.density_cw.resize(out.phi.size());
  for (std::size_t k = 0; k < out.phi.size(); ++k) {
    out.density_ccw[k] = std::norm(amp(static_cast<Eigen::Index>(k), 0));
    out.density_cw[k] = std::norm(amp(static_cast<Eigen::Index>(k), 1));
  }
  const double outside = state.squared_norm() - out.mass();
  if (outside > 1e-6) {
    throw GridError(fmt::format("phase grid too narrow: {:.3g} of the probability lies outside +-{:.4g}",
                                outside, grid.phi_max));
  }
  return out;
}

Eigen::Matrix2cd partial_trace_probe(const JointState& state) {
  const auto ccw = state.branch(Branch::CounterClockwise);
  const auto cw = state.branch(Branch::Clockwise);
  Eigen::Matrix2cd rho;
  rho(0, 0) = ccw.squaredNorm();
  rho(1, 1) = cw.squaredNorm();
  // rho_{ij} = sum_n psi_{i,n} conj(psi_{j,n}); dot() conjugates its left argument.
  rho(0, 1) = cw.dot(ccw);
  rho(1, 0) = std::conj(rho(0, 1));
  return rho;
}

}  // namespace fluxqnd
