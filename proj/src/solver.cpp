#include "fluxqnd/solver.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fluxqnd/errors.hpp"

namespace fluxqnd {

namespace {

// Columns: Re psi_ccw, Im psi_ccw, Re psi_cw, Im psi_cw. Rows hold the Fock
// ladder reordered as (even levels, odd levels): cos(phi) is then block
// diagonal and phi only couples the two blocks. H is real symmetric, so
// acting on the real and imaginary parts separately is exact.
using RealState = Eigen::Matrix<double, Eigen::Dynamic, 4>;

class Kernel {
 public:
  Kernel(const FockBasis& basis, const CircuitParams& params)
      : dim_(basis.dim()),
        even_((basis.dim() + 1) / 2),
        odd_(basis.dim() / 2),
        xi_(params.xi),
        epsilon_(params.epsilon),
        delta_(params.delta) {
    const double s = std::sqrt(params.xi);
    number_.resize(dim_);
    for (Eigen::Index n = 0; n < dim_; ++n) number_(row_of(n)) = static_cast<double>(n);

    const Eigen::MatrixXd cos_phi = build_cos_phase(basis, params.xi).matrix.real();
    cos_even_.resize(even_, even_);
    cos_odd_.resize(odd_, odd_);
    for (Eigen::Index i = 0; i < even_; ++i)
      for (Eigen::Index j = 0; j < even_; ++j) cos_even_(i, j) = cos_phi(2 * i, 2 * j);
    for (Eigen::Index i = 0; i < odd_; ++i)
      for (Eigen::Index j = 0; j < odd_; ++j) cos_odd_(i, j) = cos_phi(2 * i + 1, 2 * j + 1);

    // (phi x)_{2k}   = s (sqrt(2k) x_{2k-1} + sqrt(2k+1) x_{2k+1})
    // (phi x)_{2k+1} = s (sqrt(2k+1) x_{2k} + sqrt(2k+2) x_{2k+2})
    even_lo_ = Eigen::VectorXd::Zero(even_);
    even_hi_ = Eigen::VectorXd::Zero(even_);
    odd_lo_ = Eigen::VectorXd::Zero(odd_);
    odd_hi_ = Eigen::VectorXd::Zero(odd_);
    for (Eigen::Index k = 0; k < even_; ++k) {
      if (k >= 1) even_lo_(k) = s * std::sqrt(2.0 * k);
      if (k < odd_) even_hi_(k) = s * std::sqrt(2.0 * k + 1.0);
    }
    for (Eigen::Index k = 0; k < odd_; ++k) {
      odd_lo_(k) = s * std::sqrt(2.0 * k + 1.0);
      if (k + 1 < even_) odd_hi_(k) = s * std::sqrt(2.0 * k + 2.0);
    }
  }

  Eigen::Index rows() const { return dim_; }

  Eigen::Index row_of(Eigen::Index n) const { return n % 2 == 0 ? n / 2 : even_ + n / 2; }

  RealState pack(const JointState& state) const {
    RealState r(dim_, 4);
    for (int b = 0; b < 2; ++b) {
      for (Eigen::Index n = 0; n < dim_; ++n) {
        const cplx c = state.amplitudes()(b * dim_ + n);
        r(row_of(n), 2 * b) = c.real();
        r(row_of(n), 2 * b + 1) = c.imag();
      }
    }
    return r;
  }

  Eigen::VectorXcd unpack(const RealState& r) const {
    Eigen::VectorXcd amp(2 * dim_);
    for (int b = 0; b < 2; ++b) {
      for (Eigen::Index n = 0; n < dim_; ++n) {
        amp(b * dim_ + n) = cplx(r(row_of(n), 2 * b), r(row_of(n), 2 * b + 1));
      }
    }
    return amp;
  }

  /// out = phi * in, column by column.
  void apply_phase(const RealState& in, RealState& out) const {
    for (int c = 0; c < 4; ++c) {
      for (Eigen::Index k = 0; k < even_; ++k) {
        double v = 0.0;
        if (k >= 1) v += even_lo_(k) * in(even_ + k - 1, c);
        if (k < odd_) v += even_hi_(k) * in(even_ + k, c);
        out(k, c) = v;
      }
      for (Eigen::Index k = 0; k < odd_; ++k) {
        double v = odd_lo_(k) * in(k, c);
        if (k + 1 < even_) v += odd_hi_(k) * in(k + 1, c);
        out(even_ + k, c) = v;
      }
    }
  }

  /// out = H * in; phi_in receives phi * in as a by-product.
  void apply(const HamiltonianTerms& terms, const RealState& in, RealState& out, RealState& phi_in) const {
    out.noalias() = number_.asDiagonal() * in;
    const double c_cos = terms.cos_coefficient(xi_);
    if (c_cos != 0.0) {
      out.topRows(even_).noalias() += c_cos * (cos_even_ * in.topRows(even_));
      out.bottomRows(odd_).noalias() += c_cos * (cos_odd_ * in.bottomRows(odd_));
    }
    apply_phase(in, phi_in);
    const double c_z = terms.coupling_coefficient(xi_);
    const double c_tilt = terms.tilt_coefficient(xi_);
    for (int b = 0; b < 2; ++b) {
      const double z = b == 1 ? 1.0 : -1.0;
      const int other = 1 - b;
      const double c_phi = c_z * z + c_tilt;
      out.middleCols<2>(2 * b) += c_phi * phi_in.middleCols<2>(2 * b) + (0.5 * epsilon_ * z) * in.middleCols<2>(2 * b) +
                                  (0.5 * delta_) * in.middleCols<2>(2 * other);
    }
  }

  /// out = -i H in, in the packed real layout.
  void derivative(const HamiltonianTerms& terms, const RealState& in, RealState& out, RealState& h_in,
                  RealState& phi_in) const {
    apply(terms, in, h_in, phi_in);
    out.col(0) = h_in.col(1);
    out.col(1) = -h_in.col(0);
    out.col(2) = h_in.col(3);
    out.col(3) = -h_in.col(2);
  }

 private:
  Eigen::Index dim_, even_, odd_;
  double xi_, epsilon_, delta_;
  Eigen::VectorXd number_;
  Eigen::MatrixXd cos_even_, cos_odd_;
  Eigen::VectorXd even_lo_, even_hi_, odd_lo_, odd_hi_;
};

HamiltonianTerms terms_with_drive(double t, const CircuitParams& params, const Schedule& schedule,
                                  const FluxDrive& drive) {
  return terms_at(t, params, schedule, drive ? drive(t) : FluxPerturbation{});
}

}  // namespace

Eigen::VectorXcd apply_hamiltonian(const JointState& state, const CircuitParams& params,
                                   const HamiltonianTerms& terms) {
  const Kernel kernel(state.basis(), params);
  const RealState in = kernel.pack(state);
  RealState out(kernel.rows(), 4), phi_in(kernel.rows(), 4);
  kernel.apply(terms, in, out, phi_in);
  return kernel.unpack(out);
}

namespace {

Trajectory propagate_fixed(const JointState& initial, const CircuitParams& params, const Schedule& schedule,
                           const SolverOptions& options, const FluxDrive& drive) {
  const double T = schedule.duration();
  const Kernel kernel(initial.basis(), params);
  const long steps = static_cast<long>(std::ceil(T / options.dt - 1e-9));
  const double h = T / static_cast<double>(steps);

  Trajectory traj;
  traj.params = params;
  traj.schedule = schedule;
  traj.options = options;
  traj.step = h;

  RealState psi = kernel.pack(initial);
  const auto rows = kernel.rows();
  RealState k1(rows, 4), k2(rows, 4), k3(rows, 4), k4(rows, 4), stage(rows, 4), h_in(rows, 4), phi_in(rows, 4);

  const auto record = [&](long step) {
    const double t = h * static_cast<double>(step);
    SampleRecord rec;
    rec.t = t;
    rec.norm = psi.squaredNorm();
    const auto terms = terms_with_drive(t, params, schedule, drive);
    kernel.apply(terms, psi, h_in, phi_in);
    rec.energy = psi.cwiseProduct(h_in).sum();
    const double w_ccw = psi.middleCols<2>(0).squaredNorm();
    const double w_cw = psi.middleCols<2>(2).squaredNorm();
    const double phi_ccw = psi.middleCols<2>(0).cwiseProduct(phi_in.middleCols<2>(0)).sum();
    const double phi_cw = psi.middleCols<2>(2).cwiseProduct(phi_in.middleCols<2>(2)).sum();
    rec.phi_mean = phi_ccw + phi_cw;
    rec.phi_mean_ccw = w_ccw > 0.0 ? phi_ccw / w_ccw : 0.0;
    rec.phi_mean_cw = w_cw > 0.0 ? phi_cw / w_cw : 0.0;
    rec.beta = terms.beta;
    rec.coupling = terms.coupling;
    rec.delta_eff = delta_eff(t, params, schedule);
    JointState snapshot(initial.basis(), kernel.unpack(psi), t);
    rec.rho = partial_trace_probe(snapshot);

    const double drift = std::abs(rec.norm - 1.0);
    traj.max_norm_drift = std::max(traj.max_norm_drift, drift);
    if (drift > options.norm_tolerance) {
      throw NormDriftError(fmt::format(
          "norm drift {:.3e} at t = {:.6g} exceeds {:.1e}; reduce dt or raise n_max", drift, t, options.norm_tolerance));
    }
    traj.samples.push_back(rec);
    if (options.keep_states || step == steps) {
      if (options.keep_states) traj.states.push_back(snapshot);
      if (step == steps) traj.final_state = std::move(snapshot);
    }
  };

  record(0);
  for (long step = 0; step < steps; ++step) {
    const double t = h * static_cast<double>(step);
    const auto t0 = terms_with_drive(t, params, schedule, drive);
    const auto t_half = terms_with_drive(t + 0.5 * h, params, schedule, drive);
    const auto t1 = terms_with_drive(t + h, params, schedule, drive);

    kernel.derivative(t0, psi, k1, h_in, phi_in);
    stage = psi + (0.5 * h) * k1;
    kernel.derivative(t_half, stage, k2, h_in, phi_in);
    stage = psi + (0.5 * h) * k2;
    kernel.derivative(t_half, stage, k3, h_in, phi_in);
    stage = psi + h * k3;
    kernel.derivative(t1, stage, k4, h_in, phi_in);
    psi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    const long done = step + 1;
    if (done % options.sample_stride == 0 || done == steps) record(done);
  }
  return traj;
}

}  // namespace

Trajectory propagate(const JointState& initial, const CircuitParams& params, const Schedule& schedule,
                     const SolverOptions& options, const FluxDrive& drive) {
  params.validate();
  if (initial.basis() != params.basis()) {
    throw InvalidArgument("propagate: initial state truncation differs from params.n_max");
  }
  const double T = schedule.duration();
  if (!(options.dt > 0.0) || options.dt > 1e-3 * T * (1.0 + 1e-12)) {
    throw InvalidArgument(fmt::format("propagate: need 0 < dt <= 1e-3 T (dt = {}, T = {})", options.dt, T));
  }
  if (options.sample_stride < 1) throw InvalidArgument("propagate: sample_stride must be >= 1");
  if (std::abs(initial.squared_norm() - 1.0) > 1e-12) {
    throw InvalidArgument("propagate: initial state is not normalized");
  }

  if (options.max_refinements < 0) throw InvalidArgument("propagate: max_refinements must be >= 0");

  SolverOptions o = options;
  for (int attempt = 0;; ++attempt) {
    try {
      return propagate_fixed(initial, params, schedule, o, drive);
    } catch (const NormDriftError&) {
      if (attempt >= options.max_refinements) throw;
      o.dt *= 0.5;
      o.sample_stride *= 2;
    }
  }
}

std::vector<Eigen::Matrix2cd> reduced_density_series(const Trajectory& traj) {
  std::vector<Eigen::Matrix2cd> out;
  out.reserve(traj.samples.size());
  if (traj.states.size() == traj.samples.size()) {
    for (const auto& s : traj.states) out.push_back(partial_trace_probe(s));
  } else {
    for (const auto& s : traj.samples) out.push_back(s.rho);
  }
  return out;
}

}  // namespace fluxqnd
