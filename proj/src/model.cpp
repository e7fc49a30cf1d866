#include "fluxqnd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "fluxqnd/errors.hpp"

namespace fluxqnd {

namespace {

constexpr double kPi = std::numbers::pi;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw InvalidArgument(fmt::format("{} must be finite", what));
}

}  // namespace

void CircuitParams::validate() const {
  require_finite(xi, "xi");
  require_finite(epsilon, "epsilon");
  require_finite(delta, "delta");
  require_finite(beta_max, "beta_max");
  require_finite(g_max, "g_max");
  require_finite(screening_prefactor, "screening_prefactor");
  if (!(xi > 0.0)) throw InvalidArgument(fmt::format("xi must be > 0, got {}", xi));
  if (delta < 0.0) throw InvalidArgument(fmt::format("delta must be >= 0, got {}", delta));
  if (beta_max < 0.0) throw InvalidArgument(fmt::format("beta_max must be >= 0, got {}", beta_max));
  if (g_max < 0.0) throw InvalidArgument(fmt::format("g_max must be >= 0, got {}", g_max));
  if (n_max < 1) throw InvalidArgument(fmt::format("n_max must be >= 1, got {}", n_max));
}

double CircuitParams::lambda_max() const { return g_max / std::sqrt(xi); }

double qubit_coefficient(double quoted, FrequencyConvention convention) {
  switch (convention) {
    case FrequencyConvention::Angular:
      return quoted;
    case FrequencyConvention::Cyclic:
      return 2.0 * kPi * quoted;
    case FrequencyConvention::InverseCyclic:
      return quoted / (2.0 * kPi);
  }
  return quoted;
}

const char* convention_name(FrequencyConvention c) {
  switch (c) {
    case FrequencyConvention::Angular:
      return "angular";
    case FrequencyConvention::Cyclic:
      return "cyclic";
    case FrequencyConvention::InverseCyclic:
      return "inverse_cyclic";
  }
  return "angular";
}

FrequencyConvention parse_convention(const std::string& name) {
  if (name == "angular") return FrequencyConvention::Angular;
  if (name == "cyclic") return FrequencyConvention::Cyclic;
  if (name == "inverse_cyclic") return FrequencyConvention::InverseCyclic;
  throw InvalidArgument(fmt::format("unknown frequency convention '{}'", name));
}

// ---------------------------------------------------------------------------
// Schedule

Schedule::Schedule(ScheduleShape shape, std::vector<double> t, std::vector<double> g, std::vector<double> beta)
    : shape_(shape), duration_(0.0), t_(std::move(t)), g_(std::move(g)), beta_(std::move(beta)) {
  if (t_.size() < 2 || g_.size() != t_.size() || beta_.size() != t_.size()) {
    throw InvalidArgument("schedule: need >= 2 knots with matching g and beta columns");
  }
  if (t_.front() != 0.0) throw InvalidArgument("schedule: first knot must be at t = 0");
  for (std::size_t k = 0; k < t_.size(); ++k) {
    require_finite(t_[k], "schedule time");
    require_finite(g_[k], "schedule coupling");
    require_finite(beta_[k], "schedule beta");
    if (k > 0 && !(t_[k] > t_[k - 1])) throw InvalidArgument("schedule: knot times must increase strictly");
  }
  duration_ = t_.back();
}

Schedule Schedule::linear(double duration, double g_max, double beta_max) {
  if (!(duration > 0.0)) throw InvalidArgument(fmt::format("schedule: T must be > 0, got {}", duration));
  return Schedule(ScheduleShape::Linear, {0.0, duration}, {0.0, g_max}, {0.0, beta_max});
}

Schedule Schedule::table(std::vector<double> t, std::vector<double> g, std::vector<double> beta) {
  return Schedule(ScheduleShape::Table, std::move(t), std::move(g), std::move(beta));
}

Schedule Schedule::constant(double duration, double g, double beta) {
  if (!(duration > 0.0)) throw InvalidArgument(fmt::format("schedule: T must be > 0, got {}", duration));
  return Schedule(ScheduleShape::Table, {0.0, duration}, {g, g}, {beta, beta});
}

std::size_t Schedule::segment(double t) const {
  const auto it = std::upper_bound(t_.begin(), t_.end(), t);
  const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - t_.begin() - 1));
  return std::min(k, t_.size() - 2);
}

namespace {

double interpolate(const std::vector<double>& t, const std::vector<double>& y, std::size_t k, double at) {
  const double w = (at - t[k]) / (t[k + 1] - t[k]);
  return y[k] + w * (y[k + 1] - y[k]);
}

}  // namespace

double Schedule::coupling(double t) const {
  const double tc = std::clamp(t, 0.0, duration_);
  return interpolate(t_, g_, segment(tc), tc);
}

double Schedule::beta(double t) const {
  const double tc = std::clamp(t, 0.0, duration_);
  return interpolate(t_, beta_, segment(tc), tc);
}

double Schedule::coupling_rate(double t) const {
  const auto k = segment(std::clamp(t, 0.0, duration_));
  return (g_[k + 1] - g_[k]) / (t_[k + 1] - t_[k]);
}

double Schedule::beta_rate(double t) const {
  const auto k = segment(std::clamp(t, 0.0, duration_));
  return (beta_[k + 1] - beta_[k]) / (t_[k + 1] - t_[k]);
}

bool Schedule::starts_decoupled() const { return g_.front() == 0.0 && beta_.front() == 0.0; }

// ---------------------------------------------------------------------------
// Control flux and Hamiltonian

double beta_from_control_flux(double phi_c, double prefactor) { return prefactor * std::cos(kPi * phi_c); }

double control_flux_from_beta(double beta, double prefactor) {
  if (!(prefactor > 0.0)) throw InvalidArgument("control flux map: prefactor must be > 0");
  double x = beta / prefactor;
  if (x > 1.0 + 1e-12 || x < -1.0 - 1e-12) {
    throw InvalidArgument(fmt::format("beta {} exceeds the screening prefactor {}", beta, prefactor));
  }
  x = std::clamp(x, -1.0, 1.0);
  return std::acos(x) / kPi;
}

double HamiltonianTerms::cos_coefficient(double xi) const { return beta / (2.0 * xi); }

double HamiltonianTerms::coupling_coefficient(double xi) const { return -coupling / (2.0 * xi * std::sqrt(xi)); }

double HamiltonianTerms::tilt_coefficient(double xi) const { return -kPi * tilt_flux / xi; }

HamiltonianTerms terms_at(double t, const CircuitParams& params, const Schedule& schedule,
                          const FluxPerturbation& perturbation) {
  HamiltonianTerms terms;
  terms.coupling = schedule.coupling(t);
  terms.beta = schedule.beta(t);
  if (perturbation.small_loop != 0.0) {
    const double phi_c = control_flux_from_beta(terms.beta, params.screening_prefactor);
    terms.beta = beta_from_control_flux(phi_c + perturbation.small_loop, params.screening_prefactor);
  }
  terms.tilt_flux = perturbation.large_loop;
  return terms;
}

OperatorMatrix hamiltonian_at(double t, const CircuitParams& params, const Schedule& schedule,
                              std::optional<FluxPerturbation> perturbation) {
  params.validate();
  const double slack = 1e-12 * schedule.duration();
  if (t < -slack || t > schedule.duration() + slack) {
    throw InvalidArgument(fmt::format("hamiltonian_at: t = {} outside [0, {}]", t, schedule.duration()));
  }
  const auto terms = terms_at(t, params, schedule, perturbation.value_or(FluxPerturbation{}));
  const auto basis = params.basis();
  const auto a = build_ladder(basis);
  const OperatorMatrix number{OperatorLabel::Composite, a.matrix.adjoint() * a.matrix};
  const auto phi = build_phase_op(basis, params.xi);
  const auto cos_phi = build_cos_phase(basis, params.xi);
  const auto id_probe = build_identity(basis);
  const auto id_qubit = build_pauli(OperatorLabel::Identity);
  const auto sx = build_pauli(OperatorLabel::PauliX);
  const auto sz = build_pauli(OperatorLabel::PauliZ);

  Eigen::MatrixXcd h = joint(id_qubit, number).matrix;
  h += terms.cos_coefficient(params.xi) * joint(id_qubit, cos_phi).matrix;
  h += terms.coupling_coefficient(params.xi) * joint(sz, phi).matrix;
  h += terms.tilt_coefficient(params.xi) * joint(id_qubit, phi).matrix;
  h += 0.5 * params.epsilon * joint(sz, id_probe).matrix;
  h += 0.5 * params.delta * joint(sx, id_probe).matrix;
  return {OperatorLabel::Hamiltonian, std::move(h)};
}

// ---------------------------------------------------------------------------
// Potential geometry

double find_potential_minimum(double beta, double lambda) {
  if (!(beta >= 0.0) || !(lambda >= 0.0)) {
    throw InvalidArgument(fmt::format("find_potential_minimum: need beta, lambda >= 0 (got {}, {})", beta, lambda));
  }
  const auto f = [&](double x) { return x - beta * std::sin(x) - lambda; };
  const auto df = [&](double x) { return 1.0 - beta * std::cos(x); };

  double hi = kPi + lambda;
  if (f(hi) <= 0.0) hi = beta + lambda + 1.0;  // f(beta + lambda + 1) >= 1

  double lo = 0.0;
  if (lambda == 0.0) {
    if (beta <= 1.0) return 0.0;
    // f < 0 just right of the origin: f ~ (1 - beta) x + beta x^3 / 6.
    lo = std::min(0.5 * std::sqrt(6.0 * (beta - 1.0) / beta), 0.5 * hi);
    if (f(lo) >= 0.0) return lo;  // pathological rounding near the bifurcation
  } else {
    // Scan down from the right end for the last sign change; left of it the
    // function may dip below zero again only in the other well.
    constexpr int kScan = 1024;
    double prev = hi;
    for (int k = kScan - 1; k >= 0; --k) {
      const double x = hi * k / kScan;
      if (f(x) < 0.0) {
        lo = x;
        hi = prev;
        break;
      }
      prev = x;
    }
  }
  for (int it = 0; it < 200 && hi - lo > 4e-16 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 3; ++it) {
    const double d = df(x);
    if (d == 0.0) break;
    const double next = x - f(x) / d;
    if (!(next >= lo - 1e-12 && next <= hi + 1e-12)) break;
    x = next;
  }
  return x;
}

double effective_frequency(double beta, double phi_p) {
  const double curvature = 1.0 - beta * std::cos(phi_p);
  if (!(curvature > 0.0)) {
    throw CurvatureError(
        fmt::format("non-positive curvature 1 - beta cos(phi_p) = {:.6g} (beta = {}, phi_p = {})", curvature, beta, phi_p));
  }
  return std::sqrt(curvature);
}

WellGeometry well_geometry(double beta, double lambda, double xi) {
  WellGeometry w;
  w.phi_p = find_potential_minimum(beta, lambda);
  w.omega_tilde = effective_frequency(beta, w.phi_p);
  w.sigma = std::sqrt(xi / w.omega_tilde);
  w.phi_p_tilde = w.phi_p / (2.0 * w.sigma);
  return w;
}

WellGeometry geometry_at(double t, const CircuitParams& params, const Schedule& schedule) {
  return well_geometry(schedule.beta(t), schedule.coupling(t) / std::sqrt(params.xi), params.xi);
}

double displaced_vacuum_overlap(double alpha, const FockBasis& basis) {
  // c_n(alpha) = exp(-alpha^2/2) alpha^n / sqrt(n!), and c_n(-alpha) = (-1)^n c_n(alpha).
  double c = std::exp(-0.5 * alpha * alpha);
  double sum = c * c;
  for (int n = 1; n <= basis.n_max(); ++n) {
    c *= alpha / std::sqrt(static_cast<double>(n));
    sum += (n % 2 == 0 ? 1.0 : -1.0) * c * c;
  }
  return std::abs(sum);
}

double delta_eff(double t, const CircuitParams& params, const Schedule& schedule) {
  if (schedule.coupling(t) == 0.0) return params.delta;
  const auto geom = geometry_at(t, params, schedule);
  return params.delta * displaced_vacuum_overlap(geom.phi_p_tilde, params.basis());
}

double adiabaticity_margin(const Schedule& schedule, const CircuitParams& params, int samples) {
  if (samples < 2) throw InvalidArgument("adiabaticity_margin: need >= 2 samples");
  const double root_xi = std::sqrt(params.xi);
  double worst = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double t = schedule.duration() * k / (samples - 1);
    worst = std::max({worst, std::abs(schedule.coupling_rate(t)) / root_xi, std::abs(schedule.beta_rate(t))});
  }
  return worst;
}

QndBudget qnd_budget(const Schedule& schedule, const CircuitParams& params, int samples) {
  if (samples < 1001) throw InvalidArgument("qnd_budget: need >= 1001 quadrature samples");
  const double T = schedule.duration();
  const double h = T / (samples - 1);
  double integral = 0.0;
  for (int k = 0; k < samples; ++k) {
    const double w = (k == 0 || k == samples - 1) ? 0.5 * h : h;
    integral += w * delta_eff(h * k, params, schedule);
  }
  QndBudget out;
  out.integral = integral / (2.0 * kPi);
  out.naive = T * std::hypot(params.delta, params.epsilon) / (2.0 * kPi);
  return out;
}

}  // namespace fluxqnd
