#include "nlsgd/theory.hpp"

#include "nlsgd/quadrature.hpp"
#include "parse_util.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace nlsgd {

QuadratureError::QuadratureError(const std::string& what, double achieved)
    : ComputeError(what + " (achieved error estimate " + detail::format_double(achieved) + ")"), achieved_(achieved) {}

namespace {

constexpr double kTailMass = 1e-10;
constexpr double kSegmentTol = 1e-13;
constexpr double kRequiredTol = 1e-8;

void require_density(const NoiseModel& nm) {
  if (nm.is_zero()) throw ConfigError("theory quantities require a noise density; zero noise has none");
}

bool is_linear_growth(const ComponentNonlinearity& nl) {
  return nl.bound().bound_class == BoundClass::LinearGrowth;
}

double linear_slope(const ComponentNonlinearity& nl) {
  if (const auto* l = std::get_if<component::Linear>(&nl.kind())) return l->slope;
  return 1.0;
}

/// u with P(nu > u) = kTailMass.
double tail_cutoff(const NoiseModel& nm) { return nm.inverse_cdf(1.0 - kTailMass); }

/// Integral over u > 0 of g(u) p(u), split at `splits`, truncated at the
/// tail cutoff R with correction g(R) P(nu > R).
double half_line_integral(const std::function<double(double)>& g, const NoiseModel& nm, std::vector<double> splits) {
  const double r = tail_cutoff(nm);
  std::vector<double> points{0.0};
  std::sort(splits.begin(), splits.end());
  for (double s : splits)
    if (s > points.back() && s < r) points.push_back(s);
  points.push_back(r);

  auto integrand = [&](double u) { return g(u) * nm.pdf(u); };
  QuadratureOptions opts;
  opts.abs_tol = kSegmentTol;
  opts.max_intervals = 4000;
  double total = 0;
  double error = 0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    const auto res = integrate_log_substituted(integrand, points[i], points[i + 1], opts);
    total += res.value;
    error += res.abs_error;
  }
  if (error > kRequiredTol) throw QuadratureError("quadrature did not converge", error);
  return total + g(r) * nm.upper_tail(r);
}

double numeric_scale(const ComponentNonlinearity& nl, const NoiseModel& nm) {
  double scale = 1.0;
  if (const auto* g = std::get_if<noise::Gaussian>(&nm.kind())) scale = g->sigma;
  for (double b : nl.breakpoints())
    if (b != 0) scale = std::min(scale, std::abs(b));
  if (const auto* t = std::get_if<component::Tanh>(&nl.kind())) scale = std::min(scale, 1.0 / t->gain);
  return scale;
}

}  // namespace

double phi(double w, const ComponentNonlinearity& nl, const NoiseModel& nm) {
  if (!std::isfinite(w)) throw ConfigError("phi: w must be finite");
  if (is_linear_growth(nl)) return linear_slope(nl) * w;  // zero-mean noise
  require_density(nm);
  std::vector<double> splits;
  for (double b : nl.breakpoints()) {
    splits.push_back(b - w);
    splits.push_back(w - b);
  }
  auto g = [&](double u) { return nl.eval_unchecked(w + u) + nl.eval_unchecked(w - u); };
  return half_line_integral(g, nm, splits);
}

double phi_prime_zero_numeric(const ComponentNonlinearity& nl, const NoiseModel& nm) {
  // Neville extrapolation of D(h) = (phi(h) - phi(-h)) / 2h over h_k = h0 / 2^k.
  // D may contain every power of h (phi is only C^1 at 0 when Psi and p both
  // kink there), so each column removes one more power.
  constexpr int kLevels = 10;
  const double h0 = 0.1 * numeric_scale(nl, nm);
  double table[kLevels][kLevels];
  double best = NAN;
  double best_err = INFINITY;
  for (int k = 0; k < kLevels; ++k) {
    const double h = h0 / std::ldexp(1.0, k);
    table[k][0] = (phi(h, nl, nm) - phi(-h, nl, nm)) / (2 * h);
    for (int j = 1; j <= k; ++j) {
      const double factor = std::ldexp(1.0, j) - 1.0;
      table[k][j] = table[k][j - 1] + (table[k][j - 1] - table[k - 1][j - 1]) / factor;
      const double err = std::max(std::abs(table[k][j] - table[k][j - 1]), std::abs(table[k][j] - table[k - 1][j - 1]));
      if (err < best_err) {
        best_err = err;
        best = table[k][j];
      }
    }
    if (k > 0 && std::abs(table[k][k] - table[k - 1][k - 1]) > 2 * best_err && best_err < 1e-9) break;
  }
  if (!(best > 0)) throw ComputeError("phi'(0) is not positive; the nonlinearity/noise pair violates the assumptions");
  return best;
}

double phi_prime_zero(const ComponentNonlinearity& nl, const NoiseModel& nm) {
  if (is_linear_growth(nl)) return linear_slope(nl);
  require_density(nm);
  double value = NAN;
  const auto& kind = nl.kind();
  if (std::holds_alternative<component::Sign>(kind)) {
    value = 2 * nm.pdf(0);
  } else if (const auto* c = std::get_if<component::Clip>(&kind)) {
    value = 1.0 - 2.0 * nm.upper_tail(c->level);
  } else if (std::holds_alternative<component::Quantize>(kind) || std::holds_alternative<component::BiLevel>(kind)) {
    // Sum of jump sizes weighted by the density at each threshold.
    const auto bps = nl.breakpoints();
    value = 0;
    for (double q : bps) {
      const double jump = q == 0 ? 2 * nl.eval_unchecked(std::nextafter(0.0, 1.0))
                                 : nl.eval_unchecked(std::nextafter(q, INFINITY)) - nl.eval_unchecked(q);
      value += jump * nm.pdf(q);
    }
  } else {
    return phi_prime_zero_numeric(nl, nm);
  }
  if (!(value > 0)) throw ComputeError("phi'(0) is not positive; the nonlinearity/noise pair violates the assumptions");
  return value;
}

double sigma_psi_sq_numeric(const ComponentNonlinearity& nl, const NoiseModel& nm) {
  if (is_linear_growth(nl)) throw ConfigError("sigma_psi_sq_numeric: only bounded maps");
  require_density(nm);
  auto g = [&](double u) {
    const double v = nl.eval_unchecked(u);
    return 2 * v * v;
  };
  std::vector<double> splits;
  for (double b : nl.breakpoints()) splits.push_back(std::abs(b));
  return half_line_integral(g, nm, splits);
}

double sigma_psi_sq(const ComponentNonlinearity& nl, const NoiseModel& nm) {
  if (is_linear_growth(nl)) {
    const double s = linear_slope(nl);
    return s * s * nm.variance();
  }
  require_density(nm);
  if (std::holds_alternative<component::Sign>(nl.kind())) return 1.0;
  return sigma_psi_sq_numeric(nl, nm);
}

double min_admissible_a(double phi_prime_zero, const Matrix& hessian) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(hessian, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  if (!(lmin > 0)) throw ConfigError("Hessian at the optimum must be positive definite");
  return 1.0 / (2.0 * phi_prime_zero * lmin);
}

Matrix asymptotic_covariance(double a, double phi_prime_zero, double sigma_psi_sq, const Matrix& hessian) {
  if (hessian.rows() != hessian.cols() || hessian.rows() == 0) throw ConfigError("Hessian must be square");
  const double threshold = min_admissible_a(phi_prime_zero, hessian);
  if (!(a > threshold)) {
    throw ConfigError("step-size numerator a=" + detail::format_double(a) +
                      " is not admissible; need a > " + detail::format_double(threshold));
  }
  const auto d = hessian.rows();
  const Matrix system = 2.0 * a * phi_prime_zero * hessian - Matrix::Identity(d, d);
  const Matrix rhs = (a * a * sigma_psi_sq) * Matrix::Identity(d, d);
  Matrix s = system.ldlt().solve(rhs);
  return 0.5 * (s + s.transpose());
}

Matrix asymptotic_covariance(double a, const ComponentNonlinearity& nl, const NoiseModel& nm, const Matrix& hessian) {
  return asymptotic_covariance(a, phi_prime_zero(nl, nm), sigma_psi_sq(nl, nm), hessian);
}

double best_per_entry_avar(const ComponentNonlinearity& nl, const NoiseModel& nm) {
  const double s2 = sigma_psi_sq(nl, nm);
  if (!std::isfinite(s2)) return s2;
  const double g = phi_prime_zero(nl, nm);
  return s2 / (g * g);
}

double linear_sgd_avar(const NoiseModel& nm) { return nm.variance(); }

double zeta_bound_componentwise(const ComponentwiseRateInputs& in) {
  if (!(in.delta > 0.5 && in.delta < 1)) throw ConfigError("zeta bound: delta must lie in (0.5, 1)");
  if (!(in.a > 0 && in.c2 > 0 && in.mu > 0 && in.L > 0 && in.phi_prime_zero > 0 && in.xi > 0 && in.d >= 1)) {
    throw ConfigError("zeta bound: constants must be positive");
  }
  if (in.norm_x0 < 0 || in.norm_xstar < 0) throw ConfigError("zeta bound: norms must be nonnegative");
  const double second = in.a * (1 - in.delta) * in.xi * in.phi_prime_zero * in.mu /
                        (in.L * (in.a * in.c2 * std::sqrt(static_cast<double>(in.d)) + in.norm_x0 + in.norm_xstar));
  return std::min(2 * in.delta - 1, second);
}

double xi_estimate(const ComponentNonlinearity& nl, const NoiseModel& nm, const XiOptions& options) {
  if (!(options.grid_min > 0 && options.cap > options.grid_min && options.points_per_decade > 0)) {
    throw ConfigError("xi grid: need 0 < grid_min < cap");
  }
  if (is_linear_growth(nl)) return options.cap;  // phi(w) = s w >= (s/2) w everywhere
  const double slope = phi_prime_zero(nl, nm) / 2;
  const int total = static_cast<int>(std::ceil(std::log10(options.cap / options.grid_min) * options.points_per_decade));
  double last_good = 0;
  for (int k = 0; k <= total; ++k) {
    const double w = std::min(options.cap, options.grid_min * std::pow(10.0, static_cast<double>(k) / options.points_per_decade));
    if (phi(w, nl, nm) < slope * w) break;
    last_good = w;
  }
  if (last_good == 0) throw ComputeError("xi: phi falls below phi'(0) w / 2 at the smallest grid point");
  return last_good;
}

double xi_lower_bound_sign_heavy_tail(double alpha) { return std::pow(2.0, 1.0 / alpha) - 1.0; }

double cone_ball_mass(const NoiseModel& nm, const Vector& direction, double kappa, double b0, std::size_t draws,
                      RngStream& rng) {
  const Vector x = direction.normalized();
  Vector u(x.size());
  std::size_t hits = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    nm.fill(rng, u);
    const double norm = u.norm();
    if (norm > b0) continue;
    const double proj = u.dot(x);
    if (norm == 0 || (proj >= 0 && proj <= kappa * norm)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(draws);
}

JointRateResult zeta_bound_joint(const JointRateInputs& in, const NoiseModel& nm) {
  if (!(in.delta > 0.5 && in.delta < 1)) throw ConfigError("zeta bound: delta must lie in (0.5, 1)");
  if (!(in.kappa > 0 && in.kappa < 1)) throw ConfigError("zeta bound: kappa must lie in (0, 1)");
  if (!(in.b0 > 0)) throw ConfigError("zeta bound: B0 must be positive");
  if (!(in.a > 0 && in.mu > 0 && in.L > 0 && in.c2_prime > 0 && in.n1 > 0 && in.d >= 1)) {
    throw ConfigError("zeta bound: constants must be positive");
  }
  if (in.draws < 1 || in.directions < 1) throw ConfigError("zeta bound: need draws and directions");

  // Shared noise sample; each direction is scored against all of it.
  RngStream rng(in.seed, 0);
  const Eigen::Index d = in.d;
  Matrix samples(d, static_cast<Eigen::Index>(in.draws));
  Vector norms(static_cast<Eigen::Index>(in.draws));
  Vector u(d);
  for (std::size_t k = 0; k < in.draws; ++k) {
    nm.fill(rng, u);
    samples.col(static_cast<Eigen::Index>(k)) = u;
    norms[static_cast<Eigen::Index>(k)] = u.norm();
  }
  RngStream dir_rng(in.seed, 1);
  const auto normal = NoiseModel::gaussian(1.0);
  double lambda = INFINITY;
  for (std::size_t j = 0; j < in.directions; ++j) {
    Vector x(d);
    for (Eigen::Index i = 0; i < d; ++i) x[i] = normal.sample(dir_rng);
    x.normalize();
    const Vector proj = samples.transpose() * x;
    std::size_t hits = 0;
    for (std::size_t k = 0; k < in.draws; ++k) {
      const double n = norms[static_cast<Eigen::Index>(k)];
      const double p = proj[static_cast<Eigen::Index>(k)];
      if (n <= in.b0 && (n == 0 || (p >= 0 && p <= in.kappa * n))) ++hits;
    }
    lambda = std::min(lambda, static_cast<double>(hits) / static_cast<double>(in.draws));
  }
  constexpr double z99 = 2.5758293035489004;
  const double half = z99 * std::sqrt(lambda * (1 - lambda) / static_cast<double>(in.draws));
  JointRateResult out{0, lambda, lambda - half, lambda + half, lambda - half > 0};
  if (out.lambda_significant) {
    const double second = 2 * in.a * in.mu * (1 - in.kappa) * lambda * (1 - in.delta) * in.n1 /
                          (in.L * (in.a * in.c2_prime + in.norm_x0 + in.norm_xstar) + in.b0);
    out.zeta_bound = std::min(2 * in.delta - 1, second);
  }
  return out;
}

ComponentNonlinearity fisher_optimal_nonlinearity(const NoiseModel& nm) {
  if (const auto* h = std::get_if<noise::HeavyTail>(&nm.kind())) {
    return ComponentNonlinearity(component::HeavyTailScore{h->alpha});
  }
  if (const auto* g = std::get_if<noise::Gaussian>(&nm.kind())) {
    return ComponentNonlinearity(component::Linear{1.0 / (g->sigma * g->sigma)});
  }
  throw ConfigError("zero noise has no score function");
}

DriftEstimate joint_drift(const JointNonlinearity& nl, const NoiseModel& nm, const Vector& x, std::size_t draws,
                          RngStream& rng) {
  if (draws < 2) throw ConfigError("joint_drift: need at least 2 draws");
  const NonlinearityConfig cfg = nl;
  Vector u(x.size());
  Vector w(x.size());
  Vector out;
  double mean = 0;
  double m2 = 0;
  for (std::size_t k = 0; k < draws; ++k) {
    nm.fill(rng, u);
    w = x + u;
    eval_vector_into(cfg, w, out);
    const double v = out.dot(x);
    const double delta = v - mean;
    mean += delta / static_cast<double>(k + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(draws - 1);
  return {mean, std::sqrt(var / static_cast<double>(draws))};
}

TheoryReport theory_report(const ComponentNonlinearity& nl, const NoiseModel& nm, const TheoryInputs& in) {
  TheoryReport r;
  r.nonlinearity = nl.spec();
  r.noise = nm.spec();
  r.a = in.a;
  r.delta = in.delta;
  r.d = static_cast<int>(in.hessian.rows());
  r.phi_prime_zero = phi_prime_zero(nl, nm);
  r.sigma_psi_sq = sigma_psi_sq(nl, nm);
  r.xi = xi_estimate(nl, nm);
  r.min_a = min_admissible_a(r.phi_prime_zero, in.hessian);
  r.admissible = in.a > r.min_a;
  const auto bound = nl.bound();
  if (bound.bound_class == BoundClass::Bounded && in.delta > 0.5 && in.delta < 1) {
    r.zeta_bound = zeta_bound_componentwise(
        {in.a, in.delta, r.d, bound.constant, in.norm_x0, in.norm_xstar, in.mu, in.L, r.phi_prime_zero, r.xi});
  } else if (bound.bound_class == BoundClass::LinearGrowth && std::isfinite(nm.variance())) {
    r.zeta_bound = in.delta;
  }
  if (r.admissible && std::isfinite(r.sigma_psi_sq)) {
    r.avar_matrix = asymptotic_covariance(in.a, r.phi_prime_zero, r.sigma_psi_sq, in.hessian);
    r.per_entry_avar = r.avar_matrix->trace() / static_cast<double>(r.d);
  }
  r.best_per_entry_avar = best_per_entry_avar(nl, nm);
  r.linear_sgd_avar = linear_sgd_avar(nm);
  return r;
}

}  // namespace nlsgd
