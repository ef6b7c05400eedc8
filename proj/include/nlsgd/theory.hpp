#pragma once

#include "nlsgd/nonlinearity.hpp"
#include "nlsgd/noise.hpp"
#include "nlsgd/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace nlsgd {

/// Quadrature reported an error estimate above the requested tolerance.
class QuadratureError : public ComputeError {
 public:
  QuadratureError(const std::string& what, double achieved);
  double achieved_error() const { return achieved_; }

 private:
  double achieved_;
};

/// Drift of the noisy nonlinearity, phi(w) = E[Psi(w + nu)], by adaptive
/// quadrature split at Psi's breakpoints, truncated at the 1e-10 tail
/// quantile with a tail correction. Absolute error <= 1e-8 (typically ~1e-12).
double phi(double w, const ComponentNonlinearity& nl, const NoiseModel& nm);

/// phi'(0), closed form where one exists (sign, clip, quantizers, linear maps),
/// otherwise phi_prime_zero_numeric. Throws ComputeError if not positive.
double phi_prime_zero(const ComponentNonlinearity& nl, const NoiseModel& nm);
/// Central differences of phi with Richardson extrapolation to h -> 0.
double phi_prime_zero_numeric(const ComponentNonlinearity& nl, const NoiseModel& nm);

/// sigma_Psi^2 = E[Psi(nu)^2]; +infinity when the integral diverges.
double sigma_psi_sq(const ComponentNonlinearity& nl, const NoiseModel& nm);
/// Same quantity, always by quadrature (bounded maps only).
double sigma_psi_sq_numeric(const ComponentNonlinearity& nl, const NoiseModel& nm);

/// Smallest admissible step-size numerator: 1 / (2 phi'(0) lambda_min(H)).
double min_admissible_a(double phi_prime_zero, const Matrix& hessian);

/// S = a^2 sigma^2 (2 a phi'(0) H - I)^{-1}, via a linear solve. Throws
/// ConfigError (naming the threshold) when a <= min_admissible_a.
Matrix asymptotic_covariance(double a, double phi_prime_zero, double sigma_psi_sq, const Matrix& hessian);
Matrix asymptotic_covariance(double a, const ComponentNonlinearity& nl, const NoiseModel& nm, const Matrix& hessian);

/// inf over admissible a of trace(S)/d when H = I: sigma^2 / phi'(0)^2.
double best_per_entry_avar(const ComponentNonlinearity& nl, const NoiseModel& nm);

/// Per-coordinate noise variance (+infinity if it does not exist).
double linear_sgd_avar(const NoiseModel& nm);

struct ComponentwiseRateInputs {
  double a;
  double delta;
  int d;
  double c2;
  double norm_x0;
  double norm_xstar;
  double mu;
  double L;
  double phi_prime_zero;
  double xi;
};

/// min(2 delta - 1, a (1 - delta) xi phi'(0) mu / (L (a C2 sqrt(d) + |x0| + |x*|))).
double zeta_bound_componentwise(const ComponentwiseRateInputs& in);

struct XiOptions {
  double grid_min = 1e-6;
  double cap = 1e6;
  int points_per_decade = 20;
};

/// Largest grid point xi such that phi(w) >= (phi'(0) / 2) w holds at every
/// grid point in (0, xi]. Returns options.cap if it never fails.
double xi_estimate(const ComponentNonlinearity& nl, const NoiseModel& nm, const XiOptions& options = {});
/// 2^{1/alpha} - 1, a lower bound on xi for sign under polynomial-tail noise.
double xi_lower_bound_sign_heavy_tail(double alpha);

struct JointRateInputs {
  double a;
  double delta;
  double mu;
  double L;
  double c2_prime;
  double norm_x0;
  double norm_xstar;
  double kappa;
  double b0;
  /// N(1) for the radial map.
  double n1;
  int d;
  std::size_t draws = 100000;
  std::size_t directions = 64;
  std::uint64_t seed = 1;
};

struct JointRateResult {
  double zeta_bound;
  /// Min over directions of the estimated noise mass of the cone-ball set.
  double lambda;
  /// 99% normal-approximation interval for lambda at the minimizing direction.
  double lambda_lo;
  double lambda_hi;
  bool lambda_significant;
};

/// Monte-Carlo estimate of P(0 <= u.x <= kappa |u||x|, |u| <= B0) for one
/// direction x; u has i.i.d. coordinates from nm.
double cone_ball_mass(const NoiseModel& nm, const Vector& direction, double kappa, double b0, std::size_t draws,
                      RngStream& rng);

/// Rate bound for radial nonlinearities. When lambda is not significantly
/// positive the zeta_bound is 0 and lambda_significant is false.
JointRateResult zeta_bound_joint(const JointRateInputs& in, const NoiseModel& nm);

/// Psi*(w) = -(d/dw) ln p(w): alpha sign(w) / (1 + |w|) for polynomial tails,
/// w / sigma^2 for Gaussian noise.
ComponentNonlinearity fisher_optimal_nonlinearity(const NoiseModel& nm);

struct DriftEstimate {
  double mean;
  double std_error;
};

/// Monte-Carlo estimate of E[Psi(x + nu)]^T x for a radial map.
DriftEstimate joint_drift(const JointNonlinearity& nl, const NoiseModel& nm, const Vector& x, std::size_t draws,
                          RngStream& rng);

struct TheoryReport {
  std::string nonlinearity;
  std::string noise;
  double a;
  double delta;
  int d;
  double phi_prime_zero;
  double sigma_psi_sq;
  double xi;
  /// Guaranteed MSE exponent: the componentwise bound for bounded maps with
  /// delta in (0.5, 1); delta for linear-growth maps under finite variance;
  /// empty when no global rate applies.
  std::optional<double> zeta_bound;
  double min_a;
  bool admissible;
  /// trace(S) / d; empty when a is not admissible or sigma^2 is infinite.
  std::optional<double> per_entry_avar;
  std::optional<Matrix> avar_matrix;
  double best_per_entry_avar;
  double linear_sgd_avar;
};

struct TheoryInputs {
  double a;
  double delta = 0.75;
  Matrix hessian;
  double mu;
  double L;
  double norm_x0 = 0;
  double norm_xstar = 1;
};

TheoryReport theory_report(const ComponentNonlinearity& nl, const NoiseModel& nm, const TheoryInputs& in);

}  // namespace nlsgd
