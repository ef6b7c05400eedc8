#pragma once

#include "nlsgd/common.hpp"
#include "nlsgd/dataio.hpp"
#include "nlsgd/noise.hpp"
#include "nlsgd/rng.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nlsgd {

struct Optimum {
  Vector x_star;
  double f_star;
};

/// A strongly convex, L-smooth objective with the constants the theory needs.
class Problem {
 public:
  virtual ~Problem() = default;

  virtual std::size_t dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  /// Writes grad f(x) into out (resized as needed). No dimension check.
  virtual void gradient_into(const Vector& x, Vector& out) const = 0;
  virtual double strong_convexity() const = 0;
  virtual double smoothness() const = 0;
  virtual const Optimum& optimum() const = 0;
  virtual Matrix hessian_at_optimum() const = 0;
  virtual std::string spec() const = 0;

  /// Number of summands for finite-sum objectives, 0 otherwise.
  virtual std::size_t sample_count() const { return 0; }
  /// Gradient of the loss averaged over `rows` plus the exact regularizer
  /// gradient. Only finite-sum problems support this.
  virtual void batch_gradient_into(const Vector& x, std::span<const std::size_t> rows, Vector& out) const;
};

/// f(x) = x^T A x + b^T x with A symmetric positive definite.
class QuadraticProblem final : public Problem {
 public:
  QuadraticProblem(Matrix a, Vector b);

  /// A = Q D Q^T with Q Haar-random orthogonal and D log-uniform in
  /// [lambda_min, lambda_max]; b has standard normal entries.
  static QuadraticProblem random(int d, std::uint64_t seed, double lambda_min = 0.5, double lambda_max = 2.0);
  /// A = I/2 (so the Hessian is I and mu = L = 1) and x* a random unit vector.
  static QuadraticProblem isotropic(int d, std::uint64_t seed);
  /// JSON document {"A": [[...], ...], "b": [...]}.
  static QuadraticProblem from_file(const std::string& path);

  std::size_t dim() const override { return static_cast<std::size_t>(b_.size()); }
  double value(const Vector& x) const override;
  void gradient_into(const Vector& x, Vector& out) const override;
  double strong_convexity() const override { return mu_; }
  double smoothness() const override { return l_; }
  const Optimum& optimum() const override { return optimum_; }
  Matrix hessian_at_optimum() const override { return 2.0 * a_; }
  std::string spec() const override { return spec_; }

  const Matrix& a() const { return a_; }
  const Vector& b() const { return b_; }

 private:
  Matrix a_;
  Matrix two_a_;
  Vector b_;
  double mu_;
  double l_;
  Optimum optimum_;
  std::string spec_;
};

/// Regularized logistic loss
///   f(x) = (1/n) sum_i log(1 + exp(-y_i x.d_i)) + (lambda/2) |x|^2.
class LogisticProblem final : public Problem {
 public:
  LogisticProblem(std::shared_ptr<const Dataset> data, double reg_lambda);

  std::size_t dim() const override { return data_->dims(); }
  double value(const Vector& x) const override;
  void gradient_into(const Vector& x, Vector& out) const override;
  double strong_convexity() const override { return lambda_; }
  double smoothness() const override { return l_; }
  const Optimum& optimum() const override { return optimum_; }
  Matrix hessian_at_optimum() const override { return hessian(optimum_.x_star); }
  std::string spec() const override { return spec_; }

  std::size_t sample_count() const override { return data_->rows(); }
  void batch_gradient_into(const Vector& x, std::span<const std::size_t> rows, Vector& out) const override;

  Matrix hessian(const Vector& x) const;
  const Dataset& data() const { return *data_; }
  double reg_lambda() const { return lambda_; }
  /// Newton iterations the inner solver used.
  int solver_iterations() const { return solver_iterations_; }

 private:
  void solve();

  std::shared_ptr<const Dataset> data_;
  double lambda_;
  double l_;
  Optimum optimum_;
  int solver_iterations_ = 0;
  std::string spec_;
};

/// grad f(x); throws ConfigError on dimension mismatch.
Vector full_gradient(const Problem& p, const Vector& x);
Optimum optimum(const Problem& p);
Matrix hessian_at_optimum(const Problem& p);

namespace oracle {
/// grad f(x) + nu with nu i.i.d. per coordinate.
struct AdditiveNoise {
  NoiseModel noise;
};
/// Average loss gradient over a uniformly drawn batch of distinct rows;
/// batches are redrawn independently at every call.
struct MiniBatch {
  std::size_t batch_size;
};
}  // namespace oracle

using GradientOracle = std::variant<oracle::AdditiveNoise, oracle::MiniBatch>;

/// Throws ConfigError if the oracle cannot serve this problem.
void validate_oracle(const Problem& p, const GradientOracle& o);
std::string oracle_spec(const GradientOracle& o);
/// Parses additive (noise supplied separately) or minibatch:<B>.
GradientOracle parse_oracle(std::string_view spec, const NoiseModel& noise);

/// Reusable sampler for one optimizer path; owns scratch buffers.
class StochasticGradient {
 public:
  StochasticGradient(const Problem& p, GradientOracle o);
  void operator()(const Vector& x, RngStream& rng, Vector& out);
  const GradientOracle& oracle() const { return oracle_; }

 private:
  const Problem* problem_;
  GradientOracle oracle_;
  Vector noise_;
  std::vector<std::size_t> rows_;
};

Vector stochastic_gradient(const Problem& p, const GradientOracle& o, const Vector& x, RngStream& rng);

/// Builds a problem from quadratic:<d>:<seed>[:<lmin>:<lmax>],
/// quadratic-iso:<d>:<seed>, quadratic-file:<path>, logistic:<path>[:<lambda>].
/// The logistic regularizer defaults to 1/n.
std::shared_ptr<const Problem> make_problem(std::string_view spec);
/// Syntax-only check of a problem spec (no file access).
void validate_problem_spec(std::string_view spec);

}  // namespace nlsgd
