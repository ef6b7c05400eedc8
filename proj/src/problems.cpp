#include "nlsgd/problems.hpp"

#include "parse_util.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

namespace nlsgd {

namespace {

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }
double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

void check_dim(const Problem& p, const Vector& x) {
  if (static_cast<std::size_t>(x.size()) != p.dim()) {
    throw ConfigError("dimension mismatch: problem has d=" + std::to_string(p.dim()) + ", vector has " +
                      std::to_string(x.size()));
  }
}

}  // namespace

void Problem::batch_gradient_into(const Vector&, std::span<const std::size_t>, Vector&) const {
  throw ConfigError("problem '" + spec() + "' is not a finite sum; mini-batch gradients are unavailable");
}

QuadraticProblem::QuadraticProblem(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
  const auto d = b_.size();
  if (d == 0 || a_.rows() != d || a_.cols() != d) throw ConfigError("quadratic: A must be d x d with d = dim(b) >= 1");
  if (!a_.allFinite() || !b_.allFinite()) throw ConfigError("quadratic: non-finite entries");
  const double scale = std::max(1.0, a_.cwiseAbs().maxCoeff());
  if ((a_ - a_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw ConfigError("quadratic: A is not symmetric");
  a_ = 0.5 * (a_ + a_.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(a_, Eigen::EigenvaluesOnly);
  const double lmin = eig.eigenvalues().minCoeff();
  const double lmax = eig.eigenvalues().maxCoeff();
  if (!(lmin > 0)) throw ConfigError("quadratic: A is not positive definite");
  mu_ = 2 * lmin;
  l_ = 2 * lmax;
  two_a_ = 2.0 * a_;
  optimum_.x_star = -0.5 * a_.llt().solve(b_);
  optimum_.f_star = value(optimum_.x_star);
  Vector g;
  gradient_into(optimum_.x_star, g);
  if (g.norm() > 1e-8 * std::max(1.0, b_.norm())) {
    throw ComputeError("quadratic: optimum residual too large (A ill-conditioned)");
  }
  spec_ = "quadratic-matrix:" + std::to_string(d);
}

QuadraticProblem QuadraticProblem::random(int d, std::uint64_t seed, double lambda_min, double lambda_max) {
  if (d < 1) throw ConfigError("quadratic: d must be >= 1");
  if (!(lambda_min > 0 && lambda_max >= lambda_min)) throw ConfigError("quadratic: need 0 < lambda_min <= lambda_max");
  RngStream rng(seed, 0);
  const auto normal = NoiseModel::gaussian(1.0);
  Matrix g(d, d);
  for (int j = 0; j < d; ++j)
    for (int i = 0; i < d; ++i) g(i, j) = normal.sample(rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  Vector eigenvalues(d);
  const double log_lo = std::log(lambda_min);
  const double log_hi = std::log(lambda_max);
  for (int i = 0; i < d; ++i) eigenvalues[i] = std::exp(log_lo + (log_hi - log_lo) * rng.uniform_open());
  Matrix a = q * eigenvalues.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose());
  Vector b(d);
  for (int i = 0; i < d; ++i) b[i] = normal.sample(rng);
  QuadraticProblem p(std::move(a), std::move(b));
  p.spec_ = "quadratic:" + std::to_string(d) + ":" + std::to_string(seed) + ":" +
            detail::format_double(lambda_min) + ":" + detail::format_double(lambda_max);
  return p;
}

QuadraticProblem QuadraticProblem::isotropic(int d, std::uint64_t seed) {
  if (d < 1) throw ConfigError("quadratic-iso: d must be >= 1");
  RngStream rng(seed, 0);
  const auto normal = NoiseModel::gaussian(1.0);
  Vector u(d);
  for (int i = 0; i < d; ++i) u[i] = normal.sample(rng);
  u /= u.norm();
  QuadraticProblem p(0.5 * Matrix::Identity(d, d), -u);
  p.spec_ = "quadratic-iso:" + std::to_string(d) + ":" + std::to_string(seed);
  return p;
}

QuadraticProblem QuadraticProblem::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ComputeError("cannot open quadratic file '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
    const auto rows = doc.at("A").get<std::vector<std::vector<double>>>();
    const auto bv = doc.at("b").get<std::vector<double>>();
    const auto d = static_cast<Eigen::Index>(bv.size());
    Matrix a(d, d);
    if (static_cast<Eigen::Index>(rows.size()) != d) throw ConfigError("quadratic file: A must have dim(b) rows");
    for (Eigen::Index i = 0; i < d; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != d) throw ConfigError("quadratic file: A must be square");
      for (Eigen::Index j = 0; j < d; ++j) a(i, j) = rows[i][j];
    }
    QuadraticProblem p(std::move(a), Eigen::Map<const Vector>(bv.data(), d));
    p.spec_ = "quadratic-file:" + path;
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("quadratic file '" + path + "': " + e.what());
  }
}

double QuadraticProblem::value(const Vector& x) const { return x.dot(a_ * x) + b_.dot(x); }

void QuadraticProblem::gradient_into(const Vector& x, Vector& out) const {
  out.noalias() = two_a_ * x;
  out += b_;
}

LogisticProblem::LogisticProblem(std::shared_ptr<const Dataset> data, double reg_lambda)
    : data_(std::move(data)), lambda_(reg_lambda) {
  if (!data_) throw ConfigError("logistic: dataset is required");
  if (!(reg_lambda > 0) || !std::isfinite(reg_lambda)) throw ConfigError("logistic: lambda must be positive");
  for (std::size_t i = 0; i < data_->rows(); ++i) {
    if (data_->label(i) != 1.0 && data_->label(i) != -1.0) throw ConfigError("logistic: labels must be -1 or +1");
  }
  l_ = lambda_ + summarize(*data_).smoothness_bound;
  spec_ = "logistic:" + data_->source_digest() + ":" + detail::format_double(lambda_);
  solve();
}

double LogisticProblem::value(const Vector& x) const {
  double s = 0;
  for (std::size_t i = 0; i < data_->rows(); ++i) s += softplus(-data_->label(i) * data_->row_dot(i, x));
  return s / static_cast<double>(data_->rows()) + 0.5 * lambda_ * x.squaredNorm();
}

void LogisticProblem::batch_gradient_into(const Vector& x, std::span<const std::size_t> rows, Vector& out) const {
  out.setZero(static_cast<Eigen::Index>(dim()));
  for (const std::size_t i : rows) {
    const double y = data_->label(i);
    const double coef = -y * logistic(-y * data_->row_dot(i, x));
    const auto r = data_->row(i);
    for (std::size_t k = 0; k < r.indices.size(); ++k) out[r.indices[k]] += coef * r.values[k];
  }
  out *= 1.0 / static_cast<double>(rows.size());
  out += lambda_ * x;
}

void LogisticProblem::gradient_into(const Vector& x, Vector& out) const {
  out.setZero(static_cast<Eigen::Index>(dim()));
  for (std::size_t i = 0; i < data_->rows(); ++i) {
    const double y = data_->label(i);
    const double coef = -y * logistic(-y * data_->row_dot(i, x));
    const auto r = data_->row(i);
    for (std::size_t k = 0; k < r.indices.size(); ++k) out[r.indices[k]] += coef * r.values[k];
  }
  out *= 1.0 / static_cast<double>(data_->rows());
  out += lambda_ * x;
}

Matrix LogisticProblem::hessian(const Vector& x) const {
  const auto d = static_cast<Eigen::Index>(dim());
  Matrix h = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < data_->rows(); ++i) {
    const double s = logistic(data_->label(i) * data_->row_dot(i, x));
    const double w = s * (1.0 - s);
    const auto r = data_->row(i);
    for (std::size_t a = 0; a < r.indices.size(); ++a)
      for (std::size_t b = 0; b < r.indices.size(); ++b) h(r.indices[a], r.indices[b]) += w * r.values[a] * r.values[b];
  }
  h *= 1.0 / static_cast<double>(data_->rows());
  h.diagonal().array() += lambda_;
  return h;
}

void LogisticProblem::solve() {
  constexpr int kMaxIterations = 100;
  constexpr double kTolerance = 1e-10;
  Vector x = Vector::Zero(static_cast<Eigen::Index>(dim()));
  Vector g;
  gradient_into(x, g);
  double f = value(x);
  int it = 0;
  for (; it < kMaxIterations && g.norm() > kTolerance; ++it) {
    const Vector step = hessian(x).ldlt().solve(g);
    double t = 1.0;
    Vector candidate = x - step;
    double fc = value(candidate);
    while (fc > f - 1e-4 * t * g.dot(step) && t > 1e-10) {
      t *= 0.5;
      candidate = x - t * step;
      fc = value(candidate);
    }
    Vector gc;
    gradient_into(candidate, gc);
    if (fc > f && gc.norm() >= g.norm()) break;  // no progress at rounding level
    x = std::move(candidate);
    g = std::move(gc);
    f = fc;
  }
  solver_iterations_ = it;
  if (g.norm() > kTolerance) {
    throw ComputeError("logistic inner solver did not reach |grad f| <= 1e-10 (got " +
                       detail::format_double(g.norm()) + "); problem may be ill-conditioned");
  }
  optimum_ = {x, value(x)};
}

Vector full_gradient(const Problem& p, const Vector& x) {
  check_dim(p, x);
  Vector out;
  p.gradient_into(x, out);
  return out;
}

Optimum optimum(const Problem& p) { return p.optimum(); }
Matrix hessian_at_optimum(const Problem& p) { return p.hessian_at_optimum(); }

void validate_oracle(const Problem& p, const GradientOracle& o) {
  if (const auto* mb = std::get_if<oracle::MiniBatch>(&o)) {
    if (p.sample_count() == 0) throw ConfigError("minibatch oracle requires a finite-sum (logistic) problem");
    if (mb->batch_size < 1 || mb->batch_size > p.sample_count()) {
      throw ConfigError("minibatch size must lie in [1, n] with n=" + std::to_string(p.sample_count()));
    }
  }
}

std::string oracle_spec(const GradientOracle& o) {
  if (const auto* mb = std::get_if<oracle::MiniBatch>(&o)) return "minibatch:" + std::to_string(mb->batch_size);
  return "additive";
}

GradientOracle parse_oracle(std::string_view spec, const NoiseModel& noise) {
  spec = detail::trim(spec);
  if (spec.empty() || spec == "additive") return oracle::AdditiveNoise{noise};
  if (spec.starts_with("minibatch:")) {
    const auto b = detail::parse_u64(spec.substr(10), "minibatch size");
    if (b == 0) throw ConfigError("minibatch size must be positive");
    return oracle::MiniBatch{b};
  }
  throw ConfigError("unknown oracle '" + std::string(spec) + "'");
}

StochasticGradient::StochasticGradient(const Problem& p, GradientOracle o) : problem_(&p), oracle_(std::move(o)) {
  validate_oracle(p, oracle_);
  noise_.resize(static_cast<Eigen::Index>(p.dim()));
  if (const auto* mb = std::get_if<oracle::MiniBatch>(&oracle_)) rows_.resize(mb->batch_size);
}

void StochasticGradient::operator()(const Vector& x, RngStream& rng, Vector& out) {
  if (const auto* add = std::get_if<oracle::AdditiveNoise>(&oracle_)) {
    problem_->gradient_into(x, out);
    if (!add->noise.is_zero()) {
      add->noise.fill(rng, noise_);
      out += noise_;
    }
    return;
  }
  // Selection sampling: a uniform batch of distinct rows, in index order.
  const std::size_t n = problem_->sample_count();
  std::size_t needed = rows_.size();
  std::size_t k = 0;
  for (std::size_t i = 0; i < n && needed > 0; ++i) {
    if (static_cast<double>(n - i) * rng.uniform_open() < static_cast<double>(needed)) {
      rows_[k++] = i;
      --needed;
    }
  }
  problem_->batch_gradient_into(x, rows_, out);
}

Vector stochastic_gradient(const Problem& p, const GradientOracle& o, const Vector& x, RngStream& rng) {
  check_dim(p, x);
  StochasticGradient sampler(p, o);
  Vector out;
  sampler(x, rng, out);
  return out;
}

namespace {

struct ParsedProblemSpec {
  std::string kind;
  std::vector<std::string> args;
};

ParsedProblemSpec split_problem_spec(std::string_view spec) {
  spec = detail::trim(spec);
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw ConfigError("problem spec '" + std::string(spec) + "' lacks parameters");
  ParsedProblemSpec out{std::string(spec.substr(0, colon)), {}};
  const auto rest = spec.substr(colon + 1);
  if (out.kind == "quadratic-file") {
    out.args.emplace_back(rest);
  } else if (out.kind == "logistic") {
    const auto last = rest.rfind(':');
    double lambda = 0;
    if (last != std::string_view::npos && last > 0 && detail::try_parse_double(rest.substr(last + 1), lambda)) {
      out.args.emplace_back(rest.substr(0, last));
      out.args.emplace_back(rest.substr(last + 1));
    } else {
      out.args.emplace_back(rest);
    }
  } else {
    for (auto part : detail::split(rest, ':')) out.args.emplace_back(part);
  }
  return out;
}

}  // namespace

void validate_problem_spec(std::string_view spec) {
  const auto p = split_problem_spec(spec);
  if (p.kind == "quadratic") {
    if (p.args.size() != 2 && p.args.size() != 4) throw ConfigError("expected quadratic:<d>:<seed>[:<lmin>:<lmax>]");
    if (detail::parse_u64(p.args[0], "quadratic d") == 0) throw ConfigError("quadratic d must be >= 1");
    detail::parse_u64(p.args[1], "quadratic seed");
    if (p.args.size() == 4) {
      const double lo = detail::parse_double(p.args[2], "quadratic lambda_min");
      const double hi = detail::parse_double(p.args[3], "quadratic lambda_max");
      if (!(lo > 0 && lo <= hi && std::isfinite(hi))) throw ConfigError("quadratic needs 0 < lambda_min <= lambda_max");
    }
  } else if (p.kind == "quadratic-iso") {
    if (p.args.size() != 2) throw ConfigError("expected quadratic-iso:<d>:<seed>");
    if (detail::parse_u64(p.args[0], "quadratic-iso d") == 0) throw ConfigError("quadratic-iso d must be >= 1");
    detail::parse_u64(p.args[1], "quadratic-iso seed");
  } else if (p.kind == "quadratic-file" || p.kind == "logistic") {
    if (p.args.front().empty()) throw ConfigError(p.kind + ": missing path");
    if (p.kind == "quadratic-file" && p.args.size() != 1) throw ConfigError("expected quadratic-file:<path>");
    if (p.kind == "logistic") {
      if (p.args.size() > 2) throw ConfigError("expected logistic:<path>[:<lambda>]");
      if (p.args.size() == 2) {
        const double lambda = detail::parse_double(p.args[1], "logistic lambda");
        if (!(lambda > 0 && std::isfinite(lambda))) throw ConfigError("logistic lambda must be positive");
      }
    }
  } else {
    throw ConfigError("unknown problem kind '" + p.kind + "'");
  }
}

std::shared_ptr<const Problem> make_problem(std::string_view spec) {
  validate_problem_spec(spec);
  const auto p = split_problem_spec(spec);
  if (p.kind == "quadratic") {
    const auto d = static_cast<int>(detail::parse_u64(p.args[0], "d"));
    const auto seed = detail::parse_u64(p.args[1], "seed");
    if (p.args.size() == 4) {
      return std::make_shared<QuadraticProblem>(QuadraticProblem::random(
          d, seed, detail::parse_double(p.args[2], "lambda_min"), detail::parse_double(p.args[3], "lambda_max")));
    }
    return std::make_shared<QuadraticProblem>(QuadraticProblem::random(d, seed));
  }
  if (p.kind == "quadratic-iso") {
    return std::make_shared<QuadraticProblem>(QuadraticProblem::isotropic(
        static_cast<int>(detail::parse_u64(p.args[0], "d")), detail::parse_u64(p.args[1], "seed")));
  }
  if (p.kind == "quadratic-file") return std::make_shared<QuadraticProblem>(QuadraticProblem::from_file(p.args[0]));
  auto data = std::make_shared<const Dataset>(load_libsvm(p.args[0]));
  const double lambda =
      p.args.size() == 2 ? detail::parse_double(p.args[1], "lambda") : 1.0 / static_cast<double>(data->rows());
  return std::make_shared<LogisticProblem>(std::move(data), lambda);
}

}  // namespace nlsgd
