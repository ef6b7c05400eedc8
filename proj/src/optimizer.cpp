#include "nlsgd/optimizer.hpp"

#include "parse_util.hpp"

#include <cmath>
#include <map>

namespace nlsgd {

StepSchedule::StepSchedule(Kind kind) : kind_(kind) {
  if (const auto* p = std::get_if<schedule::PolynomialDecay>(&kind_)) {
    if (!(p->a > 0) || !std::isfinite(p->a)) throw ConfigError("schedule: a must be positive");
    if (!(p->delta >= 0.5 && p->delta <= 1.0)) throw ConfigError("schedule: delta must lie in [0.5, 1]");
  } else {
    const auto& s = std::get<schedule::SmoothedDecay>(kind_);
    if (!(s.a > 0) || !std::isfinite(s.a)) throw ConfigError("schedule: a must be positive");
    if (!(s.b >= 0) || !std::isfinite(s.b)) throw ConfigError("schedule: b must be nonnegative");
    if (!(s.L > 0) || !std::isfinite(s.L)) throw ConfigError("schedule: L must be positive");
  }
}

double StepSchedule::operator()(std::uint64_t t) const {
  const double t1 = static_cast<double>(t) + 1.0;
  if (const auto* p = std::get_if<schedule::PolynomialDecay>(&kind_)) {
    return p->delta == 1.0 ? p->a / t1 : p->a / std::pow(t1, p->delta);
  }
  const auto& s = std::get<schedule::SmoothedDecay>(kind_);
  return s.a / (s.b * t1 + s.L);
}

std::string StepSchedule::spec() const {
  if (const auto* p = std::get_if<schedule::PolynomialDecay>(&kind_)) {
    return "poly:a=" + detail::format_double(p->a) + ",delta=" + detail::format_double(p->delta);
  }
  const auto& s = std::get<schedule::SmoothedDecay>(kind_);
  return "smoothed:a=" + detail::format_double(s.a) + ",b=" + detail::format_double(s.b) +
         ",L=" + detail::format_double(s.L);
}

StepSchedule parse_schedule(std::string_view spec, std::optional<double> default_smoothness) {
  spec = detail::trim(spec);
  const auto colon = spec.find(':');
  const auto name = spec.substr(0, colon);
  if (name != "poly" && name != "smoothed") throw ConfigError("unknown schedule '" + std::string(name) + "'");
  std::map<std::string, double, std::less<>> params;
  if (colon != std::string_view::npos) {
    for (auto item : detail::split(spec.substr(colon + 1), ',')) {
      const auto eq = item.find('=');
      if (eq == std::string_view::npos) throw ConfigError("schedule: expected key=value, got '" + std::string(item) + "'");
      const std::string key(detail::trim(item.substr(0, eq)));
      if (params.count(key)) throw ConfigError("schedule: duplicate key '" + key + "'");
      params[key] = detail::parse_double(item.substr(eq + 1), "schedule " + key);
    }
  }
  auto take = [&](const char* key) -> std::optional<double> {
    const auto it = params.find(key);
    if (it == params.end()) return std::nullopt;
    const double v = it->second;
    params.erase(it);
    return v;
  };
  auto required = [&](const char* key) {
    const auto v = take(key);
    if (!v) throw ConfigError("schedule '" + std::string(name) + "' requires " + key);
    return *v;
  };
  std::optional<StepSchedule> out;
  if (name == "poly") {
    const double a = required("a");
    const double delta = required("delta");
    out = StepSchedule::polynomial(a, delta);
  } else {
    const double a = required("a");
    const double b = required("b");
    auto l = take("L");
    if (!l) l = default_smoothness;
    if (!l) throw ConfigError("schedule 'smoothed' requires L (or a problem to take it from)");
    out = StepSchedule::smoothed(a, b, *l);
  }
  if (!params.empty()) throw ConfigError("schedule: unknown key '" + params.begin()->first + "'");
  return *out;
}

void ClipDecayPolicy::validate() const {
  if (!(initial_level > 0) || !std::isfinite(initial_level)) throw ConfigError("clip decay: initial level must be positive");
  if (!(factor > 0 && factor <= 1)) throw ConfigError("clip decay: factor must lie in (0, 1]");
  if (period_epochs < 1) throw ConfigError("clip decay: period must be >= 1 epoch");
}

double ClipDecayPolicy::level_after(std::uint64_t periods) const {
  return initial_level * std::pow(factor, static_cast<double>(periods));
}

std::vector<std::uint64_t> log_spaced_checkpoints(std::uint64_t steps, std::size_t count) {
  std::vector<std::uint64_t> out{0};
  if (steps == 0 || count == 0) return out;
  const double log_max = std::log(static_cast<double>(steps));
  for (std::size_t k = 0; k < count; ++k) {
    const double frac = count == 1 ? 1.0 : static_cast<double>(k) / static_cast<double>(count - 1);
    auto t = static_cast<std::uint64_t>(std::llround(std::exp(frac * log_max)));
    t = std::clamp<std::uint64_t>(t, 1, steps);
    if (t > out.back()) out.push_back(t);
  }
  if (out.back() != steps) out.push_back(steps);
  return out;
}

NonlinearSgd::NonlinearSgd(const Problem& problem, NonlinearityConfig nl, StepSchedule schedule,
                           GradientOracle oracle, Vector x0, RngStream rng)
    : problem_(&problem),
      nl_(std::move(nl)),
      schedule_(std::move(schedule)),
      sampler_(problem, std::move(oracle)),
      rng_(std::move(rng)),
      x_(std::move(x0)) {
  if (static_cast<std::size_t>(x_.size()) != problem.dim()) throw ConfigError("x0 dimension does not match problem");
  if (!x_.allFinite()) throw ConfigError("x0 must be finite");
}

bool NonlinearSgd::step() {
  sampler_(x_, rng_, grad_);
  if (!grad_.allFinite()) return false;
  eval_vector_into(nl_, grad_, direction_);
  x_.noalias() -= schedule_(t_) * direction_;
  ++t_;
  return x_.allFinite();
}

namespace {

Checkpoint measure(const Problem& problem, const Vector& x, std::uint64_t t) {
  const Vector& xs = problem.optimum().x_star;
  long double acc = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const long double diff = static_cast<long double>(x[i]) - xs[i];
    acc += diff * diff;
  }
  Checkpoint c{t, 0, 0, false};
  if (!std::isfinite(static_cast<double>(acc)) || acc > kOverflowCap) {
    c.sq_error = kOverflowCap;
    c.overflow = true;
  } else {
    c.sq_error = static_cast<double>(acc);
  }
  const double gap = c.overflow ? INFINITY : problem.value(x) - problem.optimum().f_star;
  c.f_gap = !std::isfinite(gap) || gap > kOverflowCap ? kOverflowCap : std::max(0.0, gap);
  return c;
}

void validate_checkpoints(const std::vector<std::uint64_t>& cps, std::uint64_t steps) {
  for (std::size_t i = 0; i < cps.size(); ++i) {
    if (cps[i] > steps) throw ConfigError("checkpoint " + std::to_string(cps[i]) + " exceeds steps");
    if (i > 0 && cps[i] <= cps[i - 1]) throw ConfigError("checkpoints must be strictly increasing");
  }
}

template <class BeforeStep>
TrialRecord run_loop(const Problem& problem, NonlinearSgd& sgd, const RunOptions& opts, BeforeStep before_step) {
  if (opts.steps < 1) throw ConfigError("steps must be >= 1");
  const auto cps = opts.checkpoints.empty() ? log_spaced_checkpoints(opts.steps) : opts.checkpoints;
  validate_checkpoints(cps, opts.steps);

  TrialRecord rec;
  rec.seed = opts.seed;
  rec.stream = opts.stream;
  rec.fingerprint = opts.fingerprint;
  rec.checkpoints.reserve(cps.size());
  rec.max_abs_iterate = sgd.iterate().cwiseAbs().maxCoeff();

  std::size_t next = 0;
  for (std::uint64_t t = 0;; ++t) {
    if (next < cps.size() && cps[next] == t) {
      rec.checkpoints.push_back(measure(problem, sgd.iterate(), t));
      if (rec.checkpoints.back().overflow && !rec.overflow_at) rec.overflow_at = t;
      ++next;
    }
    if (t == opts.steps || next == cps.size()) break;
    before_step(t);
    if (!sgd.step()) {
      rec.overflow_at = rec.overflow_at.value_or(t + 1);
      rec.max_abs_iterate = INFINITY;
      for (; next < cps.size(); ++next) rec.checkpoints.push_back({cps[next], kOverflowCap, kOverflowCap, true});
      break;
    }
    rec.max_abs_iterate = std::max(rec.max_abs_iterate, sgd.iterate().cwiseAbs().maxCoeff());
  }
  return rec;
}

Vector initial_point(const Problem& problem, const RunOptions& opts) {
  return opts.x0.size() == 0 ? Vector::Zero(static_cast<Eigen::Index>(problem.dim())) : opts.x0;
}

}  // namespace

TrialRecord run(const Problem& problem, const NonlinearityConfig& nl, const StepSchedule& schedule,
                const GradientOracle& oracle, const RunOptions& opts) {
  NonlinearSgd sgd(problem, nl, schedule, oracle, initial_point(problem, opts), RngStream(opts.seed, opts.stream));
  return run_loop(problem, sgd, opts, [](std::uint64_t) {});
}

std::uint64_t epoch_iterations(const Problem& problem, const GradientOracle& oracle, std::uint64_t fallback) {
  if (const auto* mb = std::get_if<oracle::MiniBatch>(&oracle)) {
    return (problem.sample_count() + mb->batch_size - 1) / mb->batch_size;
  }
  if (fallback < 1) throw ConfigError("epoch length must be >= 1");
  return fallback;
}

TrialRecord run_d_clipped(const Problem& problem, const StepSchedule& schedule, const ClipDecayPolicy& policy,
                          const GradientOracle& oracle, const RunOptions& opts, std::uint64_t epoch_length) {
  policy.validate();
  const std::uint64_t period = epoch_iterations(problem, oracle, epoch_length) * policy.period_epochs;
  NonlinearSgd sgd(problem, JointNonlinearity::norm_clip(policy.initial_level), schedule, oracle,
                   initial_point(problem, opts), RngStream(opts.seed, opts.stream));
  std::uint64_t current = 0;
  return run_loop(problem, sgd, opts, [&](std::uint64_t t) {
    const std::uint64_t periods = t / period;
    if (periods != current) {
      current = periods;
      sgd.set_nonlinearity(JointNonlinearity::norm_clip(policy.level_after(periods)));
    }
  });
}

}  // namespace nlsgd
