#pragma once

#include "nlsgd/nonlinearity.hpp"
#include "nlsgd/problems.hpp"
#include "nlsgd/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nlsgd {

namespace schedule {
/// alpha_t = a / (t + 1)^delta, delta in [0.5, 1].
struct PolynomialDecay {
  double a;
  double delta;
};
/// alpha_t = a / (b (t + 1) + L).
struct SmoothedDecay {
  double a;
  double b;
  double L;
};
}  // namespace schedule

class StepSchedule {
 public:
  using Kind = std::variant<schedule::PolynomialDecay, schedule::SmoothedDecay>;

  explicit StepSchedule(Kind kind);
  static StepSchedule polynomial(double a, double delta) { return StepSchedule(schedule::PolynomialDecay{a, delta}); }
  static StepSchedule smoothed(double a, double b, double l) { return StepSchedule(schedule::SmoothedDecay{a, b, l}); }

  double operator()(std::uint64_t t) const;
  const Kind& kind() const { return kind_; }
  std::string spec() const;

 private:
  Kind kind_;
};

/// Parses poly:a=<a>,delta=<delta> and smoothed:a=<a>,b=<b>[,L=<L>]. When L is
/// omitted it is taken from default_smoothness (the problem's L); a missing L
/// with no default is an error.
StepSchedule parse_schedule(std::string_view spec, std::optional<double> default_smoothness = std::nullopt);

/// Clipping level multiplied by `factor` after every `period_epochs` epochs.
struct ClipDecayPolicy {
  double initial_level;
  double factor;
  std::uint64_t period_epochs;

  void validate() const;
  double level_after(std::uint64_t periods) const;
};

/// Squared errors beyond this (or non-finite) are clamped and flagged.
inline constexpr double kOverflowCap = 1e300;

struct Checkpoint {
  std::uint64_t t;
  /// |x^t - x*|^2, clamped to kOverflowCap.
  double sq_error;
  /// f(x^t) - f*, clamped to kOverflowCap.
  double f_gap;
  bool overflow;
};

struct TrialRecord {
  std::vector<Checkpoint> checkpoints;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::string fingerprint;
  /// First iteration whose iterate was non-finite or beyond the cap.
  std::optional<std::uint64_t> overflow_at;
  /// max over t and i of |x^t_i| (infinite after an overflow).
  double max_abs_iterate = 0;
};

struct RunOptions {
  std::uint64_t steps = 0;
  /// Empty means the zero vector.
  Vector x0;
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  /// Iterations at which to record, strictly increasing, within [0, steps].
  /// Empty means log_spaced_checkpoints(steps).
  std::vector<std::uint64_t> checkpoints;
  std::string fingerprint;
};

/// {0} plus `count` log-spaced integers in [1, steps], deduplicated.
std::vector<std::uint64_t> log_spaced_checkpoints(std::uint64_t steps, std::size_t count = 50);

/// The recursion x^{t+1} = x^t - alpha_t Psi(g_t) with g_t a stochastic
/// gradient at x^t. Exposed step-by-step for tests and instrumentation.
class NonlinearSgd {
 public:
  NonlinearSgd(const Problem& problem, NonlinearityConfig nl, StepSchedule schedule, GradientOracle oracle,
               Vector x0, RngStream rng);

  /// Advances one iteration. Returns false if the stochastic gradient or
  /// the new iterate is non-finite; the path cannot continue after that.
  bool step();

  std::uint64_t iteration() const { return t_; }
  const Vector& iterate() const { return x_; }
  const NonlinearityConfig& nonlinearity() const { return nl_; }
  void set_nonlinearity(NonlinearityConfig nl) { nl_ = std::move(nl); }

 private:
  const Problem* problem_;
  NonlinearityConfig nl_;
  StepSchedule schedule_;
  StochasticGradient sampler_;
  RngStream rng_;
  Vector x_;
  Vector grad_;
  Vector direction_;
  std::uint64_t t_ = 0;
};

TrialRecord run(const Problem& problem, const NonlinearityConfig& nl, const StepSchedule& schedule,
                const GradientOracle& oracle, const RunOptions& opts);

/// Norm-clipped SGD whose level follows `policy`. An epoch is
/// ceil(n / batch) iterations for mini-batch oracles and `epoch_length`
/// iterations otherwise.
TrialRecord run_d_clipped(const Problem& problem, const StepSchedule& schedule, const ClipDecayPolicy& policy,
                          const GradientOracle& oracle, const RunOptions& opts, std::uint64_t epoch_length = 1);

/// Iterations per epoch for the given oracle.
std::uint64_t epoch_iterations(const Problem& problem, const GradientOracle& oracle, std::uint64_t fallback);

}  // namespace nlsgd
