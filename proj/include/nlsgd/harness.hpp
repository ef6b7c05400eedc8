#pragma once

#include "nlsgd/optimizer.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nlsgd {

/// One Monte-Carlo experiment. Spec-valued fields use the same syntax as the
/// CLI flags; see parse_config for the file form.
struct ExperimentConfig {
  std::string problem;
  std::string nonlinearity;
  std::string schedule;
  std::string noise = "zero";
  std::string oracle = "additive";
  std::uint64_t steps = 100000;
  std::uint64_t paths = 100;
  std::uint64_t base_seed = 0;
  /// "log:<count>" or a comma-separated iteration list.
  std::string checkpoints = "log:50";
  /// Worker threads; 0 means hardware concurrency. Results never depend on it.
  std::uint64_t threads = 0;
  /// One value (broadcast) or d comma-separated values.
  std::string x0 = "0";
  /// Norm-clip decay "<factor>:<period_epochs>"; requires normclip.
  std::string clip_decay;
  /// Iterations per epoch for non-mini-batch oracles.
  std::uint64_t epoch_length = 1;

  /// Canonical key = value rendering (threads excluded).
  std::string canonical() const;
  std::string fingerprint() const;
};

nlohmann::json to_json(const ExperimentConfig& cfg);

/// Parses a flat key = value document ('#' comments, blank lines ignored).
/// Every value is validated; the first problem is reported as
/// "line N: key 'k': ..." in a ConfigError.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig read_config(const std::string& path);
/// Sets one key with the same validation as parse_config.
void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value);
/// Validation without line context (used for configs built in code).
void validate_config(const ExperimentConfig& cfg);

/// Config specs turned into objects (loads datasets, solves for x*).
struct ResolvedExperiment {
  std::shared_ptr<const Problem> problem;
  NonlinearityConfig nonlinearity;
  StepSchedule schedule;
  GradientOracle oracle;
  Vector x0;
  std::vector<std::uint64_t> checkpoints;
  std::optional<ClipDecayPolicy> clip_decay;
};

ResolvedExperiment resolve(const ExperimentConfig& cfg);

/// Runs path `index` of the experiment (stream (base_seed, index)).
TrialRecord run_path(const ExperimentConfig& cfg, const ResolvedExperiment& ex, std::uint64_t index);

struct MsePoint {
  std::uint64_t t;
  double mse_mean;
  double mse_stderr;
  std::uint64_t overflow_count;
  double mse_median;
  double f_gap_mean;
};

struct MseCurve {
  std::vector<MsePoint> points;
  std::uint64_t paths = 0;
  std::string fingerprint;

  const MsePoint& at(std::uint64_t t) const;
};

/// Fixed-order pairwise summation.
double pairwise_sum(std::span<const double> values);

/// Cross-path statistics; records must share a checkpoint grid and are
/// combined in the given (path-index) order.
MseCurve aggregate(std::span<const TrialRecord> records, const std::string& fingerprint);

/// Runs cfg.paths independent paths on a worker pool and aggregates them.
MseCurve monte_carlo_mse(const ExperimentConfig& cfg);
MseCurve monte_carlo_mse(const ExperimentConfig& cfg, const ResolvedExperiment& ex);
/// The individual records, in path-index order.
std::vector<TrialRecord> run_all_paths(const ExperimentConfig& cfg, const ResolvedExperiment& ex);

struct AvarPoint {
  std::uint64_t t;
  double value;
};

/// (t / d) * mse_mean(t) at every checkpoint.
std::vector<AvarPoint> avar_estimate(const MseCurve& curve, std::size_t d);
/// Runs the experiment; requires a poly schedule with delta = 1.
std::vector<AvarPoint> avar_estimate(const ExperimentConfig& cfg);

/// Least-squares slope of log(mse_mean) against log(t) over checkpoints with
/// t in [t_lo, t_hi]. Needs >= 5 such points, none overflowed, all positive.
double slope_fit(const MseCurve& curve, double t_lo, double t_hi);

inline constexpr const char* kCsvHeader = "t,mse_mean,mse_stderr,overflow_count";

void write_csv(const MseCurve& curve, std::ostream& out);
nlohmann::json to_json(const MseCurve& curve);
MseCurve curve_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrialRecord& rec);

enum class OutputFormat { Csv, Json };
OutputFormat parse_format(const std::string& name);
/// Writes to path, or stdout when path is empty or "-".
void write_results(const MseCurve& curve, const std::string& path, OutputFormat format);
void write_json(const nlohmann::json& doc, const std::string& path);

}  // namespace nlsgd
