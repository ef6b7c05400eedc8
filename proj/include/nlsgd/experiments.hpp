#pragma once

#include "nlsgd/harness.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nlsgd::experiments {

/// Settings shared by the canned experiments.
struct CannedOptions {
  std::uint64_t steps = 100000;
  std::uint64_t paths = 100;
  std::uint64_t seed = 0;
  std::uint64_t threads = 0;
};

/// Sign-SGD against linear SGD on a random d=16 quadratic, heavy-tailed
/// noise with alpha=2.05, steps 1/(t+1), x0 = 0.
struct Figure1Result {
  ExperimentConfig sign_config;
  ExperimentConfig linear_config;
  MseCurve sign;
  MseCurve linear;
};

ExperimentConfig figure1_config(const CannedOptions& opts, bool sign);
Figure1Result figure1(const CannedOptions& opts);

struct Figure2Options : CannedOptions {
  double a = 10;
  /// Random Hessian in place of the identity Hessian.
  bool random_hessian = false;
};

/// Empirical (t/d) mse against the per-entry asymptotic variance trace(S)/d.
struct Figure2Result {
  ExperimentConfig config;
  MseCurve curve;
  std::vector<AvarPoint> avar;
  double theory_value;
  double min_a;
};

ExperimentConfig figure2_config(const Figure2Options& opts);
/// Throws ConfigError naming the threshold when a <= min_a.
Figure2Result figure2(const Figure2Options& opts);

/// Scalar recursion x <- x - a_t Psi(x - x* + noise) with a_t = 1/(t+1).
struct LinearVarianceRun {
  std::string label;
  ExperimentConfig config;
  double max_abs_iterate;
  double mean_sq_error;
  double median_sq_error;
  std::uint64_t overflow_count;
  /// mean / median of the final squared error (infinite when the median is 0).
  double mean_median_ratio;
  bool unstable;
};

struct LinearVarianceReport {
  LinearVarianceRun identity;
  LinearVarianceRun sign;
  LinearVarianceRun zero_noise;
};

LinearVarianceReport linear_variance_demo(const CannedOptions& opts);

nlohmann::json to_json(const Figure1Result& r);
nlohmann::json to_json(const Figure2Result& r);
nlohmann::json to_json(const LinearVarianceReport& r);

}  // namespace nlsgd::experiments
