#include "nlsgd/experiments.hpp"

#include "nlsgd/theory.hpp"

#include "parse_util.hpp"

#include <cmath>
#include <limits>

namespace nlsgd::experiments {

namespace {

constexpr const char* kHeavyTail = "heavytail:2.05";

ExperimentConfig base_config(const CannedOptions& opts) {
  ExperimentConfig cfg;
  cfg.steps = opts.steps;
  cfg.paths = opts.paths;
  cfg.base_seed = opts.seed;
  cfg.threads = opts.threads;
  cfg.noise = kHeavyTail;
  cfg.x0 = "0";
  return cfg;
}

LinearVarianceRun scalar_run(const CannedOptions& opts, const std::string& label, const std::string& nl,
                             const std::string& noise) {
  ExperimentConfig cfg = base_config(opts);
  cfg.problem = "quadratic-iso:1:1";
  cfg.nonlinearity = nl;
  cfg.noise = noise;
  cfg.schedule = "poly:a=1,delta=1";
  validate_config(cfg);
  const auto ex = resolve(cfg);
  const auto records = run_all_paths(cfg, ex);
  const auto curve = aggregate(records, cfg.fingerprint());

  LinearVarianceRun run{label, cfg, 0, 0, 0, 0, 0, false};
  for (const auto& r : records) run.max_abs_iterate = std::max(run.max_abs_iterate, r.max_abs_iterate);
  const auto& last = curve.points.back();
  run.mean_sq_error = last.mse_mean;
  run.median_sq_error = last.mse_median;
  run.overflow_count = last.overflow_count;
  run.mean_median_ratio = last.mse_median > 0 ? last.mse_mean / last.mse_median
                          : last.mse_mean > 0 ? std::numeric_limits<double>::infinity()
                                              : 1.0;
  run.unstable = run.overflow_count > 0 || run.mean_median_ratio > 10;
  return run;
}

nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

nlohmann::json to_json(const LinearVarianceRun& r) {
  return {{"label", r.label},
          {"config", to_json(r.config)},
          {"max_abs_iterate", json_number(r.max_abs_iterate)},
          {"mean_sq_error", json_number(r.mean_sq_error)},
          {"median_sq_error", json_number(r.median_sq_error)},
          {"overflow_count", r.overflow_count},
          {"mean_median_ratio", json_number(r.mean_median_ratio)},
          {"unstable", r.unstable}};
}

}  // namespace

ExperimentConfig figure1_config(const CannedOptions& opts, bool sign) {
  ExperimentConfig cfg = base_config(opts);
  cfg.problem = "quadratic:16:1:0.5:2";
  cfg.nonlinearity = sign ? "sign" : "identity";
  cfg.schedule = "poly:a=1,delta=1";
  validate_config(cfg);
  return cfg;
}

Figure1Result figure1(const CannedOptions& opts) {
  Figure1Result r{figure1_config(opts, true), figure1_config(opts, false), {}, {}};
  r.sign = monte_carlo_mse(r.sign_config);
  r.linear = monte_carlo_mse(r.linear_config);
  return r;
}

ExperimentConfig figure2_config(const Figure2Options& opts) {
  ExperimentConfig cfg = base_config(opts);
  cfg.problem = opts.random_hessian ? "quadratic:16:1:0.5:2" : "quadratic-iso:16:1";
  cfg.nonlinearity = "sign";
  cfg.schedule = "poly:a=" + detail::format_double(opts.a) + ",delta=1";
  validate_config(cfg);
  return cfg;
}

Figure2Result figure2(const Figure2Options& opts) {
  const auto cfg = figure2_config(opts);
  const auto ex = resolve(cfg);
  const auto nl = ComponentNonlinearity::sign();
  const auto nm = NoiseModel::heavy_tail(2.05);
  const Matrix h = hessian_at_optimum(*ex.problem);
  const double gain = phi_prime_zero(nl, nm);
  const double min_a = min_admissible_a(gain, h);
  const Matrix s = asymptotic_covariance(opts.a, nl, nm, h);

  Figure2Result r{cfg, monte_carlo_mse(cfg, ex), {}, s.trace() / static_cast<double>(h.rows()), min_a};
  r.avar = avar_estimate(r.curve, ex.problem->dim());
  return r;
}

LinearVarianceReport linear_variance_demo(const CannedOptions& opts) {
  return {scalar_run(opts, "identity", "identity", kHeavyTail), scalar_run(opts, "sign", "sign", kHeavyTail),
          scalar_run(opts, "identity-zero-noise", "identity", "zero")};
}

nlohmann::json to_json(const Figure1Result& r) {
  return {{"sign", {{"config", to_json(r.sign_config)}, {"curve", to_json(r.sign)}}},
          {"linear", {{"config", to_json(r.linear_config)}, {"curve", to_json(r.linear)}}}};
}

nlohmann::json to_json(const Figure2Result& r) {
  nlohmann::json avar = nlohmann::json::array();
  for (const auto& p : r.avar) avar.push_back({{"t", p.t}, {"avar", p.value}});
  return {{"config", to_json(r.config)},
          {"curve", to_json(r.curve)},
          {"avar", avar},
          {"theory_value", r.theory_value},
          {"min_a", r.min_a}};
}

nlohmann::json to_json(const LinearVarianceReport& r) {
  return {{"identity", to_json(r.identity)}, {"sign", to_json(r.sign)}, {"zero_noise", to_json(r.zero_noise)}};
}

}  // namespace nlsgd::experiments
