#include "nlsgd/harness.hpp"

#include "parse_util.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

namespace nlsgd {

const MsePoint& MseCurve::at(std::uint64_t t) const {
  for (const auto& p : points)
    if (p.t == t) return p;
  throw ConfigError("curve has no checkpoint at t=" + std::to_string(t));
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0;
    for (double v : values) s += v;
    return s;
  }
  const auto half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

TrialRecord run_path(const ExperimentConfig& cfg, const ResolvedExperiment& ex, std::uint64_t index) {
  RunOptions opts;
  opts.steps = cfg.steps;
  opts.x0 = ex.x0;
  opts.seed = cfg.base_seed;
  opts.stream = index;
  opts.checkpoints = ex.checkpoints;
  opts.fingerprint = cfg.fingerprint();
  if (ex.clip_decay) {
    return run_d_clipped(*ex.problem, ex.schedule, *ex.clip_decay, ex.oracle, opts, cfg.epoch_length);
  }
  return run(*ex.problem, ex.nonlinearity, ex.schedule, ex.oracle, opts);
}

std::vector<TrialRecord> run_all_paths(const ExperimentConfig& cfg, const ResolvedExperiment& ex) {
  std::vector<TrialRecord> records(cfg.paths);
  std::uint64_t workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<std::uint64_t>(workers, cfg.paths);
  std::atomic<std::uint64_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (std::uint64_t i = next++; i < cfg.paths; i = next++) {
      try {
        records[i] = run_path(cfg, ex, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cfg.paths;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return records;
}

MseCurve aggregate(std::span<const TrialRecord> records, const std::string& fingerprint) {
  if (records.empty()) throw ConfigError("aggregate: no records");
  const auto count = records.front().checkpoints.size();
  for (const auto& r : records) {
    if (r.checkpoints.size() != count) throw ConfigError("aggregate: records have different checkpoint grids");
  }
  const auto n = records.size();
  MseCurve curve;
  curve.paths = n;
  curve.fingerprint = fingerprint;
  std::vector<double> sq(n);
  std::vector<double> gaps(n);
  std::vector<double> scratch(n);
  for (std::size_t k = 0; k < count; ++k) {
    MsePoint p{records.front().checkpoints[k].t, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = records[i].checkpoints[k];
      if (c.t != p.t) throw ConfigError("aggregate: records have different checkpoint grids");
      sq[i] = c.sq_error;
      gaps[i] = c.f_gap;
      p.overflow_count += c.overflow;
    }
    // Shift by the first value so identical paths give an exact mean and zero spread.
    const double shift = sq[0];
    for (std::size_t i = 0; i < n; ++i) scratch[i] = sq[i] - shift;
    const double offset = pairwise_sum(scratch) / static_cast<double>(n);
    p.mse_mean = shift + offset;
    if (n > 1) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = (sq[i] - shift - offset) * (sq[i] - shift - offset);
      const double var = pairwise_sum(scratch) / static_cast<double>(n - 1);
      p.mse_stderr = std::sqrt(var / static_cast<double>(n));
    }
    p.f_gap_mean = pairwise_sum(gaps) / static_cast<double>(n);
    scratch = sq;
    std::sort(scratch.begin(), scratch.end());
    p.mse_median = n % 2 ? scratch[n / 2] : 0.5 * (scratch[n / 2 - 1] + scratch[n / 2]);
    curve.points.push_back(p);
  }
  return curve;
}

MseCurve monte_carlo_mse(const ExperimentConfig& cfg, const ResolvedExperiment& ex) {
  const auto records = run_all_paths(cfg, ex);
  return aggregate(records, cfg.fingerprint());
}

MseCurve monte_carlo_mse(const ExperimentConfig& cfg) { return monte_carlo_mse(cfg, resolve(cfg)); }

std::vector<AvarPoint> avar_estimate(const MseCurve& curve, std::size_t d) {
  if (d == 0) throw ConfigError("avar_estimate: d must be positive");
  std::vector<AvarPoint> out;
  out.reserve(curve.points.size());
  for (const auto& p : curve.points) {
    out.push_back({p.t, static_cast<double>(p.t) / static_cast<double>(d) * p.mse_mean});
  }
  return out;
}

std::vector<AvarPoint> avar_estimate(const ExperimentConfig& cfg) {
  const auto ex = resolve(cfg);
  const auto* poly = std::get_if<schedule::PolynomialDecay>(&ex.schedule.kind());
  if (!poly || poly->delta != 1.0) throw ConfigError("avar_estimate requires a poly schedule with delta=1");
  return avar_estimate(monte_carlo_mse(cfg, ex), ex.problem->dim());
}

double slope_fit(const MseCurve& curve, double t_lo, double t_hi) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : curve.points) {
    if (p.t == 0 || static_cast<double>(p.t) < t_lo || static_cast<double>(p.t) > t_hi) continue;
    if (p.overflow_count > 0) throw ConfigError("slope_fit: overflow at t=" + std::to_string(p.t));
    if (!(p.mse_mean > 0)) throw ConfigError("slope_fit: non-positive mse at t=" + std::to_string(p.t));
    xs.push_back(std::log(static_cast<double>(p.t)));
    ys.push_back(std::log(p.mse_mean));
  }
  if (xs.size() < 5) {
    throw ConfigError("slope_fit: need >= 5 checkpoints in the window, found " + std::to_string(xs.size()));
  }
  const double n = static_cast<double>(xs.size());
  const double mx = pairwise_sum(xs) / n;
  const double my = pairwise_sum(ys) / n;
  double sxy = 0;
  double sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

void write_csv(const MseCurve& curve, std::ostream& out) {
  out << kCsvHeader << "\n";
  for (const auto& p : curve.points) {
    out << p.t << ',' << detail::format_double(p.mse_mean) << ',' << detail::format_double(p.mse_stderr) << ','
        << p.overflow_count << "\n";
  }
}

nlohmann::json to_json(const MseCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"t", p.t},
                      {"mse_mean", p.mse_mean},
                      {"mse_stderr", p.mse_stderr},
                      {"overflow_count", p.overflow_count},
                      {"mse_median", p.mse_median},
                      {"f_gap_mean", p.f_gap_mean}});
  }
  return {{"fingerprint", curve.fingerprint}, {"paths", curve.paths}, {"points", points}};
}

MseCurve curve_from_json(const nlohmann::json& j) {
  try {
    MseCurve c;
    c.fingerprint = j.at("fingerprint").get<std::string>();
    c.paths = j.at("paths").get<std::uint64_t>();
    for (const auto& p : j.at("points")) {
      c.points.push_back({p.at("t").get<std::uint64_t>(), p.at("mse_mean").get<double>(),
                          p.at("mse_stderr").get<double>(), p.at("overflow_count").get<std::uint64_t>(),
                          p.at("mse_median").get<double>(), p.at("f_gap_mean").get<double>()});
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("curve JSON: ") + e.what());
  }
}

nlohmann::json to_json(const TrialRecord& rec) {
  nlohmann::json cps = nlohmann::json::array();
  for (const auto& c : rec.checkpoints) {
    cps.push_back({{"t", c.t}, {"sq_error", c.sq_error}, {"f_gap", c.f_gap}, {"overflow", c.overflow}});
  }
  nlohmann::json j = {{"seed", rec.seed},
                      {"stream", rec.stream},
                      {"fingerprint", rec.fingerprint},
                      {"checkpoints", cps},
                      {"max_abs_iterate", std::isfinite(rec.max_abs_iterate) ? nlohmann::json(rec.max_abs_iterate)
                                                                             : nlohmann::json("inf")}};
  j["overflow_at"] = rec.overflow_at ? nlohmann::json(*rec.overflow_at) : nlohmann::json(nullptr);
  return j;
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  throw ConfigError("unknown format '" + name + "' (expected csv or json)");
}

namespace {

template <class Writer>
void with_output(const std::string& path, Writer write) {
  if (path.empty() || path == "-") {
    write(std::cout);
    return;
  }
  std::ofstream out(path);
  if (!out) throw ComputeError("cannot open '" + path + "' for writing");
  write(out);
  if (!out) throw ComputeError("write to '" + path + "' failed");
}

}  // namespace

void write_results(const MseCurve& curve, const std::string& path, OutputFormat format) {
  with_output(path, [&](std::ostream& out) {
    if (format == OutputFormat::Csv) {
      write_csv(curve, out);
    } else {
      out << to_json(curve).dump(2) << "\n";
    }
  });
}

void write_json(const nlohmann::json& doc, const std::string& path) {
  with_output(path, [&](std::ostream& out) { out << doc.dump(2) << "\n"; });
}

}  // namespace nlsgd
