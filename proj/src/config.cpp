#include "nlsgd/harness.hpp"

#include "parse_util.hpp"

#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>

namespace nlsgd {

namespace {

std::vector<std::uint64_t> parse_checkpoints(std::string_view spec, std::uint64_t steps) {
  spec = detail::trim(spec);
  if (spec.starts_with("log:")) {
    const auto count = detail::parse_u64(spec.substr(4), "checkpoint count");
    if (count < 1) throw ConfigError("checkpoint count must be >= 1");
    return log_spaced_checkpoints(steps, count);
  }
  std::vector<std::uint64_t> out;
  for (auto part : detail::split(spec, ',')) out.push_back(detail::parse_u64(part, "checkpoint"));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] > steps) throw ConfigError("checkpoint " + std::to_string(out[i]) + " exceeds steps");
    if (i > 0 && out[i] <= out[i - 1]) throw ConfigError("checkpoints must be strictly increasing");
  }
  return out;
}

std::vector<double> parse_x0(std::string_view spec) {
  std::vector<double> out;
  for (auto part : detail::split(spec, ',')) {
    const double v = detail::parse_double(part, "x0");
    if (!std::isfinite(v)) throw ConfigError("x0 must be finite");
    out.push_back(v);
  }
  return out;
}

std::pair<double, std::uint64_t> parse_clip_decay(std::string_view spec) {
  const auto parts = detail::split(spec, ':');
  if (parts.size() != 2) throw ConfigError("clip_decay: expected <factor>:<period_epochs>");
  const double factor = detail::parse_double(parts[0], "clip_decay factor");
  const auto period = detail::parse_u64(parts[1], "clip_decay period");
  if (!(factor > 0 && factor <= 1)) throw ConfigError("clip_decay factor must lie in (0, 1]");
  if (period < 1) throw ConfigError("clip_decay period must be >= 1");
  return {factor, period};
}

std::uint64_t positive(std::string_view v, const char* what) {
  const auto n = detail::parse_u64(v, what);
  if (n < 1) throw ConfigError(std::string(what) + " must be >= 1");
  return n;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"problem", [](auto& c, auto v) { validate_problem_spec(v); c.problem = v; }},
      {"nonlinearity", [](auto& c, auto v) { parse_nonlinearity(v); c.nonlinearity = v; }},
      {"schedule", [](auto& c, auto v) { parse_schedule(v, 1.0); c.schedule = v; }},
      {"noise", [](auto& c, auto v) { parse_noise(v); c.noise = v; }},
      {"oracle", [](auto& c, auto v) { parse_oracle(v, NoiseModel::zero()); c.oracle = v; }},
      {"steps", [](auto& c, auto v) { c.steps = positive(v, "steps"); }},
      {"paths", [](auto& c, auto v) { c.paths = positive(v, "paths"); }},
      {"seed", [](auto& c, auto v) { c.base_seed = detail::parse_u64(v, "seed"); }},
      {"checkpoints", [](auto& c, auto v) { parse_checkpoints(v, UINT64_MAX); c.checkpoints = v; }},
      {"threads", [](auto& c, auto v) { c.threads = detail::parse_u64(v, "threads"); }},
      {"x0", [](auto& c, auto v) { parse_x0(v); c.x0 = v; }},
      {"clip_decay", [](auto& c, auto v) { parse_clip_decay(v); c.clip_decay = v; }},
      {"epoch_length", [](auto& c, auto v) { c.epoch_length = positive(v, "epoch_length"); }},
  };
  return table;
}

void cross_check(const ExperimentConfig& cfg, const std::function<void(const char*, const std::string&)>& fail) {
  if (cfg.problem.empty()) fail("problem", "required key is missing");
  if (cfg.nonlinearity.empty()) fail("nonlinearity", "required key is missing");
  if (cfg.schedule.empty()) fail("schedule", "required key is missing");
  try {
    parse_checkpoints(cfg.checkpoints, cfg.steps);
  } catch (const ConfigError& e) {
    fail("checkpoints", e.what());
  }
  if (!cfg.clip_decay.empty()) {
    const auto nl = parse_nonlinearity(cfg.nonlinearity);
    const auto* j = std::get_if<JointNonlinearity>(&nl);
    if (!j || !std::holds_alternative<joint::NormClip>(j->kind())) fail("clip_decay", "requires a normclip nonlinearity");
  }
}

}  // namespace

std::string ExperimentConfig::canonical() const {
  std::ostringstream out;
  out << "problem = " << problem << "\n"
      << "nonlinearity = " << nonlinearity << "\n"
      << "schedule = " << schedule << "\n"
      << "noise = " << noise << "\n"
      << "oracle = " << oracle << "\n"
      << "steps = " << steps << "\n"
      << "paths = " << paths << "\n"
      << "seed = " << base_seed << "\n"
      << "checkpoints = " << checkpoints << "\n"
      << "x0 = " << x0 << "\n";
  if (!clip_decay.empty()) out << "clip_decay = " << clip_decay << "\n";
  out << "epoch_length = " << epoch_length << "\n";
  return out.str();
}

std::string ExperimentConfig::fingerprint() const { return fnv1a_hex(canonical()); }

nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j = {{"problem", cfg.problem},     {"nonlinearity", cfg.nonlinearity},
                      {"schedule", cfg.schedule},   {"noise", cfg.noise},
                      {"oracle", cfg.oracle},       {"steps", cfg.steps},
                      {"paths", cfg.paths},         {"seed", cfg.base_seed},
                      {"checkpoints", cfg.checkpoints}, {"x0", cfg.x0},
                      {"epoch_length", cfg.epoch_length}, {"fingerprint", cfg.fingerprint()}};
  if (!cfg.clip_decay.empty()) j["clip_decay"] = cfg.clip_decay;
  return j;
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    body = detail::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(detail::trim(body.substr(0, eq)));
    const auto value = detail::trim(body.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (seen.count(key)) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "' repeats line " +
                        std::to_string(seen[key]));
    }
    seen[key] = line_no;
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": key '" + key + "': " + e.what());
    }
  }
  cross_check(cfg, [&](const char* key, const std::string& what) {
    const auto it = seen.find(key);
    const std::string where = it == seen.end() ? "end of input" : "line " + std::to_string(it->second);
    throw ConfigError(where + ": key '" + key + "': " + what);
  });
  return cfg;
}

void set_config_value(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError("unknown key '" + std::string(key) + "'");
  try {
    it->second(cfg, detail::trim(value));
  } catch (const ConfigError& e) {
    throw ConfigError("key '" + std::string(key) + "': " + e.what());
  }
}

ExperimentConfig read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  return parse_config(in);
}

void validate_config(const ExperimentConfig& cfg) {
  auto check = [](const char* key, const std::function<void()>& f) {
    try {
      f();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("key '") + key + "': " + e.what());
    }
  };
  check("problem", [&] { validate_problem_spec(cfg.problem); });
  check("nonlinearity", [&] { parse_nonlinearity(cfg.nonlinearity); });
  check("schedule", [&] { parse_schedule(cfg.schedule, 1.0); });
  check("noise", [&] { parse_noise(cfg.noise); });
  check("oracle", [&] { parse_oracle(cfg.oracle, NoiseModel::zero()); });
  check("steps", [&] { if (cfg.steps < 1) throw ConfigError("must be >= 1"); });
  check("paths", [&] { if (cfg.paths < 1) throw ConfigError("must be >= 1"); });
  check("x0", [&] { parse_x0(cfg.x0); });
  check("epoch_length", [&] { if (cfg.epoch_length < 1) throw ConfigError("must be >= 1"); });
  if (!cfg.clip_decay.empty()) check("clip_decay", [&] { parse_clip_decay(cfg.clip_decay); });
  cross_check(cfg, [](const char* key, const std::string& what) {
    throw ConfigError(std::string("key '") + key + "': " + what);
  });
}

ResolvedExperiment resolve(const ExperimentConfig& cfg) {
  validate_config(cfg);
  auto problem = make_problem(cfg.problem);
  const auto noise = parse_noise(cfg.noise);
  auto oracle = parse_oracle(cfg.oracle, noise);
  validate_oracle(*problem, oracle);
  auto x0_values = parse_x0(cfg.x0);
  const auto d = static_cast<Eigen::Index>(problem->dim());
  Vector x0;
  if (x0_values.size() == 1) {
    x0 = Vector::Constant(d, x0_values[0]);
  } else if (static_cast<Eigen::Index>(x0_values.size()) == d) {
    x0 = Eigen::Map<const Vector>(x0_values.data(), d);
  } else {
    throw ConfigError("key 'x0': expected 1 or " + std::to_string(d) + " values");
  }
  std::optional<ClipDecayPolicy> clip;
  auto nl = parse_nonlinearity(cfg.nonlinearity);
  if (!cfg.clip_decay.empty()) {
    const auto [factor, period] = parse_clip_decay(cfg.clip_decay);
    const double level = std::get<joint::NormClip>(std::get<JointNonlinearity>(nl).kind()).level;
    clip = ClipDecayPolicy{level, factor, period};
  }
  auto schedule = parse_schedule(cfg.schedule, problem->smoothness());
  return ResolvedExperiment{std::move(problem),
                            std::move(nl),
                            std::move(schedule),
                            std::move(oracle),
                            std::move(x0),
                            parse_checkpoints(cfg.checkpoints, cfg.steps),
                            clip};
}

}  // namespace nlsgd
