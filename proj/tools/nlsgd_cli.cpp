#include "nlsgd/dataio.hpp"
#include "nlsgd/experiments.hpp"
#include "nlsgd/harness.hpp"
#include "nlsgd/theory.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

using namespace nlsgd;

namespace {

struct Common {
  std::string out;
  std::string format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> steps;
  std::optional<std::uint64_t> paths;
  std::optional<std::uint64_t> threads;
};

void add_output(CLI::App* app, Common& c, bool with_format) {
  app->add_option("--out", c.out, "Output path ('-' or omitted: stdout)");
  if (with_format) app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

void add_run_flags(CLI::App* app, Common& c, bool with_paths) {
  app->add_option("--seed", c.seed, "Base seed");
  app->add_option("--steps", c.steps, "Iterations T");
  if (with_paths) {
    app->add_option("--paths", c.paths, "Monte-Carlo paths");
    app->add_option("--threads", c.threads, "Worker threads (0: all cores)");
  }
}

// Experiment flags; each maps onto a config key.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_path, "Config file (key = value); flags override it");
  const std::pair<const char*, const char*> keys[] = {
      {"problem", "quadratic:<d>:<seed>[:<lmin>:<lmax>] | quadratic-iso:<d>:<seed> | quadratic-file:<path> | "
                  "logistic:<path>[:<lambda>]"},
      {"nonlinearity", "identity | sign | clip:<m> | quantize:<q,..>/<r,..> | tanh[:<g>] | bilevel | linear:<s> | "
                       "score-heavytail:<alpha> | normalize | normclip:<M>"},
      {"schedule", "poly:a=<a>,delta=<delta> | smoothed:a=<a>,b=<b>[,L=<L>]"},
      {"noise", "heavytail:<alpha> | gaussian:<sigma> | zero"},
      {"oracle", "additive | minibatch:<B>"},
      {"checkpoints", "log:<count> or a comma-separated list"},
      {"x0", "one value or d comma-separated values"},
      {"clip-decay", "<factor>:<period_epochs> (normclip only)"},
      {"epoch-length", "iterations per epoch for the additive oracle"},
  };
  for (const auto& [flag, help] : keys) {
    std::string key = flag;
    for (auto& ch : key)
      if (ch == '-') ch = '_';
    app->add_option_function<std::string>(
        std::string("--") + flag, [&f, key](const std::string& v) { f.values[key] = v; }, help);
  }
}

ExperimentConfig build_config(const ConfigFlags& f, const Common& c) {
  ExperimentConfig cfg = f.config_path.empty() ? ExperimentConfig{} : read_config(f.config_path);
  for (const auto& [key, value] : f.values) set_config_value(cfg, key, value);
  if (c.seed) cfg.base_seed = *c.seed;
  if (c.steps) set_config_value(cfg, "steps", std::to_string(*c.steps));
  if (c.paths) set_config_value(cfg, "paths", std::to_string(*c.paths));
  if (c.threads) cfg.threads = *c.threads;
  validate_config(cfg);
  return cfg;
}

void announce(const ExperimentConfig& cfg) {
  std::cerr << "# config " << cfg.fingerprint() << "\n";
  std::istringstream lines(cfg.canonical());
  for (std::string line; std::getline(lines, line);) std::cerr << "#   " << line << "\n";
}

std::string json_text(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

int cmd_run(const ConfigFlags& f, Common& c, std::uint64_t stream) {
  auto cfg = build_config(f, c);
  const auto format = parse_format(c.format);
  const auto ex = resolve(cfg);
  announce(cfg);
  const auto rec = run_path(cfg, ex, stream);
  if (format == OutputFormat::Json) {
    write_json(to_json(rec), c.out);
    return 0;
  }
  std::ostringstream out;
  out << "t,sq_error,f_gap,overflow\n";
  for (const auto& cp : rec.checkpoints)
    out << cp.t << ',' << json_text(cp.sq_error) << ',' << json_text(cp.f_gap) << ',' << (cp.overflow ? 1 : 0) << "\n";
  if (c.out.empty() || c.out == "-") {
    std::cout << out.str();
  } else {
    std::ofstream file(c.out);
    if (!(file << out.str())) throw ComputeError("cannot write '" + c.out + "'");
  }
  return 0;
}

int cmd_mse(const ConfigFlags& f, Common& c) {
  const auto cfg = build_config(f, c);
  const auto format = parse_format(c.format);
  const auto ex = resolve(cfg);
  announce(cfg);
  const auto curve = monte_carlo_mse(cfg, ex);
  if (format == OutputFormat::Json) {
    auto doc = to_json(curve);
    doc["config"] = to_json(cfg);
    write_json(doc, c.out);
  } else {
    write_results(curve, c.out, format);
  }
  return 0;
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream file(path);
  if (!(file << text)) throw ComputeError("cannot write '" + path + "'");
}

int cmd_avar(const ConfigFlags& f, Common& c) {
  const auto cfg = build_config(f, c);
  const auto format = parse_format(c.format);
  announce(cfg);
  const auto points = avar_estimate(cfg);
  if (format == OutputFormat::Json) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : points) arr.push_back({{"t", p.t}, {"avar", p.value}});
    write_json({{"config", to_json(cfg)}, {"avar", arr}}, c.out);
  } else {
    std::ostringstream out;
    out << "t,avar\n";
    for (const auto& p : points) out << p.t << ',' << json_text(p.value) << "\n";
    write_text(out.str(), c.out);
  }
  return 0;
}

struct TheoryFlags {
  std::string nonlinearity;
  std::string noise = "heavytail:2.05";
  double a = 1;
  double delta = 0.75;
  std::string hessian;
  std::string problem;
  double norm_x0 = 0;
};

nlohmann::json optional_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  if (!std::isfinite(*v)) return "inf";
  return *v;
}

nlohmann::json finite_or_text(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

int cmd_theory(const TheoryFlags& f, const Common& c) {
  const auto parsed = parse_nonlinearity(f.nonlinearity);
  const auto* nl = std::get_if<ComponentNonlinearity>(&parsed);
  if (!nl) throw ConfigError("theory: nonlinearity must be component-wise");
  const auto nm = parse_noise(f.noise);
  if (!f.hessian.empty() == !f.problem.empty()) throw ConfigError("theory: give exactly one of --hessian, --problem");

  TheoryInputs in{f.a, f.delta, {}, 0, 0, f.norm_x0, 1};
  if (!f.hessian.empty()) {
    const std::string prefix = "identity:";
    if (f.hessian.rfind(prefix, 0) != 0) throw ConfigError("theory: --hessian expects identity:<d>");
    std::uint64_t d = 0;
    try {
      d = std::stoull(f.hessian.substr(prefix.size()));
    } catch (const std::exception&) {
      throw ConfigError("theory: bad dimension in --hessian '" + f.hessian + "'");
    }
    if (d == 0) throw ConfigError("theory: --hessian dimension must be >= 1");
    in.hessian = Matrix::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    in.mu = 1;
    in.L = 1;
  } else {
    const auto p = make_problem(f.problem);
    in.hessian = hessian_at_optimum(*p);
    in.mu = p->strong_convexity();
    in.L = p->smoothness();
    in.norm_xstar = optimum(*p).x_star.norm();
  }
  const auto r = theory_report(*nl, nm, in);
  nlohmann::json doc = {{"nonlinearity", r.nonlinearity},
                        {"noise", r.noise},
                        {"a", r.a},
                        {"delta", r.delta},
                        {"d", r.d},
                        {"phi_prime_zero", r.phi_prime_zero},
                        {"sigma_psi_sq", finite_or_text(r.sigma_psi_sq)},
                        {"xi", finite_or_text(r.xi)},
                        {"zeta_bound", optional_json(r.zeta_bound)},
                        {"min_a", r.min_a},
                        {"admissible", r.admissible},
                        {"per_entry_avar", optional_json(r.per_entry_avar)},
                        {"best_per_entry_avar", finite_or_text(r.best_per_entry_avar)},
                        {"linear_sgd_avar", finite_or_text(r.linear_sgd_avar)}};
  write_json(doc, c.out);
  return 0;
}

struct DataFlags {
  std::string path;
  bool summary = false;
  std::optional<std::size_t> dims;
  std::string scale;
};

int cmd_parse_data(const DataFlags& f, const Common& c) {
  LibsvmOptions opts;
  opts.dims = f.dims;
  if (!f.scale.empty()) {
    if (f.scale != "unit-norm") throw ConfigError("--scale expects unit-norm");
    opts.unit_norm = true;
  }
  const auto ds = load_libsvm(f.path, opts);
  if (f.summary) {
    const auto s = summarize(ds);
    write_json({{"n", s.n},
                {"d", s.d},
                {"nonzeros", s.nonzeros},
                {"sparsity", s.sparsity},
                {"positive_fraction", s.positive_fraction},
                {"smoothness_bound", s.smoothness_bound},
                {"digest", ds.source_digest()}},
               c.out);
  } else {
    write_text(serialize_libsvm(ds), c.out);
  }
  return 0;
}

experiments::CannedOptions canned(const Common& c) {
  experiments::CannedOptions o;
  if (c.steps) o.steps = *c.steps;
  if (c.paths) o.paths = *c.paths;
  if (c.seed) o.seed = *c.seed;
  if (c.threads) o.threads = *c.threads;
  if (o.steps == 0 || o.paths == 0) throw ConfigError("--steps and --paths must be >= 1");
  return o;
}

int cmd_figure1(const Common& c) {
  const auto opts = canned(c);
  const auto format = parse_format(c.format);
  announce(experiments::figure1_config(opts, true));
  announce(experiments::figure1_config(opts, false));
  const auto r = experiments::figure1(opts);
  if (format == OutputFormat::Json) {
    write_json(to_json(r), c.out);
  } else if (c.out.empty() || c.out == "-") {
    std::cout << "# sign\n";
    write_csv(r.sign, std::cout);
    std::cout << "# linear\n";
    write_csv(r.linear, std::cout);
  } else {
    write_results(r.sign, c.out + ".sign.csv", format);
    write_results(r.linear, c.out + ".linear.csv", format);
  }
  return 0;
}

int cmd_figure2(const Common& c, double a, bool random_hessian) {
  experiments::Figure2Options opts;
  static_cast<experiments::CannedOptions&>(opts) = canned(c);
  opts.a = a;
  opts.random_hessian = random_hessian;
  const auto format = parse_format(c.format);
  announce(experiments::figure2_config(opts));
  const auto r = experiments::figure2(opts);
  if (format == OutputFormat::Json) {
    write_json(to_json(r), c.out);
  } else {
    std::ostringstream out;
    out << "t,avar,theory\n";
    for (const auto& p : r.avar) out << p.t << ',' << json_text(p.value) << ',' << json_text(r.theory_value) << "\n";
    write_text(out.str(), c.out);
  }
  return 0;
}

int cmd_linear_demo(const Common& c) {
  const auto opts = canned(c);
  const auto r = experiments::linear_variance_demo(opts);
  for (const auto* run : {&r.identity, &r.sign, &r.zero_noise}) announce(run->config);
  write_json(to_json(r), c.out);
  return 0;
}

void report_error(const char* kind, const std::string& message) {
  std::cerr << nlohmann::json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nonlinear SGD under heavy-tailed noise"};
  app.require_subcommand(1);

  Common common;
  ConfigFlags config_flags;
  std::uint64_t stream = 0;

  auto* run = app.add_subcommand("run", "Run a single path and print its checkpoints");
  add_config_flags(run, config_flags);
  add_run_flags(run, common, false);
  run->add_option("--stream", stream, "Path index (rng stream)");
  add_output(run, common, true);

  auto* mse = app.add_subcommand("mse", "Monte-Carlo MSE curve");
  add_config_flags(mse, config_flags);
  add_run_flags(mse, common, true);
  add_output(mse, common, true);

  auto* avar = app.add_subcommand("avar", "Empirical (t/d) * mse curve (poly schedule, delta = 1)");
  add_config_flags(avar, config_flags);
  add_run_flags(avar, common, true);
  add_output(avar, common, true);

  TheoryFlags theory_flags;
  auto* theory = app.add_subcommand("theory", "Closed-form and quadrature quantities for a nonlinearity and noise");
  theory->add_option("--nonlinearity", theory_flags.nonlinearity, "Component-wise nonlinearity")->required();
  theory->add_option("--noise", theory_flags.noise, "Noise spec")->capture_default_str();
  theory->add_option("--a", theory_flags.a, "Step-size scale a")->capture_default_str();
  theory->add_option("--delta", theory_flags.delta, "Step-size decay exponent")->capture_default_str();
  theory->add_option("--hessian", theory_flags.hessian, "identity:<d>");
  theory->add_option("--problem", theory_flags.problem, "Problem spec supplying the Hessian, mu, L and |x*|");
  theory->add_option("--norm-x0", theory_flags.norm_x0, "|x0|")->capture_default_str();
  add_output(theory, common, false);

  DataFlags data_flags;
  auto* parse_data = app.add_subcommand("parse-data", "Parse a LibSVM file; print it canonically or summarize it");
  parse_data->add_option("file", data_flags.path, "LibSVM file")->required();
  parse_data->add_flag("--summary", data_flags.summary, "Print a JSON summary instead");
  parse_data->add_option("--dims", data_flags.dims, "Feature count override");
  parse_data->add_option("--scale", data_flags.scale, "unit-norm");
  add_output(parse_data, common, false);

  auto* figure1 = app.add_subcommand("figure1", "Sign-SGD vs linear SGD MSE curves on a d=16 quadratic");
  add_run_flags(figure1, common, true);
  add_output(figure1, common, true);

  double fig2_a = 10;
  bool random_hessian = false;
  auto* figure2 = app.add_subcommand("figure2", "Empirical per-entry asymptotic variance vs theory");
  add_run_flags(figure2, common, true);
  figure2->add_option("--a", fig2_a, "Step-size scale a")->capture_default_str();
  figure2->add_flag("--random-hessian", random_hessian, "Random quadratic instead of the identity Hessian");
  add_output(figure2, common, true);

  auto* demo = app.add_subcommand("linear-variance-demo", "Scalar linear SGD under infinite-variance noise");
  add_run_flags(demo, common, true);
  add_output(demo, common, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("config", e.what());
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(config_flags, common, stream);
    if (mse->parsed()) return cmd_mse(config_flags, common);
    if (avar->parsed()) return cmd_avar(config_flags, common);
    if (theory->parsed()) return cmd_theory(theory_flags, common);
    if (parse_data->parsed()) return cmd_parse_data(data_flags, common);
    if (figure1->parsed()) return cmd_figure1(common);
    if (figure2->parsed()) return cmd_figure2(common, fig2_a, random_hessian);
    if (demo->parsed()) return cmd_linear_demo(common);
  } catch (const ConfigError& e) {
    report_error("config", e.what());
    return 1;
  } catch (const ComputeError& e) {
    report_error("runtime", e.what());
    return 2;
  } catch (const std::exception& e) {
    report_error("runtime", e.what());
    return 2;
  }
  return 0;
}
