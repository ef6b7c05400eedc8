#include "nlsgd/nonlinearity.hpp"

#include "parse_util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nlsgd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_positive(double v, const char* what) {
  if (!(v > 0) || !std::isfinite(v)) {
    throw ConfigError(std::string(what) + " must be a positive finite number");
  }
}

void validate_quantizer(const std::vector<double>& q, const std::vector<double>& r) {
  if (r.size() < 2 || q.size() + 1 != r.size()) {
    throw ConfigError("quantize: need J >= 2 values and J-1 thresholds");
  }
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i])) throw ConfigError("quantize: thresholds must be finite");
    if (i > 0 && !(q[i - 1] < q[i])) throw ConfigError("quantize: thresholds must increase strictly");
    if (q[i] != -q[q.size() - 1 - i]) throw ConfigError("quantize: thresholds must be symmetric about 0");
  }
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (!std::isfinite(r[j])) throw ConfigError("quantize: values must be finite");
    if (j > 0 && r[j - 1] > r[j]) throw ConfigError("quantize: values must be nondecreasing");
    if (r[j] != -r[r.size() - 1 - j]) throw ConfigError("quantize: values must be antisymmetric");
  }
}

double sign_of(double w) { return w > 0 ? 1.0 : (w < 0 ? -1.0 : 0.0); }

}  // namespace

ComponentNonlinearity::ComponentNonlinearity(ComponentKind kind) : kind_(std::move(kind)) {
  std::visit(overloaded{
                 [](const component::Identity&) {},
                 [](const component::Sign&) {},
                 [](const component::Clip& c) { require_positive(c.level, "clip level"); },
                 [this](const component::Quantize& c) {
                   validate_quantizer(c.thresholds, c.values);
                   thresholds_ = c.thresholds;
                   values_ = c.values;
                 },
                 [](const component::Tanh& c) { require_positive(c.gain, "tanh gain"); },
                 [this](const component::BiLevel&) {
                   thresholds_ = {-0.5, 0.0, 0.5};
                   values_ = {-1.0, -0.5, 0.5, 1.0};
                 },
                 [](const component::Linear& c) { require_positive(c.slope, "linear slope"); },
                 [](const component::HeavyTailScore& c) {
                   if (!(c.alpha > 2) || !std::isfinite(c.alpha)) {
                     throw ConfigError("score map requires alpha > 2");
                   }
                 },
             },
             kind_);
}

double ComponentNonlinearity::eval_unchecked(double w) const {
  switch (kind_.index()) {
    case 0:
      return w;
    case 1:
      return sign_of(w);
    case 2: {
      const double m = std::get<component::Clip>(kind_).level;
      return std::clamp(w, -m, m);
    }
    case 3:
    case 5: {
      if (w == 0) return 0.0;
      // first threshold >= w: w lies in (q_{k-1}, q_k]
      const auto k = std::lower_bound(thresholds_.begin(), thresholds_.end(), w) - thresholds_.begin();
      return values_[static_cast<std::size_t>(k)];
    }
    case 4:
      return std::tanh(std::get<component::Tanh>(kind_).gain * w);
    case 6:
      return std::get<component::Linear>(kind_).slope * w;
    case 7: {
      const double alpha = std::get<component::HeavyTailScore>(kind_).alpha;
      return sign_of(w) * alpha / (1.0 + std::abs(w));
    }
  }
  return 0.0;
}

double ComponentNonlinearity::operator()(double w) const {
  if (!std::isfinite(w)) throw std::domain_error("nonlinearity: non-finite input");
  return eval_unchecked(w);
}

BoundConstants ComponentNonlinearity::bound() const {
  return std::visit(
      overloaded{
          [](const component::Identity&) { return BoundConstants{BoundClass::LinearGrowth, 1.0}; },
          [](const component::Sign&) { return BoundConstants{BoundClass::Bounded, 1.0}; },
          [](const component::Clip& c) { return BoundConstants{BoundClass::Bounded, c.level}; },
          [](const component::Quantize& c) {
            double m = 0;
            for (double r : c.values) m = std::max(m, std::abs(r));
            return BoundConstants{BoundClass::Bounded, m};
          },
          [](const component::Tanh&) { return BoundConstants{BoundClass::Bounded, 1.0}; },
          [](const component::BiLevel&) { return BoundConstants{BoundClass::Bounded, 1.0}; },
          [](const component::Linear& c) { return BoundConstants{BoundClass::LinearGrowth, c.slope}; },
          [](const component::HeavyTailScore& c) { return BoundConstants{BoundClass::Bounded, c.alpha}; },
      },
      kind_);
}

std::vector<double> ComponentNonlinearity::breakpoints() const {
  switch (kind_.index()) {
    case 1:
    case 7:
      return {0.0};
    case 2: {
      const double m = std::get<component::Clip>(kind_).level;
      return {-m, m};
    }
    case 3:
    case 5: {
      auto b = thresholds_;
      if (!std::binary_search(b.begin(), b.end(), 0.0)) {
        b.insert(std::upper_bound(b.begin(), b.end(), 0.0), 0.0);
      }
      return b;
    }
    default:
      return {};
  }
}

bool ComponentNonlinearity::is_monotone() const {
  return !std::holds_alternative<component::HeavyTailScore>(kind_);
}

double ComponentNonlinearity::upper_limit() const {
  switch (kind_.index()) {
    case 0:
    case 6:
      return INFINITY;
    case 2:
      return std::get<component::Clip>(kind_).level;
    case 3:
    case 5:
      return values_.back();
    case 7:
      return 0.0;
    default:
      return 1.0;
  }
}

namespace {

std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += detail::format_double(v[i]);
  }
  return s;
}

}  // namespace

std::string ComponentNonlinearity::spec() const {
  return std::visit(
      overloaded{
          [](const component::Identity&) { return std::string("identity"); },
          [](const component::Sign&) { return std::string("sign"); },
          [](const component::Clip& c) { return "clip:" + detail::format_double(c.level); },
          [](const component::Quantize& c) { return "quantize:" + join(c.thresholds) + "/" + join(c.values); },
          [](const component::Tanh& c) { return "tanh:" + detail::format_double(c.gain); },
          [](const component::BiLevel&) { return std::string("bilevel"); },
          [](const component::Linear& c) { return "linear:" + detail::format_double(c.slope); },
          [](const component::HeavyTailScore& c) { return "score-heavytail:" + detail::format_double(c.alpha); },
      },
      kind_);
}

JointNonlinearity::JointNonlinearity(JointKind kind) : kind_(kind) {
  if (const auto* c = std::get_if<joint::NormClip>(&kind_)) require_positive(c->level, "normclip level");
}

double JointNonlinearity::radial(double q) const {
  if (const auto* c = std::get_if<joint::NormClip>(&kind_)) return q > c->level ? c->level / q : 1.0;
  return 1.0 / q;
}

BoundConstants JointNonlinearity::bound() const {
  if (const auto* c = std::get_if<joint::NormClip>(&kind_)) return {BoundClass::Bounded, c->level};
  return {BoundClass::Bounded, 1.0};
}

std::string JointNonlinearity::spec() const {
  if (const auto* c = std::get_if<joint::NormClip>(&kind_)) return "normclip:" + detail::format_double(c->level);
  return "normalize";
}

double eval_scalar(const ComponentNonlinearity& nl, double w) { return nl(w); }

void eval_vector_into(const NonlinearityConfig& nl, const Vector& w, Vector& out) {
  out.resize(w.size());
  if (const auto* c = std::get_if<ComponentNonlinearity>(&nl)) {
    for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = c->eval_unchecked(w[i]);
    return;
  }
  const auto& j = std::get<JointNonlinearity>(nl);
  const double norm = w.norm();
  if (norm == 0) {
    out.setZero();
    return;
  }
  const double factor = j.radial(norm);
  for (Eigen::Index i = 0; i < w.size(); ++i) out[i] = w[i] * factor;
}

Vector eval_vector(const NonlinearityConfig& nl, const Vector& w) {
  if (!w.allFinite()) throw std::domain_error("nonlinearity: non-finite input");
  Vector out;
  eval_vector_into(nl, w, out);
  return out;
}

BoundConstants bound_constants(const NonlinearityConfig& nl) {
  return std::visit([](const auto& n) { return n.bound(); }, nl);
}

std::string to_spec(const NonlinearityConfig& nl) {
  return std::visit([](const auto& n) { return n.spec(); }, nl);
}

namespace {

std::vector<double> parse_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  for (auto part : detail::split(s, ',')) out.push_back(detail::parse_double(part, what));
  return out;
}

}  // namespace

NonlinearityConfig parse_nonlinearity(std::string_view spec) {
  spec = detail::trim(spec);
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  const bool has_arg = colon != std::string_view::npos;
  auto no_arg = [&]() {
    if (has_arg) throw ConfigError("nonlinearity '" + std::string(name) + "' takes no parameter");
  };
  auto need_arg = [&]() {
    if (!has_arg) throw ConfigError("nonlinearity '" + std::string(name) + "' requires a parameter");
  };

  if (name == "identity") return no_arg(), ComponentNonlinearity::identity();
  if (name == "sign") return no_arg(), ComponentNonlinearity::sign();
  if (name == "bilevel") return no_arg(), ComponentNonlinearity::bilevel();
  if (name == "normalize") return no_arg(), JointNonlinearity::normalize();
  if (name == "tanh") return ComponentNonlinearity::tanh(has_arg ? detail::parse_double(arg, "tanh gain") : 1.0);
  if (name == "clip") return need_arg(), ComponentNonlinearity::clip(detail::parse_double(arg, "clip level"));
  if (name == "normclip") {
    need_arg();
    return JointNonlinearity::norm_clip(detail::parse_double(arg, "normclip level"));
  }
  if (name == "linear") {
    need_arg();
    return ComponentNonlinearity(component::Linear{detail::parse_double(arg, "linear slope")});
  }
  if (name == "score-heavytail") {
    need_arg();
    return ComponentNonlinearity(component::HeavyTailScore{detail::parse_double(arg, "score alpha")});
  }
  if (name == "quantize") {
    need_arg();
    const auto slash = arg.find('/');
    if (slash == std::string_view::npos) throw ConfigError("quantize: expected <thresholds>/<values>");
    return ComponentNonlinearity::quantize(parse_list(arg.substr(0, slash), "quantize threshold"),
                                           parse_list(arg.substr(slash + 1), "quantize value"));
  }
  throw ConfigError("unknown nonlinearity '" + std::string(name) + "'");
}

}  // namespace nlsgd
