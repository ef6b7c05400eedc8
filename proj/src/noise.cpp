#include "nlsgd/noise.hpp"

#include "parse_util.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <cmath>
#include <limits>

namespace nlsgd {

NoiseModel::NoiseModel(NoiseKind kind) : kind_(kind) {
  if (const auto* h = std::get_if<noise::HeavyTail>(&kind_)) {
    if (!(h->alpha > 2) || !std::isfinite(h->alpha)) {
      throw ConfigError("heavytail noise requires alpha > 2");
    }
    tail_exponent_ = -1.0 / (h->alpha - 1.0);
  } else if (const auto* g = std::get_if<noise::Gaussian>(&kind_)) {
    if (!(g->sigma > 0) || !std::isfinite(g->sigma)) {
      throw ConfigError("gaussian noise requires sigma > 0");
    }
  }
}

double NoiseModel::pdf(double u) const {
  if (const auto* h = std::get_if<noise::HeavyTail>(&kind_)) {
    return (h->alpha - 1.0) / (2.0 * std::pow(1.0 + std::abs(u), h->alpha));
  }
  if (const auto* g = std::get_if<noise::Gaussian>(&kind_)) {
    const double z = u / g->sigma;
    return std::exp(-0.5 * z * z) / (g->sigma * std::sqrt(2.0 * M_PI));
  }
  throw ComputeError("zero noise has no density");
}

double NoiseModel::upper_tail(double u) const {
  if (const auto* h = std::get_if<noise::HeavyTail>(&kind_)) {
    return 0.5 * std::pow(1.0 + u, 1.0 - h->alpha);
  }
  if (const auto* g = std::get_if<noise::Gaussian>(&kind_)) {
    return 0.5 * std::erfc(u / (g->sigma * M_SQRT2));
  }
  return u >= 0 ? 0.0 : 1.0;
}

double NoiseModel::cdf(double u) const {
  if (is_zero()) return u >= 0 ? 1.0 : 0.0;
  return u >= 0 ? 1.0 - upper_tail(u) : upper_tail(-u);
}

double NoiseModel::inverse_cdf_unchecked(double v) const {
  if (std::holds_alternative<noise::HeavyTail>(kind_)) {
    if (v >= 0.5) return std::pow(2.0 * (1.0 - v), tail_exponent_) - 1.0;
    return 1.0 - std::pow(2.0 * v, tail_exponent_);
  }
  if (const auto* g = std::get_if<noise::Gaussian>(&kind_)) {
    // erfc_inv keeps full relative accuracy in both tails.
    return -g->sigma * M_SQRT2 * boost::math::erfc_inv(2.0 * v);
  }
  return 0.0;
}

double NoiseModel::inverse_cdf(double v) const {
  if (!(v > 0 && v < 1)) throw ConfigError("inverse_cdf: argument must lie in (0, 1)");
  return inverse_cdf_unchecked(v);
}

double NoiseModel::first_abs_moment() const {
  if (const auto* h = std::get_if<noise::HeavyTail>(&kind_)) return 1.0 / (h->alpha - 2.0);
  if (const auto* g = std::get_if<noise::Gaussian>(&kind_)) return g->sigma * std::sqrt(2.0 / M_PI);
  return 0.0;
}

double NoiseModel::variance() const {
  if (const auto* h = std::get_if<noise::HeavyTail>(&kind_)) {
    if (h->alpha <= 3) return std::numeric_limits<double>::infinity();
    return 2.0 / ((h->alpha - 3.0) * (h->alpha - 2.0));
  }
  if (const auto* g = std::get_if<noise::Gaussian>(&kind_)) return g->sigma * g->sigma;
  return 0.0;
}

void NoiseModel::fill(RngStream& rng, Vector& out) const {
  if (is_zero()) {
    out.setZero();
    return;
  }
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = inverse_cdf_unchecked(rng.uniform_open());
}

std::string NoiseModel::spec() const {
  if (const auto* h = std::get_if<noise::HeavyTail>(&kind_)) return "heavytail:" + detail::format_double(h->alpha);
  if (const auto* g = std::get_if<noise::Gaussian>(&kind_)) return "gaussian:" + detail::format_double(g->sigma);
  return "zero";
}

Vector sample_vector(const NoiseModel& nm, int d, RngStream& rng) {
  if (d < 1) throw ConfigError("sample_vector: dimension must be >= 1");
  Vector out(d);
  nm.fill(rng, out);
  return out;
}

NoiseModel parse_noise(std::string_view spec) {
  spec = detail::trim(spec);
  const auto colon = spec.find(':');
  const auto name = spec.substr(0, colon);
  if (name == "zero" && colon == std::string_view::npos) return NoiseModel::zero();
  if (colon == std::string_view::npos) {
    if (name == "heavytail" || name == "gaussian") {
      throw ConfigError("noise '" + std::string(name) + "' requires a parameter");
    }
    throw ConfigError("unknown noise '" + std::string(name) + "'");
  }
  const auto arg = spec.substr(colon + 1);
  if (name == "heavytail") return NoiseModel::heavy_tail(detail::parse_double(arg, "heavytail alpha"));
  if (name == "gaussian") return NoiseModel::gaussian(detail::parse_double(arg, "gaussian sigma"));
  throw ConfigError("unknown noise '" + std::string(name) + "'");
}

}  // namespace nlsgd
