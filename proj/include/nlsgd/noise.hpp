#pragma once

#include "nlsgd/common.hpp"
#include "nlsgd/rng.hpp"

#include <string>
#include <string_view>
#include <variant>

namespace nlsgd {

namespace noise {
/// p(u) = (alpha - 1) / (2 (1 + |u|)^alpha), alpha > 2.
struct HeavyTail {
  double alpha;
};
struct Gaussian {
  double sigma;
};
struct Zero {};
}  // namespace noise

using NoiseKind = std::variant<noise::HeavyTail, noise::Gaussian, noise::Zero>;

/// Symmetric univariate gradient-noise law, applied i.i.d. per coordinate
/// and per iteration.
class NoiseModel {
 public:
  explicit NoiseModel(NoiseKind kind);

  static NoiseModel heavy_tail(double alpha) { return NoiseModel(noise::HeavyTail{alpha}); }
  static NoiseModel gaussian(double sigma) { return NoiseModel(noise::Gaussian{sigma}); }
  static NoiseModel zero() { return NoiseModel(noise::Zero{}); }

  const NoiseKind& kind() const { return kind_; }
  bool is_zero() const { return std::holds_alternative<noise::Zero>(kind_); }

  /// Density; throws for the Zero model, which has none.
  double pdf(double u) const;
  double cdf(double u) const;
  /// 1 - cdf(u) for u >= 0, computed without cancellation.
  double upper_tail(double u) const;
  /// Inverse cdf on (0, 1); throws ConfigError for v outside (0, 1).
  double inverse_cdf(double v) const;

  double first_abs_moment() const;
  /// Per-coordinate variance; +infinity when it does not exist.
  double variance() const;

  double sample(RngStream& rng) const {
    return is_zero() ? 0.0 : inverse_cdf_unchecked(rng.uniform_open());
  }
  /// Overwrites out with out.size() i.i.d. draws.
  void fill(RngStream& rng, Vector& out) const;

  std::string spec() const;

 private:
  double inverse_cdf_unchecked(double v) const;

  NoiseKind kind_;
  double tail_exponent_ = 0;  // -1 / (alpha - 1) for HeavyTail
};

/// d i.i.d. draws by inverse-transform sampling.
Vector sample_vector(const NoiseModel& nm, int d, RngStream& rng);

/// Parses heavytail:<alpha>, gaussian:<sigma>, zero.
NoiseModel parse_noise(std::string_view spec);

}  // namespace nlsgd
