#pragma once

#include "nlsgd/common.hpp"

#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace nlsgd {

enum class BoundClass { Bounded, LinearGrowth };

/// |Psi(w)| <= constant (Bounded) or |Psi(w)| <= constant * (1 + |w|).
struct BoundConstants {
  BoundClass bound_class;
  double constant;
};

namespace component {
struct Identity {};
struct Sign {};
struct Clip {
  double level;
};
/// Piecewise-constant quantizer: value r_j on (q_{j-1}, q_j], Psi(0) = 0.
struct Quantize {
  std::vector<double> thresholds;
  std::vector<double> values;
};
struct Tanh {
  double gain = 1.0;
};
/// Levels -1, -0.5, 0.5, 1 split at -0.5, 0, 0.5.
struct BiLevel {};
/// Psi(w) = slope * w.
struct Linear {
  double slope;
};
/// -(ln p)' for the polynomial-tail density: alpha * sign(w) / (1 + |w|).
struct HeavyTailScore {
  double alpha;
};
}  // namespace component

using ComponentKind =
    std::variant<component::Identity, component::Sign, component::Clip, component::Quantize,
                 component::Tanh, component::BiLevel, component::Linear,
                 component::HeavyTailScore>;

/// A scalar map applied independently to every coordinate.
class ComponentNonlinearity {
 public:
  explicit ComponentNonlinearity(ComponentKind kind);

  static ComponentNonlinearity identity() { return ComponentNonlinearity(component::Identity{}); }
  static ComponentNonlinearity sign() { return ComponentNonlinearity(component::Sign{}); }
  static ComponentNonlinearity clip(double m) { return ComponentNonlinearity(component::Clip{m}); }
  static ComponentNonlinearity tanh(double gain = 1.0) {
    return ComponentNonlinearity(component::Tanh{gain});
  }
  static ComponentNonlinearity bilevel() { return ComponentNonlinearity(component::BiLevel{}); }
  static ComponentNonlinearity quantize(std::vector<double> thresholds, std::vector<double> values) {
    return ComponentNonlinearity(component::Quantize{std::move(thresholds), std::move(values)});
  }

  /// Psi(w). Throws std::domain_error on non-finite input.
  double operator()(double w) const;
  /// Psi(w) without the finiteness check; for the optimizer's inner loop.
  double eval_unchecked(double w) const;

  const ComponentKind& kind() const { return kind_; }
  BoundConstants bound() const;
  /// Points where Psi is discontinuous or not differentiable.
  std::vector<double> breakpoints() const;
  /// Whether Psi is monotonically nondecreasing (false only for the score map).
  bool is_monotone() const;
  /// Limit of Psi(w) as w -> +inf; +inf for unbounded maps.
  double upper_limit() const;
  std::string spec() const;

 private:
  ComponentKind kind_;
  // Quantize and BiLevel share this table.
  std::vector<double> thresholds_;
  std::vector<double> values_;
};

namespace joint {
/// Psi(w) = w / |w|.
struct Normalize {};
/// Psi(w) = w * min(1, M / |w|).
struct NormClip {
  double level;
};
}  // namespace joint

using JointKind = std::variant<joint::Normalize, joint::NormClip>;

/// A radial map Psi(w) = w * N(|w|).
class JointNonlinearity {
 public:
  explicit JointNonlinearity(JointKind kind);

  static JointNonlinearity normalize() { return JointNonlinearity(joint::Normalize{}); }
  static JointNonlinearity norm_clip(double level) { return JointNonlinearity(joint::NormClip{level}); }

  /// The radial factor N(q) for q > 0.
  double radial(double q) const;
  const JointKind& kind() const { return kind_; }
  BoundConstants bound() const;
  std::string spec() const;

 private:
  JointKind kind_;
};

using NonlinearityConfig = std::variant<ComponentNonlinearity, JointNonlinearity>;

double eval_scalar(const ComponentNonlinearity& nl, double w);

/// Applies Psi to a whole vector. Throws std::domain_error if any entry of w
/// is non-finite.
Vector eval_vector(const NonlinearityConfig& nl, const Vector& w);
/// Allocation-free form used by the optimizer; out may alias nothing in w.
void eval_vector_into(const NonlinearityConfig& nl, const Vector& w, Vector& out);

BoundConstants bound_constants(const NonlinearityConfig& nl);

/// Parses identity, sign, clip:<m>, quantize:<q,...>/<r,...>, tanh[:<gain>],
/// bilevel, linear:<slope>, score-heavytail:<alpha>, normalize, normclip:<M>.
NonlinearityConfig parse_nonlinearity(std::string_view spec);
std::string to_spec(const NonlinearityConfig& nl);

}  // namespace nlsgd
