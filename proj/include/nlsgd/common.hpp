#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace nlsgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Malformed specification strings, out-of-domain parameters, and schema
/// violations. The CLI maps this to exit code 1.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failures discovered while computing (solver non-convergence, I/O).
/// The CLI maps this to exit code 2.
class ComputeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 64-bit FNV-1a, rendered as 16 hex digits. Used for config fingerprints
/// and dataset digests.
std::string fnv1a_hex(std::string_view text);

}  // namespace nlsgd
