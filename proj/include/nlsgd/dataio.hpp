#pragma once

#include "nlsgd/common.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nlsgd {

/// Grammar violation in a LibSVM document. Line is 1-based; column is the
/// 1-based whitespace-separated field number (the label is field 1).
class ParseError : public ConfigError {
 public:
  ParseError(std::size_t line, std::size_t column, const std::string& what);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Sparse binary-classification data in compressed-row form. Feature indices
/// are 0-based; labels are exactly -1 or +1.
class Dataset {
 public:
  struct RowView {
    std::span<const std::uint32_t> indices;
    std::span<const double> values;
  };

  Dataset(std::size_t dims, std::vector<std::size_t> row_offsets, std::vector<std::uint32_t> indices,
          std::vector<double> values, std::vector<double> labels, std::string digest);

  std::size_t rows() const { return labels_.size(); }
  std::size_t dims() const { return dims_; }
  std::size_t nonzeros() const { return values_.size(); }
  double label(std::size_t i) const { return labels_[i]; }
  RowView row(std::size_t i) const;
  Vector dense_row(std::size_t i) const;
  double row_dot(std::size_t i, const Vector& x) const;
  double row_squared_norm(std::size_t i) const;
  const std::string& source_digest() const { return digest_; }

  friend bool operator==(const Dataset& a, const Dataset& b);

 private:
  std::size_t dims_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> indices_;
  std::vector<double> values_;
  std::vector<double> labels_;
  std::string digest_;
};

struct LibsvmOptions {
  /// Column count override; must cover every index in the file.
  std::optional<std::size_t> dims;
  /// Rescale every nonzero row to unit Euclidean norm.
  bool unit_norm = false;
};

Dataset parse_libsvm(std::istream& in, const LibsvmOptions& opts = {});
Dataset load_libsvm(const std::string& path, const LibsvmOptions& opts = {});
/// Canonical text form; parse_libsvm(serialize_libsvm(ds)) reproduces ds.
std::string serialize_libsvm(const Dataset& ds);

struct DatasetSummary {
  std::size_t n;
  std::size_t d;
  std::size_t nonzeros;
  /// Fraction of zero entries in the dense n x d view.
  double sparsity;
  /// Fraction of +1 labels.
  double positive_fraction;
  /// (1 / 4n) * sum_i |d_i|^2, the data part of the logistic smoothness constant.
  double smoothness_bound;
};

DatasetSummary summarize(const Dataset& ds);

}  // namespace nlsgd
