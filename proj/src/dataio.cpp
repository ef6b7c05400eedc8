#include "nlsgd/dataio.hpp"

#include "parse_util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace nlsgd {

ParseError::ParseError(std::size_t line, std::size_t column, const std::string& what)
    : ConfigError("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

Dataset::Dataset(std::size_t dims, std::vector<std::size_t> row_offsets, std::vector<std::uint32_t> indices,
                 std::vector<double> values, std::vector<double> labels, std::string digest)
    : dims_(dims),
      offsets_(std::move(row_offsets)),
      indices_(std::move(indices)),
      values_(std::move(values)),
      labels_(std::move(labels)),
      digest_(std::move(digest)) {
  if (offsets_.size() != labels_.size() + 1 || indices_.size() != values_.size() ||
      offsets_.back() != values_.size()) {
    throw ConfigError("dataset: inconsistent compressed-row arrays");
  }
}

Dataset::RowView Dataset::row(std::size_t i) const {
  const auto begin = offsets_[i];
  const auto count = offsets_[i + 1] - begin;
  return {std::span(indices_).subspan(begin, count), std::span(values_).subspan(begin, count)};
}

Vector Dataset::dense_row(std::size_t i) const {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(dims_));
  const auto r = row(i);
  for (std::size_t k = 0; k < r.indices.size(); ++k) v[r.indices[k]] = r.values[k];
  return v;
}

double Dataset::row_dot(std::size_t i, const Vector& x) const {
  double s = 0;
  for (auto k = offsets_[i]; k < offsets_[i + 1]; ++k) s += values_[k] * x[indices_[k]];
  return s;
}

double Dataset::row_squared_norm(std::size_t i) const {
  double s = 0;
  for (auto k = offsets_[i]; k < offsets_[i + 1]; ++k) s += values_[k] * values_[k];
  return s;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.dims_ == b.dims_ && a.offsets_ == b.offsets_ && a.indices_ == b.indices_ &&
         a.values_ == b.values_ && a.labels_ == b.labels_;
}

Dataset parse_libsvm(std::istream& in, const LibsvmOptions& opts) {
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::vector<double> labels;
  std::set<double> label_set;
  std::size_t max_index = 0;
  std::string raw;
  std::string line;
  std::size_t line_no = 0;

  while (std::getline(in, line)) {
    ++line_no;
    raw += line;
    raw += '\n';
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    std::istringstream fields{std::string(body)};
    std::string token;
    std::size_t column = 0;
    std::size_t previous = 0;
    while (fields >> token) {
      ++column;
      if (column == 1) {
        double y = 0;
        if (!detail::try_parse_double(token, y) || !std::isfinite(y)) {
          throw ParseError(line_no, column, "malformed label '" + token + "'");
        }
        labels.push_back(y);
        label_set.insert(y);
        continue;
      }
      const auto colon = token.find(':');
      if (colon == std::string::npos) {
        throw ParseError(line_no, column, "malformed token '" + token + "', expected <index>:<value>");
      }
      const std::string_view idx_text = std::string_view(token).substr(0, colon);
      std::size_t idx = 0;
      try {
        idx = detail::parse_u64(idx_text, "index");
      } catch (const ConfigError&) {
        throw ParseError(line_no, column, "malformed index '" + std::string(idx_text) + "'");
      }
      if (idx == 0) throw ParseError(line_no, column, "indices are 1-based; found 0");
      if (idx > UINT32_MAX) throw ParseError(line_no, column, "index too large");
      if (idx <= previous) {
        throw ParseError(line_no, column,
                         "non-ascending index " + std::to_string(idx) + " after " + std::to_string(previous));
      }
      double v = 0;
      if (!detail::try_parse_double(std::string_view(token).substr(colon + 1), v)) {
        throw ParseError(line_no, column, "unparseable value in '" + token + "'");
      }
      if (!std::isfinite(v)) throw ParseError(line_no, column, "non-finite value in '" + token + "'");
      previous = idx;
      max_index = std::max(max_index, idx);
      indices.push_back(static_cast<std::uint32_t>(idx - 1));
      values.push_back(v);
    }
    if (column > 0) offsets.push_back(values.size());
  }

  if (labels.empty()) throw ParseError(line_no, 0, "empty dataset");

  const bool plus_minus = std::all_of(label_set.begin(), label_set.end(), [](double y) { return y == 1 || y == -1; });
  const bool zero_one = std::all_of(label_set.begin(), label_set.end(), [](double y) { return y == 0 || y == 1; });
  if (!plus_minus && !zero_one) {
    std::string found;
    for (double y : label_set) found += (found.empty() ? "" : ", ") + detail::format_double(y);
    throw ConfigError("unsupported label set {" + found + "}; expected {-1,+1} or {0,1}");
  }
  if (!plus_minus) {
    for (double& y : labels) y = y == 0 ? -1.0 : 1.0;
  }

  std::size_t dims = max_index;
  if (opts.dims) {
    if (*opts.dims < max_index) {
      throw ConfigError("dims override " + std::to_string(*opts.dims) + " is below max index " +
                        std::to_string(max_index));
    }
    dims = *opts.dims;
  }
  if (dims == 0) throw ConfigError("dataset has no features");

  if (opts.unit_norm) {
    for (std::size_t i = 0; i + 1 < offsets.size(); ++i) {
      double s = 0;
      for (auto k = offsets[i]; k < offsets[i + 1]; ++k) s += values[k] * values[k];
      if (s == 0) continue;
      const double inv = 1.0 / std::sqrt(s);
      for (auto k = offsets[i]; k < offsets[i + 1]; ++k) values[k] *= inv;
    }
  }

  return Dataset(dims, std::move(offsets), std::move(indices), std::move(values), std::move(labels),
                 fnv1a_hex(raw));
}

Dataset load_libsvm(const std::string& path, const LibsvmOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ComputeError("cannot open dataset '" + path + "'");
  return parse_libsvm(in, opts);
}

std::string serialize_libsvm(const Dataset& ds) {
  std::string out;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    out += ds.label(i) > 0 ? "+1" : "-1";
    const auto r = ds.row(i);
    for (std::size_t k = 0; k < r.indices.size(); ++k) {
      out += ' ';
      out += std::to_string(r.indices[k] + 1);
      out += ':';
      out += detail::format_double(r.values[k]);
    }
    out += '\n';
  }
  return out;
}

DatasetSummary summarize(const Dataset& ds) {
  DatasetSummary s{};
  s.n = ds.rows();
  s.d = ds.dims();
  s.nonzeros = ds.nonzeros();
  s.sparsity = 1.0 - static_cast<double>(s.nonzeros) / (static_cast<double>(s.n) * static_cast<double>(s.d));
  std::size_t positives = 0;
  double squared = 0;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    positives += ds.label(i) > 0;
    squared += ds.row_squared_norm(i);
  }
  s.positive_fraction = static_cast<double>(positives) / static_cast<double>(s.n);
  s.smoothness_bound = squared / (4.0 * static_cast<double>(s.n));
  return s;
}

}  // namespace nlsgd
