#include "nlsgd/dataio.hpp"

#include "doctest.h"

#include <clocale>
#include <cmath>
#include <sstream>

using namespace nlsgd;

namespace {

Dataset parse(const std::string& text, const LibsvmOptions& opts = {}) {
  std::istringstream in(text);
  return parse_libsvm(in, opts);
}

ParseError parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e;
  }
  FAIL("expected a ParseError for: " << text);
  return ParseError(0, 0, "");
}

const std::string kSample = std::string(NLSGD_TEST_DATA) + "/sample.libsvm";

}  // namespace

TEST_CASE("single row with a gap") {
  const auto ds = parse("+1 1:0.5 3:-2\n");
  CHECK(ds.rows() == 1);
  CHECK(ds.dims() >= 3);
  CHECK(ds.label(0) == 1.0);
  const Vector row = ds.dense_row(0);
  CHECK(row[0] == 0.5);
  CHECK(row[1] == 0.0);
  CHECK(row[2] == -2.0);
  CHECK(ds.nonzeros() == 2);
}

TEST_CASE("0/1 labels are remapped to -1/+1") {
  const auto ds = parse("0 2:1.0\n");
  CHECK(ds.label(0) == -1.0);
  CHECK(ds.dense_row(0)[1] == 1.0);
  const auto mixed = parse("1 1:1\n0 1:2\n");
  CHECK(mixed.label(0) == 1.0);
  CHECK(mixed.label(1) == -1.0);
  CHECK_THROWS_AS(parse("2 1:1\n"), ConfigError);
  CHECK_THROWS_AS(parse("1 1:1\n-1 1:1\n0 1:1\n"), ConfigError);
}

TEST_CASE("non-ascending index reports line and column") {
  const auto e = parse_error("1 3:4 2:5\n");
  CHECK(e.line() == 1);
  CHECK(e.column() == 3);
  CHECK(std::string(e.what()).find("non-ascending") != std::string::npos);

  const auto dup = parse_error("# header\n+1 1:1\n-1 2:1 2:3\n");
  CHECK(dup.line() == 3);
  CHECK(dup.column() == 3);
}

TEST_CASE("grammar violations") {
  CHECK(parse_error("+1 0:1\n").column() == 2);
  CHECK(parse_error("abc 1:1\n").column() == 1);
  CHECK(parse_error("+1 1:x\n").column() == 2);
  CHECK(parse_error("+1 1-2\n").column() == 2);
  CHECK(parse_error("+1 1:nan\n").column() == 2);
  CHECK(parse_error("+1 1:inf\n").column() == 2);
  CHECK(parse_error("+1 1:1\n\n-1 a:1\n").line() == 3);
}

TEST_CASE("comments and blank lines are skipped") {
  const auto ds = parse("# comment\n\n+1 1:1 # trailing\n   \n-1 2:2\n");
  CHECK(ds.rows() == 2);
  CHECK(ds.dims() == 2);
}

TEST_CASE("empty input is an error") {
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("# only comments\n\n"), ParseError);
}

TEST_CASE("rows without features are allowed") {
  const auto ds = parse("+1\n-1 2:1\n");
  CHECK(ds.rows() == 2);
  CHECK(ds.row_squared_norm(0) == 0.0);
}

TEST_CASE("scientific notation and explicit plus signs") {
  const auto ds = parse("+1 1:1e-3 2:+2.5E2 3:-4e+1\n");
  const Vector r = ds.dense_row(0);
  CHECK(r[0] == 1e-3);
  CHECK(r[1] == 250.0);
  CHECK(r[2] == -40.0);
}

TEST_CASE("parsing ignores the C locale's decimal separator") {
  const char* prev = std::setlocale(LC_NUMERIC, nullptr);
  const std::string saved = prev ? prev : "C";
  if (std::setlocale(LC_NUMERIC, "de_DE.UTF-8") || std::setlocale(LC_NUMERIC, "fr_FR.UTF-8")) {
    CHECK(parse("+1 1:0.25\n").dense_row(0)[0] == 0.25);
  }
  std::setlocale(LC_NUMERIC, saved.c_str());
  CHECK(parse("+1 1:0.25\n").dense_row(0)[0] == 0.25);
}

TEST_CASE("dims override") {
  LibsvmOptions opts;
  opts.dims = 10;
  CHECK(parse("+1 2:1\n", opts).dims() == 10);
  opts.dims = 1;
  CHECK_THROWS_AS(parse("+1 2:1\n", opts), ConfigError);
}

TEST_CASE("unit-norm scaling") {
  LibsvmOptions opts;
  opts.unit_norm = true;
  const auto ds = parse("+1 1:3 2:4\n-1\n", opts);
  CHECK(ds.row_squared_norm(0) == doctest::Approx(1.0));
  CHECK(ds.dense_row(0)[0] == doctest::Approx(0.6));
  CHECK(ds.row_squared_norm(1) == 0.0);
}

TEST_CASE("round trip through the canonical text form") {
  const auto ds = load_libsvm(kSample);
  CHECK(ds.rows() == 120);
  CHECK(ds.dims() == 8);
  const auto again = parse(serialize_libsvm(ds));
  CHECK(again == ds);
  const auto scaled = parse("+1 1:0.1 7:1e-17 9:123456.789012345\n");
  CHECK(parse(serialize_libsvm(scaled)) == scaled);
}

TEST_CASE("row accessors agree with the dense view") {
  const auto ds = load_libsvm(kSample);
  Vector x(8);
  for (int j = 0; j < 8; ++j) x[j] = 0.1 * (j + 1) - 0.3;
  for (std::size_t i = 0; i < ds.rows(); ++i) {
    const Vector r = ds.dense_row(i);
    CHECK(ds.row_dot(i, x) == doctest::Approx(r.dot(x)).epsilon(1e-14));
    CHECK(ds.row_squared_norm(i) == doctest::Approx(r.squaredNorm()).epsilon(1e-14));
  }
}

TEST_CASE("summary") {
  auto s = summarize(parse("+1 1:1 3:0\n"));
  CHECK(s.n == 1);
  CHECK(s.smoothness_bound == doctest::Approx(0.25));
  s = summarize(parse("+1 1:1\n-1 1:1\n"));
  CHECK(s.smoothness_bound == doctest::Approx(0.25));
  CHECK(s.positive_fraction == 0.5);
  s = summarize(parse("+1 1:1 2:1\n-1 2:3\n+1 1:2\n+1 4:1\n"));
  CHECK(s.d == 4);
  CHECK(s.nonzeros == 5);
  CHECK(s.sparsity == doctest::Approx(11.0 / 16.0));
  CHECK(s.positive_fraction == 0.75);
  CHECK(s.smoothness_bound == doctest::Approx((2 + 9 + 4 + 1) / 16.0));
}

TEST_CASE("missing file") { CHECK_THROWS(load_libsvm("/nonexistent/file.libsvm")); }
