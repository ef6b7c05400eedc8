#include "nlsgd/quadrature.hpp"

#include "doctest.h"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <cmath>
#include <numbers>

using namespace nlsgd;

TEST_CASE("polynomials up to degree 22 are exact on one panel") {
  const auto r = integrate([](double x) { return std::pow(x, 22) - 3 * x * x + 1; }, -1, 2);
  const double exact = (std::pow(2.0, 23) + 1) / 23 - (8 + 1) + 3;
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(exact).epsilon(1e-14));
}

TEST_CASE("smooth integrands match tanh-sinh") {
  boost::math::quadrature::tanh_sinh<double> oracle;
  const std::function<double(double)> cases[] = {
      [](double x) { return std::sin(20 * x) * std::exp(-x); },
      [](double x) { return 1 / (1 + 100 * x * x); },
  };
  for (const auto& f : cases) {
    const auto r = integrate(f, 0, 3);
    CHECK(r.converged);
    CHECK(std::abs(r.value - oracle.integrate(f, 0.0, 3.0)) < 1e-11);
    CHECK(r.abs_error <= 1e-12);
  }
}

TEST_CASE("kinks and endpoint singularities match closed forms") {
  auto r = integrate([](double x) { return std::abs(x - 0.3); }, 0, 3);
  CHECK(r.converged);
  CHECK(std::abs(r.value - 3.69) < 1e-12);
  r = integrate([](double x) { return std::sqrt(x); }, 0, 3);
  CHECK(std::abs(r.value - 2 * std::sqrt(3.0)) < 1e-12);
  r = integrate([](double x) { return x < 1 ? 0.0 : 1.0; }, 0, 2.5);
  CHECK(std::abs(r.value - 1.5) < 1e-10);
}

TEST_CASE("log substitution handles long power-law intervals") {
  for (double alpha : {2.05, 3.0}) {
    auto f = [alpha](double u) { return std::pow(1 + u, -alpha); };
    const double hi = 1e12;
    const auto r = integrate_log_substituted(f, 0, hi);
    const double exact = (1 - std::pow(1 + hi, 1 - alpha)) / (alpha - 1);
    CHECK(r.converged);
    CHECK(std::abs(r.value - exact) < 1e-11);
    CHECK(r.evaluations < 2000);
  }
  const auto r = integrate_log_substituted([](double u) { return std::exp(-u); }, 2, 50);
  CHECK(r.value == doctest::Approx(std::exp(-2.0) - std::exp(-50.0)).epsilon(1e-12));
}

TEST_CASE("relative tolerance and interval budget") {
  QuadratureOptions opts;
  opts.abs_tol = 0;
  opts.rel_tol = 1e-10;
  const auto r = integrate([](double x) { return std::exp(x); }, 0, 10, opts);
  CHECK(r.value == doctest::Approx(std::exp(10.0) - 1).epsilon(1e-12));

  QuadratureOptions tight;
  tight.abs_tol = 1e-300;
  tight.max_intervals = 3;
  const auto bad = integrate([](double x) { return std::sin(1 / x); }, 1e-6, 1, tight);
  CHECK_FALSE(bad.converged);
}

TEST_CASE("reversed and empty intervals") {
  const auto f = [](double x) { return x * x; };
  CHECK(integrate(f, 2, 2).value == 0.0);
  CHECK(integrate(f, 3, 0).value == doctest::Approx(-9.0));
}
