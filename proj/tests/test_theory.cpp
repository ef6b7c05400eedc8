#include "nlsgd/theory.hpp"

#include "doctest.h"

#include <boost/math/differentiation/finite_difference.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace nlsgd;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Independent phi: E[Psi(w + nu)] = int_0^inf [Psi(w+u) + Psi(w-u)] p(u) du,
// split at the points where Psi(w +- u) has kinks or its steepest change.
double phi_oracle(const ComponentNonlinearity& nl, const NoiseModel& nm, double w) {
  auto g = [&](double u) { return (nl(w + u) + nl(w - u)) * nm.pdf(u); };
  std::vector<double> cuts{0.0, std::abs(w)};
  for (double b : nl.breakpoints()) {
    for (double c : {b - w, w - b}) {
      if (c > 0) cuts.push_back(c);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  double total = 0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, cuts[i], cuts[i + 1], 15, 1e-12);
  }
  boost::math::quadrature::exp_sinh<double> tail;
  total += tail.integrate(g, cuts.back(), kInf);
  return total;
}

double sigma_oracle(const ComponentNonlinearity& nl, const NoiseModel& nm) {
  auto g = [&](double u) { return 2 * nl(u) * nl(u) * nm.pdf(u); };
  double total = 0;
  double lo = 0;
  for (double b : nl.breakpoints()) {
    if (b > lo) {
      total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, lo, b, 15, 1e-12);
      lo = b;
    }
  }
  boost::math::quadrature::exp_sinh<double> tail;
  return total + tail.integrate(g, lo, kInf);
}

std::vector<ComponentNonlinearity> bounded_catalog() {
  return {ComponentNonlinearity::sign(), ComponentNonlinearity::clip(1), ComponentNonlinearity::clip(0.3),
          ComponentNonlinearity::tanh(), ComponentNonlinearity::tanh(4), ComponentNonlinearity::bilevel(),
          ComponentNonlinearity::quantize({-1.0, 0.0, 1.0}, {-2.0, -0.5, 0.5, 2.0})};
}

std::vector<NoiseModel> noise_catalog() {
  return {NoiseModel::heavy_tail(2.05), NoiseModel::heavy_tail(3), NoiseModel::heavy_tail(4.5),
          NoiseModel::gaussian(1)};
}

}  // namespace

TEST_CASE("phi examples") {
  CHECK(phi(0, ComponentNonlinearity::sign(), NoiseModel::heavy_tail(3)) == 0.0);
  CHECK(phi(0, ComponentNonlinearity::sign(), NoiseModel::gaussian(2)) == 0.0);
  CHECK(phi(1, ComponentNonlinearity::sign(), NoiseModel::heavy_tail(3)) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(phi(0.3, ComponentNonlinearity::identity(), NoiseModel::heavy_tail(2.5)) == doctest::Approx(0.3));
  CHECK(phi(0.3, ComponentNonlinearity::identity(), NoiseModel::gaussian(1)) == doctest::Approx(0.3));
  CHECK_THROWS_AS(phi(0.3, ComponentNonlinearity::sign(), NoiseModel::zero()), ConfigError);
}

TEST_CASE("phi agrees with an independent quadrature") {
  for (const auto& nl : bounded_catalog()) {
    for (const auto& nm : noise_catalog()) {
      for (double w : {-4.0, -0.7, 0.05, 0.5, 1.0, 2.5, 30.0}) {
        CAPTURE(nl.spec());
        CAPTURE(nm.spec());
        CAPTURE(w);
        CHECK(std::abs(phi(w, nl, nm) - phi_oracle(nl, nm, w)) < 1e-8);
      }
    }
  }
}

TEST_CASE("phi is odd, nondecreasing, positive on w > 0 and bounded") {
  for (const auto& nl : bounded_catalog()) {
    for (const auto& nm : noise_catalog()) {
      CAPTURE(nl.spec());
      CAPTURE(nm.spec());
      double prev = -kInf;
      const double c2 = nl.bound().constant;
      for (double w = -20; w <= 20; w += 0.37) {
        const double v = phi(w, nl, nm);
        CHECK(std::abs(phi(-w, nl, nm) + v) < 1e-8);
        CHECK(v >= prev - 1e-10);
        CHECK(std::abs(v) <= c2 + 1e-12);
        if (w > 0) CHECK(v > 0);
        prev = v;
      }
    }
  }
}

TEST_CASE("phi'(0) examples") {
  CHECK(phi_prime_zero(ComponentNonlinearity::sign(), NoiseModel::heavy_tail(2.05)) == doctest::Approx(1.05));
  CHECK(phi_prime_zero(ComponentNonlinearity::clip(1), NoiseModel::heavy_tail(3)) == doctest::Approx(0.75));
  CHECK(phi_prime_zero(ComponentNonlinearity::identity(), NoiseModel::gaussian(1)) == 1.0);
  CHECK(phi_prime_zero(ComponentNonlinearity(component::Linear{2.5}), NoiseModel::heavy_tail(3)) == 2.5);
}

TEST_CASE("closed-form and numeric phi'(0) agree") {
  for (const auto& nl : bounded_catalog()) {
    for (const auto& nm : noise_catalog()) {
      CAPTURE(nl.spec());
      CAPTURE(nm.spec());
      CHECK(std::abs(phi_prime_zero(nl, nm) - phi_prime_zero_numeric(nl, nm)) < 1e-6);
    }
  }
  for (double alpha : {2.05, 3.0, 4.0}) {
    const auto nm = NoiseModel::heavy_tail(alpha);
    CHECK(std::abs(phi_prime_zero_numeric(ComponentNonlinearity::sign(), nm) - 2 * nm.pdf(0)) < 1e-6);
  }
}

TEST_CASE("numeric phi'(0) for tanh matches a finite difference of the oracle") {
  const auto nl = ComponentNonlinearity::tanh(2);
  const auto nm = NoiseModel::heavy_tail(3);
  const double h = 1e-3;
  const double central = (phi_oracle(nl, nm, h) - phi_oracle(nl, nm, -h)) / (2 * h);
  CHECK(phi_prime_zero(nl, nm) == doctest::Approx(central).epsilon(1e-5));
}

TEST_CASE("sigma^2 examples") {
  CHECK(sigma_psi_sq(ComponentNonlinearity::sign(), NoiseModel::heavy_tail(2.05)) == 1.0);
  CHECK(sigma_psi_sq(ComponentNonlinearity::sign(), NoiseModel::gaussian(3)) == 1.0);
  CHECK(sigma_psi_sq(ComponentNonlinearity::clip(1), NoiseModel::heavy_tail(3)) ==
        doctest::Approx(1 - 2 * (1 - std::log(2.0))).epsilon(1e-10));
  CHECK(sigma_psi_sq(ComponentNonlinearity::identity(), NoiseModel::heavy_tail(4)) == doctest::Approx(1.0));
  CHECK(std::isinf(sigma_psi_sq(ComponentNonlinearity::identity(), NoiseModel::heavy_tail(2.5))));
}

TEST_CASE("sigma^2 agrees with an independent quadrature") {
  for (const auto& nl : bounded_catalog()) {
    for (const auto& nm : noise_catalog()) {
      CAPTURE(nl.spec());
      CAPTURE(nm.spec());
      CHECK(std::abs(sigma_psi_sq(nl, nm) - sigma_oracle(nl, nm)) < 1e-8);
      CHECK(std::abs(sigma_psi_sq_numeric(nl, nm) - sigma_oracle(nl, nm)) < 1e-8);
    }
  }
}

TEST_CASE("asymptotic covariance") {
  const auto sign = ComponentNonlinearity::sign();
  const auto ht = NoiseModel::heavy_tail(2.05);
  const Matrix eye = Matrix::Identity(16, 16);
  const Matrix s = asymptotic_covariance(10, sign, ht, eye);
  CHECK(s.trace() / 16 == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(min_admissible_a(1.05, eye) == doctest::Approx(1 / 2.1));

  Matrix h(3, 3);
  h << 2, 0.3, 0.1, 0.3, 1, 0.2, 0.1, 0.2, 1.5;
  const double a = 3, gain = 0.8, sig = 0.6;
  const Matrix cov = asymptotic_covariance(a, gain, sig, h);
  const Matrix lhs = (2 * a * gain * h - Matrix::Identity(3, 3)) * cov;
  CHECK((lhs - a * a * sig * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);

  try {
    asymptotic_covariance(0.4, sign, ht, eye);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("0.476") != std::string::npos);
  }
}

TEST_CASE("best per-entry variance is the infimum over a") {
  const auto ht = NoiseModel::heavy_tail(2.05);
  const auto nl = ComponentNonlinearity::clip(1);
  const double best = best_per_entry_avar(nl, ht);
  const double gain = phi_prime_zero(nl, ht);
  const double sig = sigma_psi_sq(nl, ht);
  CHECK(best == doctest::Approx(sig / (gain * gain)));
  double smallest = kInf;
  for (double a = min_admissible_a(gain, Matrix::Identity(1, 1)) * 1.001; a < 50; a *= 1.01) {
    smallest = std::min(smallest, asymptotic_covariance(a, gain, sig, Matrix::Identity(1, 1))(0, 0));
    CHECK(asymptotic_covariance(a, gain, sig, Matrix::Identity(1, 1))(0, 0) >= best * (1 - 1e-12));
  }
  CHECK(smallest == doctest::Approx(best).epsilon(1e-3));
  CHECK(best_per_entry_avar(ComponentNonlinearity::sign(), ht) == doctest::Approx(1 / (1.05 * 1.05)));
}

TEST_CASE("linear SGD variance") {
  CHECK(linear_sgd_avar(NoiseModel::heavy_tail(4)) == doctest::Approx(1.0));
  CHECK(std::isinf(linear_sgd_avar(NoiseModel::heavy_tail(2.05))));
  CHECK(std::isinf(linear_sgd_avar(NoiseModel::heavy_tail(3))));
  CHECK(linear_sgd_avar(NoiseModel::gaussian(2)) == 4.0);
}

TEST_CASE("componentwise rate bound") {
  ComponentwiseRateInputs in{10, 0.75, 16, 1, 0, 1, 1, 1, 1.05, 0.402};
  CHECK(zeta_bound_componentwise(in) == doctest::Approx(10 * 0.25 * 0.402 * 1.05 / 41).epsilon(1e-12));
  CHECK(zeta_bound_componentwise(in) == doctest::Approx(0.02574).epsilon(1e-3));
  in.delta = 0.5 + 1e-9;
  CHECK(zeta_bound_componentwise(in) < 1e-8);
  in.delta = 0.75;
  in.a = 1e9;
  CHECK(zeta_bound_componentwise(in) == doctest::Approx(0.25 * 0.402 * 1.05 / 4).epsilon(1e-6));
  in.delta = 1.0;
  CHECK_THROWS_AS(zeta_bound_componentwise(in), ConfigError);
}

TEST_CASE("xi") {
  const auto sign = ComponentNonlinearity::sign();
  const auto ht = NoiseModel::heavy_tail(2.05);
  const double xi = xi_estimate(sign, ht);
  CHECK(xi >= xi_lower_bound_sign_heavy_tail(2.05));
  CHECK(xi_lower_bound_sign_heavy_tail(2.05) == doctest::Approx(std::pow(2.0, 1 / 2.05) - 1));
  CHECK(xi_estimate(ComponentNonlinearity::identity(), NoiseModel::gaussian(1)) == 1e6);

  for (const auto& nl : {sign, ComponentNonlinearity::clip(1), ComponentNonlinearity::tanh()}) {
    const double gain = phi_prime_zero(nl, ht);
    const double x = xi_estimate(nl, ht);
    REQUIRE(x < 1e6);
    for (double w = 1e-6; w <= x; w *= std::pow(10.0, 1.0 / 200)) {
      REQUIRE(phi(w, nl, ht) >= 0.5 * gain * w - 1e-12);
    }
    const double next = x * std::pow(10.0, 1.0 / 20);
    CHECK(phi(next, nl, ht) < 0.5 * gain * next);
  }
}

TEST_CASE("cone-ball mass and the joint rate bound") {
  const auto nm = NoiseModel::heavy_tail(3);
  RngStream rng(10, 0);
  Vector x = Vector::Zero(4);
  x[0] = 1;
  const double b0 = 1e6;
  const double mass = cone_ball_mass(nm, x, 0.999999, b0, 1000000, rng);
  // Independent Monte-Carlo estimate of 0.5 P(|u| <= B0).
  RngStream check(10, 1);
  int inside = 0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) inside += sample_vector(nm, 4, check).norm() <= b0;
  CHECK(mass == doctest::Approx(0.5 * inside / n).epsilon(0.01));

  JointRateInputs in{1, 0.75, 1, 1, 1, 0, 1, 0.5, 10, 1, 4};
  in.draws = 20000;
  in.directions = 16;
  const auto r = zeta_bound_joint(in, nm);
  CHECK(r.lambda_significant);
  CHECK(r.lambda > 0);
  CHECK(r.lambda_lo <= r.lambda);
  CHECK(r.lambda <= r.lambda_hi);
  CHECK(r.zeta_bound > 0);
  CHECK(r.zeta_bound < 1);
  in.delta = 0.5 + 1e-9;
  CHECK(zeta_bound_joint(in, nm).zeta_bound < 1e-8);
  in.delta = 0.75;
  in.kappa = 1;
  CHECK_THROWS_AS(zeta_bound_joint(in, nm), ConfigError);
}

TEST_CASE("fisher-optimal map") {
  const auto ht3 = NoiseModel::heavy_tail(3);
  const auto score = fisher_optimal_nonlinearity(ht3);
  CHECK(score(1) == doctest::Approx(1.5));
  CHECK(score(0) == 0.0);
  for (double w : {-3.0, -0.4, 0.2, 1.0, 7.0}) {
    const double numeric = boost::math::differentiation::finite_difference_derivative(
        [&](double u) { return std::log(ht3.pdf(u)); }, w);
    CHECK(score(w) == doctest::Approx(-numeric).epsilon(1e-8));
  }
  const auto g = fisher_optimal_nonlinearity(NoiseModel::gaussian(2));
  CHECK(g(1) == doctest::Approx(0.25));

  const auto ht = NoiseModel::heavy_tail(2.05);
  const double alpha = 2.05;
  const double fisher = alpha * alpha * (alpha - 1) / (alpha + 1);
  const double best = best_per_entry_avar(fisher_optimal_nonlinearity(ht), ht);
  CHECK(best == doctest::Approx(1 / fisher).epsilon(1e-8));
  CHECK(best <= best_per_entry_avar(ComponentNonlinearity::sign(), ht));
  CHECK(best == doctest::Approx(0.691).epsilon(1e-3));
}

TEST_CASE("joint drift is positive") {
  const auto nm = NoiseModel::heavy_tail(2.05);
  RngStream points(20, 0), draws(20, 1);
  for (const auto& nl : {JointNonlinearity::normalize(), JointNonlinearity::norm_clip(1)}) {
    for (int k = 0; k < 20; ++k) {
      const Vector x = sample_vector(NoiseModel::gaussian(1), 8, points);
      const auto est = joint_drift(nl, nm, x, 100000, draws);
      CHECK(est.mean - 2.576 * est.std_error > 0);
    }
  }
}

TEST_CASE("theory report") {
  TheoryInputs in{10, 0.75, Matrix::Identity(16, 16), 1, 1};
  const auto r = theory_report(ComponentNonlinearity::sign(), NoiseModel::heavy_tail(2.05), in);
  CHECK(r.admissible);
  REQUIRE(r.per_entry_avar.has_value());
  CHECK(*r.per_entry_avar == doctest::Approx(5.0));
  REQUIRE(r.zeta_bound.has_value());
  CHECK(*r.zeta_bound > 0);
  CHECK(r.best_per_entry_avar == doctest::Approx(0.907029478));
  CHECK(std::isinf(r.linear_sgd_avar));
  in.a = 0.3;
  const auto bad = theory_report(ComponentNonlinearity::sign(), NoiseModel::heavy_tail(2.05), in);
  CHECK_FALSE(bad.admissible);
  CHECK_FALSE(bad.per_entry_avar.has_value());
}
