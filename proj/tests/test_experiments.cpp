#include "nlsgd/experiments.hpp"

#include "doctest.h"

#include <string>

using namespace nlsgd;
using namespace nlsgd::experiments;

TEST_CASE("figure 1 curves share their starting point") {
  CannedOptions opts;
  opts.steps = 2000;
  opts.paths = 10;
  const auto r = figure1(opts);
  CHECK(r.sign.points.front().t == 0);
  CHECK(r.sign.points.front().mse_mean == r.linear.points.front().mse_mean);
  CHECK(r.sign_config.nonlinearity == "sign");
  CHECK(r.linear_config.nonlinearity == "identity");
  CHECK(r.sign_config.problem == r.linear_config.problem);
}

TEST_CASE("figure 2 theory line") {
  Figure2Options opts;
  opts.steps = 1000;
  opts.paths = 4;
  const auto r = figure2(opts);
  CHECK(r.theory_value == doctest::Approx(5.0));
  CHECK(r.min_a == doctest::Approx(1 / 2.1));
  CHECK(r.avar.size() == r.curve.points.size());

  opts.random_hessian = true;
  const auto rand = figure2(opts);
  CHECK(rand.theory_value > 0);
  CHECK(rand.config.problem != r.config.problem);
}

TEST_CASE("figure 2 rejects an inadmissible step size") {
  Figure2Options opts;
  opts.steps = 100;
  opts.paths = 2;
  opts.a = 0.3;
  try {
    figure2(opts);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("0.476") != std::string::npos);
  }
}

TEST_CASE("linear variance demo") {
  const auto r = linear_variance_demo({});
  CHECK(r.zero_noise.mean_sq_error < 1e-20);
  CHECK(r.zero_noise.median_sq_error < 1e-20);
  CHECK_FALSE(r.zero_noise.unstable);

  CHECK(r.sign.median_sq_error < 1e-3);
  CHECK(r.sign.median_sq_error < r.identity.median_sq_error);

  CHECK(r.identity.mean_median_ratio > 10);
  CHECK(r.identity.unstable);
  CHECK(r.identity.max_abs_iterate > 10);
  CHECK(r.identity.config.nonlinearity == "identity");
}
