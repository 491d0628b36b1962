#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "eivglm/errors.hpp"
#include "eivglm/polya_gamma.hpp"
#include "eivglm/rng.hpp"
#include "test_utils.hpp"

using namespace eivglm;
using test_utils::ks_two_sample;
using test_utils::mean_of;
using test_utils::variance_of;

namespace {

// Exact variance of PG(b, c):
//   b / (4 c^3) * (sinh(c) - c) * sech^2(c / 2), continuously extended to
//   b / 24 at c = 0.
double pg_variance(double b, double c) {
  if (c == 0.0) return b / 24.0;
  const double sech = 1.0 / std::cosh(c / 2.0);
  return b * (std::sinh(c) - c) * sech * sech / (4.0 * c * c * c);
}

}  // namespace

TEST_CASE("closed-form mean helper") {
  CHECK(pg_mean({1.0, 0.0}) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(pg_mean({4.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-15));
  // b/(2c) tanh(c/2) at b=1, c=2: tanh(1)/4.
  CHECK(pg_mean({1.0, 2.0}) ==
        doctest::Approx(std::tanh(1.0) / 4.0).epsilon(1e-12));
  // Mean is even in c.
  CHECK(pg_mean({2.0, -3.0}) == doctest::Approx(pg_mean({2.0, 3.0})));
  // Continuity near zero.
  CHECK(pg_mean({1.0, 1e-8}) == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("exact PG(1,c) draws match closed-form mean and variance") {
  const int n = 100000;
  for (double c : {0.0, 0.5, 2.0, 5.0}) {
    RngStream rng(201, std::uint64_t(c * 10));
    std::vector<double> draws(static_cast<size_t>(n));
    for (auto& d : draws) {
      d = sample_pg1(c, rng);
      REQUIRE(d > 0.0);
    }
    const double mu = pg_mean({1.0, c});
    const double var = pg_variance(1.0, c);
    CHECK(std::fabs(mean_of(draws) - mu) < 4.0 * std::sqrt(var / n));
    // Variance to 5% relative tolerance at n = 1e5.
    CHECK(std::fabs(variance_of(draws) - var) < 0.05 * var);
  }
}

TEST_CASE("PG(1,c) is symmetric in the sign of the tilt") {
  const int n = 50000;
  RngStream ra(202, 1), rb(202, 2);
  std::vector<double> pos(static_cast<size_t>(n)), neg(static_cast<size_t>(n));
  for (auto& d : pos) d = sample_pg1(1.7, ra);
  for (auto& d : neg) d = sample_pg1(-1.7, rb);
  CHECK(ks_two_sample(pos, neg) < 0.015);
}

TEST_CASE("exact sampler matches the truncated-series oracle in distribution") {
  const int n = 100000;
  for (double c : {0.0, 2.0}) {
    RngStream ra(203, std::uint64_t(c)), rb(204, std::uint64_t(c));
    std::vector<double> exact(static_cast<size_t>(n)),
        series(static_cast<size_t>(n));
    for (auto& d : exact) d = sample_pg({1.0, c}, ra);
    for (auto& d : series) d = sample_pg_series({1.0, c}, 10000, rb);
    CHECK(ks_two_sample(exact, series) < 0.015);
  }
}

TEST_CASE("integer shape adds independent unit-shape draws") {
  // PG(3, c) from sample_pg must match the sum of three PG(1, c) draws in
  // distribution, and its moments must scale linearly in b.
  const int n = 100000;
  const double c = 1.0;
  RngStream ra(205, 1), rb(205, 2);
  std::vector<double> direct(static_cast<size_t>(n)),
      summed(static_cast<size_t>(n));
  for (auto& d : direct) d = sample_pg({3.0, c}, ra);
  for (auto& d : summed)
    d = sample_pg1(c, rb) + sample_pg1(c, rb) + sample_pg1(c, rb);
  CHECK(ks_two_sample(direct, summed) < 0.015);
  const double mu = pg_mean({3.0, c});
  const double var = pg_variance(3.0, c);
  CHECK(std::fabs(mean_of(direct) - mu) < 4.0 * std::sqrt(var / n));
  CHECK(std::fabs(variance_of(direct) - var) < 0.05 * var);
}

TEST_CASE("truncated series with one term is the leading gamma mode") {
  // With a single term the draw is g / (2 pi^2 (1/4 + c^2/(4 pi^2))) for
  // g ~ Gamma(b, 1); replaying the stream must reproduce it exactly.
  const double b = 2.0, c = 1.5;
  RngStream ra(206, 3), rb(206, 3);
  const double draw = sample_pg_series({b, c}, 1, ra);
  const double g = rb.gamma(b);
  const double denom = 2.0 * M_PI * M_PI * (0.25 + c * c / (4.0 * M_PI * M_PI));
  CHECK(draw == doctest::Approx(g / denom).epsilon(1e-14));
}

TEST_CASE("series oracle mean converges to the closed form") {
  const int n = 50000;
  const double c = 0.5;
  RngStream rng(207, 1);
  std::vector<double> draws(static_cast<size_t>(n));
  for (auto& d : draws) d = sample_pg_series({1.0, c}, 10000, rng);
  const double mu = pg_mean({1.0, c});
  const double var = pg_variance(1.0, c);
  CHECK(std::fabs(mean_of(draws) - mu) < 4.0 * std::sqrt(var / n) + 1e-5);
}

TEST_CASE("parameter validation") {
  RngStream rng(208, 1);
  CHECK_THROWS_AS((void)sample_pg({0.0, 1.0}, rng), domain_error);
  CHECK_THROWS_AS((void)sample_pg({-2.0, 1.0}, rng), domain_error);
  CHECK_THROWS_AS((void)sample_pg({std::nan(""), 1.0}, rng), domain_error);
  CHECK_THROWS_AS((void)sample_pg({1.0, std::nan("")}, rng), domain_error);
  CHECK_THROWS_AS((void)sample_pg_series({1.0, 0.0}, 0, rng), domain_error);
  CHECK_NOTHROW((void)sample_pg({0.5, 0.0}, rng));  // non-integer shape is fine
}
