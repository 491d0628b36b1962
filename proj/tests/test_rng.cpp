#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "eivglm/errors.hpp"
#include "eivglm/rng.hpp"
#include "test_utils.hpp"

using namespace eivglm;
using test_utils::ks_statistic;
using test_utils::mean_of;
using test_utils::std_normal_cdf;
using test_utils::variance_of;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Published reference vectors for the 10-round 4x32 Philox block cipher.
  {
    const auto out = philox4x32_10({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(out[0] == 0x6627e8d5u);
    CHECK(out[1] == 0xe169c58du);
    CHECK(out[2] == 0xbc57ac4cu);
    CHECK(out[3] == 0x9b00dbd8u);
  }
  {
    const auto out = philox4x32_10(
        {0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
        {0xffffffffu, 0xffffffffu});
    CHECK(out[0] == 0x408f276du);
    CHECK(out[1] == 0x41c83b0eu);
    CHECK(out[2] == 0xa20bc7c6u);
    CHECK(out[3] == 0x6d5451fdu);
  }
  {
    const auto out = philox4x32_10(
        {0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
        {0xa4093822u, 0x299f31d0u});
    CHECK(out[0] == 0xd16cfe09u);
    CHECK(out[1] == 0x94fdccebu);
    CHECK(out[2] == 0x5001e420u);
    CHECK(out[3] == 0x24126ea1u);
  }
}

TEST_CASE("streams are reproducible and counter-addressable") {
  RngStream a(42, 7);
  std::vector<std::uint64_t> first;
  for (int i = 0; i < 32; ++i) first.push_back(a.next_u64());
  CHECK(a.counter() == 32);

  // Fresh stream with the same identity replays the sequence.
  RngStream b(42, 7);
  for (int i = 0; i < 32; ++i) CHECK(b.next_u64() == first[size_t(i)]);

  // Jumping the counter lands mid-sequence without replaying the prefix.
  RngStream c(42, 7);
  c.set_counter(20);
  for (int i = 20; i < 32; ++i) CHECK(c.next_u64() == first[size_t(i)]);

  // Changing any identity component changes the output.
  RngStream d(42, 8);
  RngStream e(43, 7);
  CHECK(d.next_u64() != first[0]);
  CHECK(e.next_u64() != first[0]);
}

TEST_CASE("interleaved streams match sequential consumption bit for bit") {
  RngStream s1(9, 1), s2(9, 2);
  std::vector<std::uint64_t> seq1, seq2;
  for (int i = 0; i < 100; ++i) seq1.push_back(s1.next_u64());
  for (int i = 0; i < 100; ++i) seq2.push_back(s2.next_u64());

  RngStream t1(9, 1), t2(9, 2);
  for (int i = 0; i < 100; ++i) {
    // Alternate consumption order; counter-based draws must not care.
    if (i % 2 == 0) {
      CHECK(t1.next_u64() == seq1[size_t(i)]);
      CHECK(t2.next_u64() == seq2[size_t(i)]);
    } else {
      CHECK(t2.next_u64() == seq2[size_t(i)]);
      CHECK(t1.next_u64() == seq1[size_t(i)]);
    }
  }
}

TEST_CASE("uniform variates live on [0,1) and pass a KS test") {
  RngStream rng(1, 11);
  const int n = 20000;
  std::vector<double> u(static_cast<size_t>(n));
  for (auto& x : u) {
    x = rng.uniform();
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  const double d = ks_statistic(u, [](double x) { return x; });
  CHECK(d < 0.015);  // ~1.95/sqrt(n): far beyond the 0.1% critical value

  RngStream rng2(1, 12);
  for (int i = 0; i < 20000; ++i) {
    const double x = rng2.uniform_pos();
    CHECK(x > 0.0);
    CHECK(x <= 1.0);
  }
}

TEST_CASE("normal variates match N(0,1) moments and distribution") {
  RngStream rng(2, 5);
  const int n = 100000;
  std::vector<double> z(static_cast<size_t>(n));
  for (auto& x : z) x = rng.normal();
  const double se_mean = 1.0 / std::sqrt(double(n));
  CHECK(std::fabs(mean_of(z)) < 4.0 * se_mean);
  const double se_var = std::sqrt(2.0 / double(n));
  CHECK(std::fabs(variance_of(z) - 1.0) < 4.0 * se_var);
  CHECK(ks_statistic(z, std_normal_cdf) < 0.01);
}

TEST_CASE("normal_pair components are uncorrelated standard normals") {
  RngStream rng(3, 5);
  const int n = 50000;
  std::vector<double> a(static_cast<size_t>(n)), b(static_cast<size_t>(n));
  double cross = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto pr = rng.normal_pair();
    a[size_t(i)] = pr[0];
    b[size_t(i)] = pr[1];
    cross += pr[0] * pr[1];
  }
  CHECK(ks_statistic(a, std_normal_cdf) < 0.012);
  CHECK(ks_statistic(b, std_normal_cdf) < 0.012);
  // Sample correlation of independent normals has sd ~ 1/sqrt(n).
  CHECK(std::fabs(cross / double(n)) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("exponential variates have unit mean and exponential law") {
  RngStream rng(4, 5);
  const int n = 100000;
  std::vector<double> x(static_cast<size_t>(n));
  for (auto& v : x) {
    v = rng.exponential();
    CHECK(v >= 0.0);
  }
  CHECK(std::fabs(mean_of(x) - 1.0) < 4.0 / std::sqrt(double(n)));
  CHECK(ks_statistic(x, [](double t) { return 1.0 - std::exp(-t); }) < 0.01);
}

TEST_CASE("gamma variates match shape/scale moments") {
  for (double shape : {0.7, 1.0, 2.5}) {
    RngStream rng(5, std::uint64_t(shape * 10));
    const int n = 100000;
    std::vector<double> x(static_cast<size_t>(n));
    for (auto& v : x) v = rng.gamma(shape);
    // mean = shape, var = shape for unit scale.
    CHECK(std::fabs(mean_of(x) - shape) <
          5.0 * std::sqrt(shape / double(n)));
    const double se_var = std::sqrt(1.0 / double(n)) *
                          std::sqrt(2.0 * shape * shape + 6.0 * shape);
    CHECK(std::fabs(variance_of(x) - shape) < 5.0 * se_var);
  }
  RngStream rng(5, 99);
  CHECK_THROWS_AS((void)rng.gamma(0.0), domain_error);
  CHECK_THROWS_AS((void)rng.gamma(-1.0), domain_error);
}

TEST_CASE("inverse gaussian variates match mean and variance") {
  const double mu = 1.3, lambda = 2.0;
  RngStream rng(6, 5);
  const int n = 200000;
  std::vector<double> x(static_cast<size_t>(n));
  for (auto& v : x) {
    v = rng.inv_gaussian(mu, lambda);
    CHECK(v > 0.0);
  }
  const double var = mu * mu * mu / lambda;
  CHECK(std::fabs(mean_of(x) - mu) < 5.0 * std::sqrt(var / double(n)));
  // Loose relative check on the variance itself.
  CHECK(std::fabs(variance_of(x) - var) < 0.05 * var);
  CHECK_THROWS_AS((void)rng.inv_gaussian(0.0, 1.0), domain_error);
  CHECK_THROWS_AS((void)rng.inv_gaussian(1.0, 0.0), domain_error);
}

TEST_CASE("uniform_index is unbiased over its range") {
  RngStream rng(7, 5);
  const std::uint64_t n = 20;
  const int draws = 100000;
  std::vector<int> counts(n, 0);
  for (int i = 0; i < draws; ++i) {
    const std::uint64_t k = rng.uniform_index(n);
    REQUIRE(k < n);
    ++counts[size_t(k)];
  }
  const double expect = double(draws) / double(n);
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expect) * (c - expect) / expect;
  CHECK(chi2 < test_utils::kChi2Crit19);
  CHECK(rng.uniform_index(1) == 0);
  CHECK_THROWS_AS((void)rng.uniform_index(0), domain_error);
}

TEST_CASE("distinct streams are statistically independent") {
  RngStream s1(8, 100), s2(8, 101);
  const int n = 50000;
  double cross = 0.0;
  for (int i = 0; i < n; ++i)
    cross += (s1.uniform() - 0.5) * (s2.uniform() - 0.5);
  // Covariance of independent uniforms has sd = 1/(12 sqrt(n)).
  CHECK(std::fabs(cross / double(n)) < 4.0 / (12.0 * std::sqrt(double(n))));
}

TEST_CASE("compose_stream packs disjoint bit fields") {
  CHECK(compose_stream(0, 0, 0) == 0);
  CHECK(compose_stream(0, 0, 1) == 1);
  CHECK(compose_stream(0, 1, 0) == (1ull << 29));
  CHECK(compose_stream(1, 0, 0) == (1ull << 58));
  CHECK(compose_stream(3, 5, 9) == ((3ull << 58) | (5ull << 29) | 9ull));
  constexpr std::uint64_t kMax29 = (1ull << 29) - 1;
  CHECK(compose_stream(63, kMax29, kMax29) == UINT64_MAX);
  CHECK_THROWS_AS((void)compose_stream(64, 0, 0), domain_error);
  CHECK_THROWS_AS((void)compose_stream(0, kMax29 + 1, 0), domain_error);
  CHECK_THROWS_AS((void)compose_stream(0, 0, kMax29 + 1), domain_error);
}

TEST_CASE("derive_seed is deterministic and collision-resistant in practice") {
  const std::uint64_t s = derive_seed(1, 6, 0, 0);
  CHECK(derive_seed(1, 6, 0, 0) == s);
  // Any change to a field changes the derived seed.
  CHECK(derive_seed(2, 6, 0, 0) != s);
  CHECK(derive_seed(1, 5, 0, 0) != s);
  CHECK(derive_seed(1, 6, 1, 0) != s);
  CHECK(derive_seed(1, 6, 0, 1) != s);
  // A small grid of derivations is collision-free.
  std::vector<std::uint64_t> seen;
  for (unsigned d = 0; d < 4; ++d)
    for (std::uint64_t a = 0; a < 8; ++a)
      for (std::uint64_t b = 0; b < 8; ++b) seen.push_back(derive_seed(17, d, a, b));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("sample_std_normal_vec fills every coordinate with N(0,1) draws") {
  RngStream rng(10, 3);
  const Eigen::Index p = 7;  // odd length exercises the tail draw
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd acc2 = Eigen::VectorXd::Zero(p);
  const int reps = 20000;
  for (int k = 0; k < reps; ++k) {
    const Eigen::VectorXd z = sample_std_normal_vec(p, rng);
    REQUIRE(z.size() == p);
    acc += z;
    acc2 += z.cwiseProduct(z);
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    CHECK(std::fabs(acc[j] / reps) < 4.0 / std::sqrt(double(reps)));
    CHECK(std::fabs(acc2[j] / reps - 1.0) <
          4.0 * std::sqrt(2.0 / double(reps)));
  }
  CHECK(sample_std_normal_vec(0, rng).size() == 0);
  CHECK_THROWS_AS((void)sample_std_normal_vec(-1, rng), domain_error);
}
