#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "eivglm/errors.hpp"
#include "eivglm/rng.hpp"
#include "eivglm/sim.hpp"
#include "test_utils.hpp"

using namespace eivglm;

TEST_CASE("setting names round-trip") {
  for (SimSetting s : {SimSetting::G1, SimSetting::G2, SimSetting::G3,
                       SimSetting::B1, SimSetting::B2}) {
    const auto back = parse_setting(setting_name(s));
    REQUIRE(back.has_value());
    CHECK(*back == s);
  }
  CHECK_FALSE(parse_setting("G9").has_value());
  CHECK_FALSE(parse_setting("").has_value());
}

TEST_CASE("true coefficient patterns") {
  const Eigen::VectorXd decay = true_beta(SimSetting::G1, 15);
  REQUIRE(decay.size() == 15);
  CHECK(decay[0] == doctest::Approx(1.0));
  CHECK(decay[1] == doctest::Approx(0.5));
  CHECK(decay[9] == doctest::Approx(0.1));
  for (Eigen::Index j = 10; j < 15; ++j) CHECK(decay[j] == 0.0);
  // The binary decay setting shares the pattern.
  CHECK((true_beta(SimSetting::B1, 15) - decay).lpNorm<Eigen::Infinity>() ==
        0.0);

  for (SimSetting s : {SimSetting::G2, SimSetting::G3, SimSetting::B2}) {
    const Eigen::VectorXd pm = true_beta(s, 12);
    for (int j = 0; j < 5; ++j) CHECK(pm[j] == 1.0);
    for (int j = 5; j < 10; ++j) CHECK(pm[j] == -1.0);
    CHECK(pm[10] == 0.0);
    CHECK(pm[11] == 0.0);
  }
  CHECK_THROWS_AS((void)true_beta(SimSetting::G1, 9), domain_error);
}

TEST_CASE("banded precision and covariance are mutual inverses") {
  const BandPrecision band = gen_band_precision(8, 0.45);
  REQUIRE(band.omega.rows() == 8);
  // The covariance has an exactly unit diagonal by construction.
  for (Eigen::Index j = 0; j < 8; ++j)
    CHECK(band.sigma(j, j) == doctest::Approx(1.0).epsilon(1e-12));
  // Omega and Sigma invert each other.
  const Eigen::MatrixXd prod = band.omega * band.sigma;
  CHECK((prod - Eigen::MatrixXd::Identity(8, 8)).lpNorm<Eigen::Infinity>() <
        1e-10);
  // The precision stays tridiagonal after rescaling.
  for (Eigen::Index i = 0; i < 8; ++i)
    for (Eigen::Index j = 0; j < 8; ++j)
      if (std::abs(int(i) - int(j)) > 1) CHECK(band.omega(i, j) == 0.0);
  // Off-diagonal sign is negative (positive partial correlation).
  CHECK(band.omega(0, 1) < 0.0);
  // Cholesky factor reproduces the covariance.
  CHECK((band.chol_lower * band.chol_lower.transpose() - band.sigma)
            .lpNorm<Eigen::Infinity>() < 1e-12);

  // A magnitude at or beyond 1/2 makes the tridiagonal matrix lose positive
  // definiteness for large p.
  CHECK_THROWS_AS((void)gen_band_precision(100, 0.51), domain_error);
}

TEST_CASE("generated data matches the covariate and noise model") {
  SimulationSpec spec;
  spec.setting = SimSetting::G1;
  spec.n = 4000;
  spec.p = 12;
  spec.gamma = 0.5;
  spec.replicates = 2;
  spec.seed = 11;
  RngStream rng(11, 0);
  const SimDataset ds = gen_dataset(spec, rng);
  REQUIRE(ds.x_true.rows() == spec.n);
  REQUIRE(ds.data.n() == spec.n);
  CHECK((ds.beta_true - true_beta(SimSetting::G1, 12))
            .lpNorm<Eigen::Infinity>() == 0.0);

  // Covariates are standard normal per coordinate.
  for (Eigen::Index j = 0; j < spec.p; ++j) {
    const double m = ds.x_true.col(j).mean();
    const double v =
        (ds.x_true.col(j).array() - m).square().sum() / double(spec.n - 1);
    CHECK(std::fabs(m) < 4.0 / std::sqrt(double(spec.n)));
    CHECK(std::fabs(v - 1.0) < 5.0 * std::sqrt(2.0 / double(spec.n)));
  }

  // Replicate noise has variance gamma per coordinate.
  for (Eigen::Index j = 0; j < spec.p; ++j)
    CHECK(ds.sigma_u[j] == doctest::Approx(0.5));
  double scatter = 0.0;
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const auto& blk = ds.data.replicates[size_t(i)];
    scatter += (blk.row(0) - blk.row(1)).squaredNorm();
  }
  // E[(w1 - w2)^2] = 2 gamma per coordinate.
  scatter /= double(spec.n * spec.p);
  CHECK(scatter == doctest::Approx(2.0 * 0.5).epsilon(0.05));

  // The response follows the linear model with the setting's noise variance.
  Eigen::VectorXd resid = ds.data.y - ds.x_true * ds.beta_true;
  const double rv = resid.squaredNorm() / double(spec.n);
  CHECK(rv == doctest::Approx(spec.noise_variance()).epsilon(0.1));
}

TEST_CASE("banded covariates show first-neighbor correlation") {
  SimulationSpec spec;
  spec.setting = SimSetting::G3;
  spec.n = 6000;
  spec.p = 10;
  spec.gamma = 0.25;
  spec.replicates = 2;
  RngStream rng(12, 0);
  const SimDataset ds = gen_dataset(spec, rng);
  const BandPrecision band = gen_band_precision(spec.p, spec.band_magnitude);
  double c01 = 0.0, c02 = 0.0;
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    c01 += ds.x_true(i, 0) * ds.x_true(i, 1);
    c02 += ds.x_true(i, 0) * ds.x_true(i, 2);
  }
  c01 /= double(spec.n);
  c02 /= double(spec.n);
  CHECK(std::fabs(c01 - band.sigma(0, 1)) < 0.05);
  CHECK(std::fabs(c02 - band.sigma(0, 2)) < 0.05);
  CHECK(band.sigma(0, 1) > 0.2);
}

TEST_CASE("binary settings draw labels from the logistic model") {
  SimulationSpec spec;
  spec.setting = SimSetting::B1;
  spec.n = 8000;
  spec.p = 10;
  spec.gamma = 0.0;
  spec.replicates = 2;
  RngStream rng(13, 0);
  const SimDataset ds = gen_dataset(spec, rng);
  // Group observations by linear predictor and compare empirical rates.
  double lo_sum = 0.0, hi_sum = 0.0;
  int lo_n = 0, hi_n = 0;
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const double eta = ds.x_true.row(i).dot(ds.beta_true);
    if (eta < -1.0) {
      lo_sum += ds.data.y[i];
      ++lo_n;
    } else if (eta > 1.0) {
      hi_sum += ds.data.y[i];
      ++hi_n;
    }
    CHECK((ds.data.y[i] == 0.0 || ds.data.y[i] == 1.0));
  }
  REQUIRE(lo_n > 100);
  REQUIRE(hi_n > 100);
  CHECK(lo_sum / lo_n < 0.30);
  CHECK(hi_sum / hi_n > 0.70);
}

TEST_CASE("zero contamination copies the truth into every replicate") {
  SimulationSpec spec;
  spec.setting = SimSetting::G2;
  spec.n = 50;
  spec.p = 10;
  spec.gamma = 0.0;
  spec.replicates = 3;
  RngStream rng(14, 0);
  const SimDataset ds = gen_dataset(spec, rng);
  for (Eigen::Index i = 0; i < spec.n; ++i) {
    const auto& blk = ds.data.replicates[size_t(i)];
    REQUIRE(blk.rows() == 3);
    for (int j = 0; j < 3; ++j)
      REQUIRE((blk.row(j) - ds.x_true.row(i)).lpNorm<Eigen::Infinity>() ==
              0.0);
  }
  for (Eigen::Index j = 0; j < spec.p; ++j) CHECK(ds.sigma_u[j] == 0.0);
}

TEST_CASE("selection metrics hand values") {
  Eigen::VectorXd truth(5), est(5);
  truth << 1.0, 0.5, 0.0, 0.0, 0.0;
  est << 0.8, 0.0, 0.3, 1e-12, 0.0;
  const Metrics m = compute_metrics(est, truth, 1e-8);
  // (0.2^2 + 0.5^2 + 0.3^2) with the tiny entry below the threshold.
  CHECK(m.l2 == doctest::Approx(0.04 + 0.25 + 0.09).epsilon(1e-12));
  CHECK(m.tp == doctest::Approx(1.0));
  CHECK(m.fp == doctest::Approx(1.0));
  CHECK_THROWS_AS(
      (void)compute_metrics(est.head(4), truth, 1e-8), domain_error);
}

TEST_CASE("arm aggregation skips failed instances") {
  ArmResult arm;
  arm.success = {1, 0, 1};
  arm.metrics.resize(3);
  arm.metrics[0] = {1.0, 10.0, 2.0};
  arm.metrics[1] = {99.0, 0.0, 99.0};  // failed; must be ignored
  arm.metrics[2] = {3.0, 8.0, 4.0};
  arm.errors = {"", "boom", ""};
  CHECK(arm.n_success() == 2);
  const Metrics mean = arm.mean();
  CHECK(mean.l2 == doctest::Approx(2.0));
  CHECK(mean.tp == doctest::Approx(9.0));
  CHECK(mean.fp == doctest::Approx(3.0));

  ArmResult none;
  none.success = {0};
  none.metrics.resize(1);
  none.errors = {"x"};
  CHECK(none.n_success() == 0);
  CHECK(std::isnan(none.mean().l2));
}

TEST_CASE("specification validation") {
  SimulationSpec spec;
  spec.p = 10;
  CHECK_NOTHROW(spec.validate());
  spec.gamma = -0.1;
  CHECK_THROWS_AS(spec.validate(), domain_error);
  spec = SimulationSpec{};
  spec.p = 9;
  CHECK_THROWS_AS(spec.validate(), domain_error);
  spec = SimulationSpec{};
  spec.gamma = 0.5;
  spec.replicates = 1;  // noise present but not estimable
  CHECK_THROWS_AS(spec.validate(), domain_error);
  spec = SimulationSpec{};
  spec.gamma = 0.0;
  spec.replicates = 1;  // fine without noise
  CHECK_NOTHROW(spec.validate());
  spec = SimulationSpec{};
  spec.n_monte_carlo = 0;
  CHECK_THROWS_AS(spec.validate(), domain_error);
  spec = SimulationSpec{};
  spec.burn_in = spec.iterations;
  CHECK_THROWS_AS(spec.validate(), domain_error);
}

TEST_CASE("experiments are reproducible and thread-invariant") {
  SimulationSpec spec;
  spec.setting = SimSetting::G1;
  spec.n = 60;
  spec.p = 20;
  spec.gamma = 0.25;
  spec.replicates = 2;
  spec.n_monte_carlo = 3;
  spec.iterations = 8;
  spec.burn_in = 2;
  spec.folds = 4;
  spec.grid_length = 20;
  spec.seed = 29;
  spec.threads = 1;
  const ExperimentResult a = run_experiment(spec);
  const ExperimentResult b = run_experiment(spec);
  spec.threads = 8;
  const ExperimentResult c = run_experiment(spec);

  REQUIRE(a.iro.n_success() == 3);
  REQUIRE(a.ideal.n_success() == 3);
  REQUIRE(a.naive.n_success() == 3);
  for (int k = 0; k < 3; ++k) {
    CHECK(a.iro.metrics[size_t(k)].l2 == b.iro.metrics[size_t(k)].l2);
    CHECK(a.iro.metrics[size_t(k)].l2 == c.iro.metrics[size_t(k)].l2);
    CHECK(a.naive.metrics[size_t(k)].l2 == c.naive.metrics[size_t(k)].l2);
    CHECK(a.ideal.metrics[size_t(k)].l2 == c.ideal.metrics[size_t(k)].l2);
    CHECK(a.iro.metrics[size_t(k)].fp == c.iro.metrics[size_t(k)].fp);
    CHECK(a.iro.metrics[size_t(k)].tp == c.iro.metrics[size_t(k)].tp);
  }

  // The ideal arm sees the truth and must beat or match the naive arm on
  // average in this contaminated setting.
  CHECK(a.ideal.mean().l2 <= a.naive.mean().l2);
}
