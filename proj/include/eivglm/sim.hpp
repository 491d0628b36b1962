#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eivglm/eiv.hpp"
#include "eivglm/iro.hpp"

namespace eivglm {

// Benchmark settings: G* draw a gaussian response, B* a binary one; G3 and B2
// use banded-precision covariates, the rest independent ones.
enum class SimSetting { G1, G2, G3, B1, B2 };

std::string setting_name(SimSetting s);
std::optional<SimSetting> parse_setting(const std::string& name);

struct SimulationSpec {
  SimSetting setting = SimSetting::G1;
  Eigen::Index n = 200;
  Eigen::Index p = 100;
  double gamma = 0.5;  // noise variance per coordinate relative to the signal
  int replicates = 3;
  Penalty penalty = Penalty::mcp;
  double mcp_gamma = 3.0;
  int n_monte_carlo = 1;
  std::uint64_t seed = 1;
  int iterations = 100;
  int burn_in = 20;
  int folds = 10;
  int tune_every = 1;
  Aggregation aggregation = Aggregation::median;
  double trim_alpha = 0.1;
  int grid_length = 50;
  double grid_min_ratio = 0.0;  // 0 -> family default
  double band_magnitude = 0.45;
  double zero_tol = 1e-8;  // support threshold for the selection metrics
  int threads = 1;

  void validate() const;
  Family family() const;          // gaussian for G*, binomial for B*
  double noise_variance() const;  // response variance for the G* settings
  bool banded() const;            // banded-precision covariates (G3, B2)
  double resolved_grid_ratio() const;
};

// True coefficient vector of a setting: harmonic decay over the first ten
// coordinates (G1, B1) or five +1 followed by five -1 (G2, G3, B2); zero
// elsewhere.  Requires p >= 10.
Eigen::VectorXd true_beta(SimSetting setting, Eigen::Index p);

// Tridiagonal precision with unit diagonal and -magnitude off the diagonal,
// rescaled so the implied covariance has unit diagonal.
struct BandPrecision {
  Eigen::MatrixXd omega;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd chol_lower;  // sigma = L L^T
};
BandPrecision gen_band_precision(Eigen::Index p, double magnitude);

struct SimDataset {
  ReplicateDataset data;
  Eigen::MatrixXd x_true;
  Eigen::VectorXd beta_true;
  Eigen::VectorXd sigma_u;  // true replicate-noise variance per coordinate
};

// Draws covariate rows, then the response, then replicate noise, all from the
// given stream.  gamma == 0 produces replicates exactly equal to the truth.
SimDataset gen_dataset(const SimulationSpec& spec, RngStream& rng);

struct Metrics {
  double l2 = 0.0;  // squared l2 distance to the true coefficients
  double tp = 0.0;  // true nonzeros recovered (|estimate| > zero_tol)
  double fp = 0.0;  // true zeros selected
};
Metrics compute_metrics(const Eigen::VectorXd& beta_hat,
                        const Eigen::VectorXd& beta_true, double zero_tol);

// Per-arm Monte-Carlo record: one slot per instance, failures carry the error
// message and are excluded from the means.
struct ArmResult {
  std::vector<int> success;  // 0/1 per instance
  std::vector<Metrics> metrics;
  std::vector<std::string> errors;

  int n_success() const;
  Metrics mean() const;  // over successful instances; NaN when none
};

struct ExperimentResult {
  SimulationSpec spec;
  ArmResult ideal;  // fit on the true covariates
  ArmResult naive;  // fit on the replicate means
  ArmResult iro;    // imputation-corrected fit
};

// Runs n_monte_carlo independent instances (parallelized over instances; each
// arm runs single-threaded inside) and collects the three arms' metrics.
// Results are identical for any thread count.
ExperimentResult run_experiment(const SimulationSpec& spec);

}  // namespace eivglm
