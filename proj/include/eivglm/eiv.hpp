#pragma once

#include <map>
#include <mutex>
#include <vector>

#include <Eigen/Dense>

#include "eivglm/diag_rank1.hpp"
#include "eivglm/glm.hpp"
#include "eivglm/rng.hpp"

namespace eivglm {

// Observations y_i with r_i >= 1 noisy replicate rows per true covariate
// vector: block i is r_i x p, row j holding w_ij = x_i + u_ij.
struct ReplicateDataset {
  Eigen::VectorXd y;
  std::vector<Eigen::MatrixXd> replicates;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const;
  int r(Eigen::Index i) const { return int(replicates[size_t(i)].rows()); }
  void validate() const;

  // Per-observation replicate means (n x p).  Computed as
  // row0 + mean(rowj - row0) so identical replicates reproduce their common
  // value exactly.
  Eigen::MatrixXd replicate_means() const;

  // Subtracts mu from every replicate row of every observation.
  void shift_columns(const Eigen::RowVectorXd& mu);
};

// Diagonal covariate and noise precisions, with optional per-observation
// noise overrides.  The posterior covariate precision for an observation with
// r replicates is diag(omega_x + r * omega_u); distinct replicate counts
// share one cached vector.
struct PrecisionPair {
  Eigen::VectorXd omega_x;
  Eigen::VectorXd omega_u;
  std::vector<Eigen::VectorXd> omega_u_obs;  // empty, or one vector per row

  PrecisionPair() = default;
  PrecisionPair(Eigen::VectorXd ox, Eigen::VectorXd ou)
      : omega_x(std::move(ox)), omega_u(std::move(ou)) {}
  PrecisionPair(const PrecisionPair& other);
  PrecisionPair& operator=(const PrecisionPair& other);

  void validate() const;

  const Eigen::VectorXd& omega_u_for(Eigen::Index obs) const;
  bool has_override(Eigen::Index obs) const;

  // diag(omega_x + r * omega_u), cached per distinct r (pooled noise only).
  const Eigen::VectorXd& posterior_diag(int r) const;
  Eigen::VectorXd posterior_diag_for(Eigen::Index obs, int r) const;
  long cache_hits() const { return cache_hits_; }

 private:
  mutable std::map<int, Eigen::VectorXd> cache_;
  mutable long cache_hits_ = 0;
  mutable std::mutex mu_;
};

struct NoiseEstimate {
  Eigen::VectorXd sigma_u;  // diagonal of the replicate-noise covariance
  Eigen::VectorXd omega_u;  // entrywise reciprocal
};

// Pooled noise estimate from within-observation replicate scatter: per
// coordinate, the average over observations of the mean squared pairwise
// replicate difference divided by two.  Requires every r_i >= 2.
NoiseEstimate estimate_me_precision_diag(const ReplicateDataset& data);

// Per-observation variant of the same estimator (one diagonal per row).
std::vector<Eigen::VectorXd> estimate_me_precision_per_obs(
    const ReplicateDataset& data);

// Signed average of pairwise replicate differences scaled by 1/sqrt(2).
// Zero in expectation under the noise model; exposed only as a diagnostic
// for auditing the variance-based estimator above.
Eigen::VectorXd me_raw_signed_average(const ReplicateDataset& data);

struct CovariatePrecisionEstimate {
  Eigen::VectorXd omega_x;
  std::vector<Eigen::Index> floored;  // columns whose variance hit the floor
};

// Reciprocal per-column sample variance (denominator n - 1), with the
// variance floored at 1e-8 and floored columns flagged.
CovariatePrecisionEstimate estimate_omega_x_diag(const Eigen::MatrixXd& X);

// One draw of x_i given only the replicates: N(r Lambda Omega_u wbar, Lambda)
// with Lambda = diag(omega_x + r omega_u)^{-1}; p independent normals.
Eigen::VectorXd impute_x_covariate_only(const Eigen::VectorXd& wbar_i, int r_i,
                                        const PrecisionPair& prec,
                                        RngStream& rng, Eigen::Index obs = -1);

// Gaussian-response draw: precision diag(omega_x + r omega_u) + beta beta^T /
// sigma2, natural parameter r Omega_u wbar + y beta / sigma2.
Eigen::VectorXd impute_x_gaussian(double y_i, const Eigen::VectorXd& wbar_i,
                                  int r_i, const PrecisionPair& prec,
                                  const Eigen::VectorXd& beta, double sigma2,
                                  RngStream& rng, Eigen::Index obs = -1);

// Latent Polya-Gamma scale for one observation: PG(shape_b, x beta + offset).
double sample_pg_latent(const Eigen::VectorXd& x_i,
                        const Eigen::VectorXd& beta, double shape_b,
                        RngStream& rng, double offset = 0.0);

// Binary-response draw given the latent scale z_i: precision
// diag(omega_x + r omega_u) + z beta beta^T, natural parameter
// (y - 1/2 - z * offset) beta + r Omega_u wbar.  offset carries an
// unpenalized intercept through the conditional.
Eigen::VectorXd impute_x_binomial(double y_i, double z_i,
                                  const Eigen::VectorXd& wbar_i, int r_i,
                                  const PrecisionPair& prec,
                                  const Eigen::VectorXd& beta, RngStream& rng,
                                  double offset = 0.0, Eigen::Index obs = -1);

// Which centering the count-family conditional uses for its linear term.
enum class CountKappa {
  shape_half,  // y - m/2, matching the latent-variable identity (default)
  half,        // y - 1/2, selectable for comparison runs
};

// Count-response draw; same form as impute_x_binomial with shape m_i and
// kappa chosen by the convention above.
Eigen::VectorXd impute_x_negbin(double y_i, int m_i, double z_i,
                                const Eigen::VectorXd& wbar_i, int r_i,
                                const PrecisionPair& prec,
                                const Eigen::VectorXd& beta, RngStream& rng,
                                CountKappa kappa = CountKappa::shape_half,
                                double offset = 0.0, Eigen::Index obs = -1);

}  // namespace eivglm
