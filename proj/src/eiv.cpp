#include "eivglm/eiv.hpp"

#include <cmath>

#include "eivglm/errors.hpp"
#include "eivglm/polya_gamma.hpp"

namespace eivglm {

namespace {

constexpr double kVarianceFloor = 1e-8;

void check_positive_vector(const Eigen::VectorXd& v, const char* what) {
  if (v.size() == 0) throw domain_error(std::string(what) + ": empty");
  if (!v.allFinite() || (v.array() <= 0.0).any())
    throw domain_error(std::string(what) + ": entries must be positive");
}

}  // namespace

Eigen::Index ReplicateDataset::p() const {
  return replicates.empty() ? 0 : replicates.front().cols();
}

void ReplicateDataset::validate() const {
  const Eigen::Index nn = y.size();
  if (nn < 1) throw domain_error("ReplicateDataset: empty response");
  if (Eigen::Index(replicates.size()) != nn)
    throw domain_error("ReplicateDataset: one replicate block per response");
  if (!y.allFinite())
    throw domain_error("ReplicateDataset: non-finite response");
  const Eigen::Index pp = p();
  if (pp < 1) throw domain_error("ReplicateDataset: empty covariate block");
  for (Eigen::Index i = 0; i < nn; ++i) {
    const auto& block = replicates[size_t(i)];
    if (block.rows() < 1)
      throw domain_error("ReplicateDataset: block " + std::to_string(i) +
                         " has no replicates");
    if (block.cols() != pp)
      throw domain_error("ReplicateDataset: block " + std::to_string(i) +
                         " has mismatched width");
    if (!block.allFinite())
      throw domain_error("ReplicateDataset: block " + std::to_string(i) +
                         " has non-finite entries");
  }
}

Eigen::MatrixXd ReplicateDataset::replicate_means() const {
  const Eigen::Index nn = n(), pp = p();
  Eigen::MatrixXd wbar(nn, pp);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const auto& block = replicates[size_t(i)];
    const Eigen::Index ri = block.rows();
    Eigen::RowVectorXd delta = Eigen::RowVectorXd::Zero(pp);
    for (Eigen::Index j = 1; j < ri; ++j) delta += block.row(j) - block.row(0);
    wbar.row(i) = block.row(0) + delta / double(ri);
  }
  return wbar;
}

void ReplicateDataset::shift_columns(const Eigen::RowVectorXd& mu) {
  if (mu.size() != p())
    throw domain_error("ReplicateDataset: shift width mismatch");
  for (auto& block : replicates) block.rowwise() -= mu;
}

PrecisionPair::PrecisionPair(const PrecisionPair& other)
    : omega_x(other.omega_x),
      omega_u(other.omega_u),
      omega_u_obs(other.omega_u_obs) {}

PrecisionPair& PrecisionPair::operator=(const PrecisionPair& other) {
  if (this != &other) {
    omega_x = other.omega_x;
    omega_u = other.omega_u;
    omega_u_obs = other.omega_u_obs;
    std::lock_guard<std::mutex> lock(mu_);
    cache_.clear();
    cache_hits_ = 0;
  }
  return *this;
}

void PrecisionPair::validate() const {
  check_positive_vector(omega_x, "PrecisionPair omega_x");
  check_positive_vector(omega_u, "PrecisionPair omega_u");
  if (omega_x.size() != omega_u.size())
    throw domain_error("PrecisionPair: omega_x/omega_u length mismatch");
  for (const auto& o : omega_u_obs) {
    check_positive_vector(o, "PrecisionPair omega_u override");
    if (o.size() != omega_x.size())
      throw domain_error("PrecisionPair: override length mismatch");
  }
}

bool PrecisionPair::has_override(Eigen::Index obs) const {
  return obs >= 0 && obs < Eigen::Index(omega_u_obs.size());
}

const Eigen::VectorXd& PrecisionPair::omega_u_for(Eigen::Index obs) const {
  if (has_override(obs)) return omega_u_obs[size_t(obs)];
  return omega_u;
}

const Eigen::VectorXd& PrecisionPair::posterior_diag(int r) const {
  if (r < 1) throw domain_error("PrecisionPair: replicate count must be >= 1");
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(r);
  if (it != cache_.end()) {
    ++cache_hits_;
    return it->second;
  }
  Eigen::VectorXd d = omega_x + double(r) * omega_u;
  return cache_.emplace(r, std::move(d)).first->second;
}

Eigen::VectorXd PrecisionPair::posterior_diag_for(Eigen::Index obs,
                                                  int r) const {
  if (!has_override(obs)) return posterior_diag(r);
  return omega_x + double(r) * omega_u_obs[size_t(obs)];
}

NoiseEstimate estimate_me_precision_diag(const ReplicateDataset& data) {
  data.validate();
  const Eigen::Index nn = data.n(), pp = data.p();
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(pp);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const auto& block = data.replicates[size_t(i)];
    const Eigen::Index ri = block.rows();
    if (ri < 2)
      throw degenerate_error(
          "estimate_me_precision_diag: needs >= 2 replicates per observation");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(pp);
    for (Eigen::Index j = 0; j < ri; ++j)
      for (Eigen::Index k = j + 1; k < ri; ++k)
        acc += (block.row(j) - block.row(k)).array().square().matrix();
    // Ordered-pair normalization r(r-1) folds in the factor 1/2 that turns a
    // squared difference into a noise variance.
    pooled += acc / double(ri * (ri - 1));
  }
  NoiseEstimate out;
  out.sigma_u = pooled / double(nn);
  for (Eigen::Index m = 0; m < pp; ++m)
    if (!(out.sigma_u[m] > 0.0))
      throw degenerate_error(
          "estimate_me_precision_diag: replicates identical in coordinate " +
          std::to_string(m));
  out.omega_u = out.sigma_u.cwiseInverse();
  return out;
}

std::vector<Eigen::VectorXd> estimate_me_precision_per_obs(
    const ReplicateDataset& data) {
  data.validate();
  const Eigen::Index nn = data.n(), pp = data.p();
  std::vector<Eigen::VectorXd> out(static_cast<size_t>(nn));
  for (Eigen::Index i = 0; i < nn; ++i) {
    const auto& block = data.replicates[size_t(i)];
    const Eigen::Index ri = block.rows();
    if (ri < 2)
      throw degenerate_error(
          "estimate_me_precision_per_obs: needs >= 2 replicates per "
          "observation");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(pp);
    for (Eigen::Index j = 0; j < ri; ++j)
      for (Eigen::Index k = j + 1; k < ri; ++k)
        acc += (block.row(j) - block.row(k)).array().square().matrix();
    acc /= double(ri * (ri - 1));
    for (Eigen::Index m = 0; m < pp; ++m)
      if (!(acc[m] > 0.0))
        throw degenerate_error(
            "estimate_me_precision_per_obs: observation " + std::to_string(i) +
            " has identical replicates in coordinate " + std::to_string(m));
    out[size_t(i)] = acc.cwiseInverse();
  }
  return out;
}

Eigen::VectorXd me_raw_signed_average(const ReplicateDataset& data) {
  data.validate();
  const Eigen::Index nn = data.n(), pp = data.p();
  Eigen::VectorXd pooled = Eigen::VectorXd::Zero(pp);
  for (Eigen::Index i = 0; i < nn; ++i) {
    const auto& block = data.replicates[size_t(i)];
    const Eigen::Index ri = block.rows();
    if (ri < 2)
      throw degenerate_error(
          "me_raw_signed_average: needs >= 2 replicates per observation");
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(pp);
    for (Eigen::Index j = 0; j < ri; ++j)
      for (Eigen::Index k = j + 1; k < ri; ++k)
        acc += (block.row(j) - block.row(k)).transpose() / M_SQRT2;
    pooled += acc / double(ri * (ri - 1));
  }
  return pooled / double(nn);
}

CovariatePrecisionEstimate estimate_omega_x_diag(const Eigen::MatrixXd& X) {
  if (X.rows() < 2)
    throw domain_error("estimate_omega_x_diag: need at least two rows");
  if (!X.allFinite())
    throw domain_error("estimate_omega_x_diag: non-finite entries");
  const Eigen::Index n = X.rows(), p = X.cols();
  CovariatePrecisionEstimate out;
  out.omega_x.resize(p);
  const Eigen::RowVectorXd mu = X.colwise().mean();
  for (Eigen::Index j = 0; j < p; ++j) {
    double var =
        (X.col(j).array() - mu[j]).square().sum() / double(n - 1);
    if (var < kVarianceFloor) {
      var = kVarianceFloor;
      out.floored.push_back(j);
    }
    out.omega_x[j] = 1.0 / var;
  }
  return out;
}

Eigen::VectorXd impute_x_covariate_only(const Eigen::VectorXd& wbar_i, int r_i,
                                        const PrecisionPair& prec,
                                        RngStream& rng, Eigen::Index obs) {
  prec.validate();
  if (wbar_i.size() != prec.omega_x.size())
    throw domain_error("impute_x_covariate_only: wbar length mismatch");
  if (r_i < 1)
    throw domain_error("impute_x_covariate_only: replicate count must be >= 1");
  if (!wbar_i.allFinite())
    throw domain_error("impute_x_covariate_only: non-finite replicate mean");
  const Eigen::VectorXd d = prec.posterior_diag_for(obs, r_i);
  const Eigen::VectorXd& ou = prec.omega_u_for(obs);
  const Eigen::Index p = wbar_i.size();
  const Eigen::VectorXd z = sample_std_normal_vec(p, rng);
  Eigen::VectorXd x(p);
  for (Eigen::Index m = 0; m < p; ++m) {
    const double mean = double(r_i) * ou[m] * wbar_i[m] / d[m];
    x[m] = mean + z[m] / std::sqrt(d[m]);
  }
  return x;
}

Eigen::VectorXd impute_x_gaussian(double y_i, const Eigen::VectorXd& wbar_i,
                                  int r_i, const PrecisionPair& prec,
                                  const Eigen::VectorXd& beta, double sigma2,
                                  RngStream& rng, Eigen::Index obs) {
  prec.validate();
  if (wbar_i.size() != prec.omega_x.size() || beta.size() != wbar_i.size())
    throw domain_error("impute_x_gaussian: length mismatch");
  if (r_i < 1)
    throw domain_error("impute_x_gaussian: replicate count must be >= 1");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw domain_error("impute_x_gaussian: sigma2 must be positive");
  if (!std::isfinite(y_i) || !wbar_i.allFinite() || !beta.allFinite())
    throw domain_error("impute_x_gaussian: non-finite inputs");
  DiagRank1Precision M;
  M.diag = prec.posterior_diag_for(obs, r_i);
  M.scale = 1.0 / sigma2;
  M.direction = beta;
  const Eigen::VectorXd& ou = prec.omega_u_for(obs);
  const Eigen::VectorXd h =
      double(r_i) * (ou.array() * wbar_i.array()).matrix() +
      (y_i / sigma2) * beta;
  return sample_gaussian_diag_rank1(M, h, rng);
}

double sample_pg_latent(const Eigen::VectorXd& x_i,
                        const Eigen::VectorXd& beta, double shape_b,
                        RngStream& rng, double offset) {
  if (x_i.size() != beta.size())
    throw domain_error("sample_pg_latent: length mismatch");
  if (!std::isfinite(offset))
    throw domain_error("sample_pg_latent: non-finite offset");
  return sample_pg(PgParams{shape_b, x_i.dot(beta) + offset}, rng);
}

namespace {

Eigen::VectorXd impute_x_logistic_core(double kappa, double z_i,
                                       const Eigen::VectorXd& wbar_i, int r_i,
                                       const PrecisionPair& prec,
                                       const Eigen::VectorXd& beta,
                                       RngStream& rng, double offset,
                                       Eigen::Index obs, const char* where) {
  prec.validate();
  if (wbar_i.size() != prec.omega_x.size() || beta.size() != wbar_i.size())
    throw domain_error(std::string(where) + ": length mismatch");
  if (r_i < 1)
    throw domain_error(std::string(where) + ": replicate count must be >= 1");
  if (!(z_i >= 0.0) || !std::isfinite(z_i))
    throw domain_error(std::string(where) +
                       ": latent scale must be finite and >= 0");
  if (!wbar_i.allFinite() || !beta.allFinite() || !std::isfinite(offset))
    throw domain_error(std::string(where) + ": non-finite inputs");
  DiagRank1Precision M;
  M.diag = prec.posterior_diag_for(obs, r_i);
  M.scale = z_i;
  M.direction = beta;
  const Eigen::VectorXd& ou = prec.omega_u_for(obs);
  const Eigen::VectorXd h =
      (kappa - z_i * offset) * beta +
      double(r_i) * (ou.array() * wbar_i.array()).matrix();
  return sample_gaussian_diag_rank1(M, h, rng);
}

}  // namespace

Eigen::VectorXd impute_x_binomial(double y_i, double z_i,
                                  const Eigen::VectorXd& wbar_i, int r_i,
                                  const PrecisionPair& prec,
                                  const Eigen::VectorXd& beta, RngStream& rng,
                                  double offset, Eigen::Index obs) {
  if (y_i != 0.0 && y_i != 1.0)
    throw domain_error("impute_x_binomial: response must be 0/1");
  return impute_x_logistic_core(y_i - 0.5, z_i, wbar_i, r_i, prec, beta, rng,
                                offset, obs, "impute_x_binomial");
}

Eigen::VectorXd impute_x_negbin(double y_i, int m_i, double z_i,
                                const Eigen::VectorXd& wbar_i, int r_i,
                                const PrecisionPair& prec,
                                const Eigen::VectorXd& beta, RngStream& rng,
                                CountKappa kappa, double offset,
                                Eigen::Index obs) {
  if (y_i < 0.0 || y_i != std::floor(y_i))
    throw domain_error("impute_x_negbin: response must be a nonnegative integer");
  if (m_i < 1) throw domain_error("impute_x_negbin: shape count must be >= 1");
  const double k = kappa == CountKappa::shape_half ? y_i - 0.5 * double(m_i)
                                                   : y_i - 0.5;
  return impute_x_logistic_core(k, z_i, wbar_i, r_i, prec, beta, rng, offset,
                                obs, "impute_x_negbin");
}

}  // namespace eivglm
