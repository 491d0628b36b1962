#include "eivglm/sim.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>

#include "eivglm/parallel.hpp"

namespace eivglm {

namespace {

// Stream-id domains for the harness (disjoint from the engine's internal
// domains under the per-instance derived seed).
constexpr unsigned kDomainGenerate = 4;
constexpr unsigned kDomainArmFolds = 5;
constexpr unsigned kDomainEngineSeed = 6;

constexpr double kExactNoisePrecision = 1e8;  // stands in for "noise-free"

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

}  // namespace

std::string setting_name(SimSetting s) {
  switch (s) {
    case SimSetting::G1: return "G1";
    case SimSetting::G2: return "G2";
    case SimSetting::G3: return "G3";
    case SimSetting::B1: return "B1";
    case SimSetting::B2: return "B2";
  }
  return "?";
}

std::optional<SimSetting> parse_setting(const std::string& name) {
  if (name == "G1") return SimSetting::G1;
  if (name == "G2") return SimSetting::G2;
  if (name == "G3") return SimSetting::G3;
  if (name == "B1") return SimSetting::B1;
  if (name == "B2") return SimSetting::B2;
  return std::nullopt;
}

void SimulationSpec::validate() const {
  if (n < 2) throw domain_error("simulation: n must be >= 2");
  if (p < 10)
    throw domain_error("simulation: p must be >= 10 (ten active coefficients)");
  if (!std::isfinite(gamma) || gamma < 0.0)
    throw domain_error("simulation: gamma must be finite and >= 0");
  if (replicates < 1) throw domain_error("simulation: replicates must be >= 1");
  if (gamma > 0.0 && replicates < 2)
    throw domain_error(
        "simulation: gamma > 0 needs at least two replicates to identify the "
        "noise");
  if (n_monte_carlo < 1)
    throw domain_error("simulation: instances must be >= 1");
  if (iterations < 1) throw domain_error("simulation: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations)
    throw domain_error("simulation: burn-in must be in [0, iterations)");
  if (folds < 2) throw domain_error("simulation: folds must be >= 2");
  if (tune_every < 1) throw domain_error("simulation: tune-every must be >= 1");
  if (grid_length < 1)
    throw domain_error("simulation: grid length must be >= 1");
  if (grid_min_ratio < 0.0 || grid_min_ratio > 1.0)
    throw domain_error("simulation: grid ratio must be in [0, 1]");
  if (penalty == Penalty::mcp && !(mcp_gamma > 1.0))
    throw domain_error("simulation: mcp concavity must exceed 1");
  if (aggregation == Aggregation::trimmed &&
      (trim_alpha < 0.0 || trim_alpha >= 0.5))
    throw domain_error("simulation: trim fraction must be in [0, 0.5)");
  if (!(band_magnitude >= 0.0))
    throw domain_error("simulation: band magnitude must be >= 0");
  if (!(zero_tol >= 0.0))
    throw domain_error("simulation: zero tolerance must be >= 0");
  if (threads < 0) throw domain_error("simulation: threads must be >= 0");
}

Family SimulationSpec::family() const {
  switch (setting) {
    case SimSetting::B1:
    case SimSetting::B2:
      return Family::binomial;
    default:
      return Family::gaussian;
  }
}

double SimulationSpec::noise_variance() const {
  switch (setting) {
    case SimSetting::G1: return 1.0;
    case SimSetting::G2: return 3.0;
    case SimSetting::G3: return 1.0;
    default: return std::numeric_limits<double>::quiet_NaN();
  }
}

bool SimulationSpec::banded() const {
  return setting == SimSetting::G3 || setting == SimSetting::B2;
}

double SimulationSpec::resolved_grid_ratio() const {
  if (grid_min_ratio > 0.0) return grid_min_ratio;
  return family() == Family::gaussian ? 1e-3 : 1e-2;
}

Eigen::VectorXd true_beta(SimSetting setting, Eigen::Index p) {
  if (p < 10) throw domain_error("true_beta: p must be >= 10");
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  switch (setting) {
    case SimSetting::G1:
    case SimSetting::B1:
      for (Eigen::Index j = 0; j < 10; ++j) beta[j] = 1.0 / double(j + 1);
      break;
    default:
      for (Eigen::Index j = 0; j < 5; ++j) beta[j] = 1.0;
      for (Eigen::Index j = 5; j < 10; ++j) beta[j] = -1.0;
      break;
  }
  return beta;
}

BandPrecision gen_band_precision(Eigen::Index p, double magnitude) {
  if (p < 1) throw domain_error("gen_band_precision: p must be >= 1");
  if (!(magnitude >= 0.0))
    throw domain_error("gen_band_precision: magnitude must be >= 0");
  Eigen::MatrixXd omega0 = Eigen::MatrixXd::Identity(p, p);
  for (Eigen::Index j = 0; j + 1 < p; ++j) {
    omega0(j, j + 1) = -magnitude;
    omega0(j + 1, j) = -magnitude;
  }
  Eigen::LLT<Eigen::MatrixXd> llt0(omega0);
  if (llt0.info() != Eigen::Success)
    throw domain_error(
        "gen_band_precision: precision is not positive definite; use a "
        "smaller off-diagonal magnitude");
  Eigen::MatrixXd sigma0 =
      llt0.solve(Eigen::MatrixXd::Identity(p, p));
  // Rescale so the covariance has unit diagonal; the precision transforms
  // inversely under the same diagonal congruence.
  const Eigen::VectorXd d = sigma0.diagonal();
  const Eigen::VectorXd inv_sqrt = d.array().sqrt().inverse().matrix();
  const Eigen::VectorXd sqrt_d = d.array().sqrt().matrix();
  BandPrecision out;
  out.sigma = inv_sqrt.asDiagonal() * sigma0 * inv_sqrt.asDiagonal();
  out.sigma = 0.5 * (out.sigma + out.sigma.transpose()).eval();
  out.omega = sqrt_d.asDiagonal() * omega0 * sqrt_d.asDiagonal();
  Eigen::LLT<Eigen::MatrixXd> llt(out.sigma);
  if (llt.info() != Eigen::Success)
    throw domain_error("gen_band_precision: covariance factorization failed");
  out.chol_lower = llt.matrixL();
  return out;
}

SimDataset gen_dataset(const SimulationSpec& spec, RngStream& rng) {
  spec.validate();
  const Eigen::Index n = spec.n, p = spec.p;
  SimDataset out;
  out.beta_true = true_beta(spec.setting, p);

  BandPrecision band;
  Eigen::VectorXd sigma_diag = Eigen::VectorXd::Ones(p);
  if (spec.banded()) {
    band = gen_band_precision(p, spec.band_magnitude);
    sigma_diag = band.sigma.diagonal();
  }

  out.x_true.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd z = sample_std_normal_vec(p, rng);
    if (spec.banded())
      out.x_true.row(i) = (band.chol_lower * z).transpose();
    else
      out.x_true.row(i) = z.transpose();
  }

  out.data.y.resize(n);
  if (spec.family() == Family::gaussian) {
    const double sd = std::sqrt(spec.noise_variance());
    for (Eigen::Index i = 0; i < n; ++i)
      out.data.y[i] = out.x_true.row(i).dot(out.beta_true) + sd * rng.normal();
  } else {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double pi = logistic(out.x_true.row(i).dot(out.beta_true));
      out.data.y[i] = rng.uniform() < pi ? 1.0 : 0.0;
    }
  }

  out.sigma_u = spec.gamma * sigma_diag;
  const Eigen::VectorXd u_sd = out.sigma_u.array().sqrt().matrix();
  out.data.replicates.resize(size_t(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::MatrixXd block(spec.replicates, p);
    for (int j = 0; j < spec.replicates; ++j) {
      if (spec.gamma == 0.0) {
        block.row(j) = out.x_true.row(i);
      } else {
        const Eigen::VectorXd z = sample_std_normal_vec(p, rng);
        block.row(j) =
            out.x_true.row(i) + (u_sd.array() * z.array()).matrix().transpose();
      }
    }
    out.data.replicates[size_t(i)] = std::move(block);
  }
  return out;
}

Metrics compute_metrics(const Eigen::VectorXd& beta_hat,
                        const Eigen::VectorXd& beta_true, double zero_tol) {
  if (beta_hat.size() != beta_true.size())
    throw domain_error("compute_metrics: coefficient length mismatch");
  Metrics m;
  m.l2 = (beta_hat - beta_true).squaredNorm();
  for (Eigen::Index j = 0; j < beta_true.size(); ++j) {
    const bool selected = std::abs(beta_hat[j]) > zero_tol;
    if (beta_true[j] != 0.0)
      m.tp += selected ? 1.0 : 0.0;
    else
      m.fp += selected ? 1.0 : 0.0;
  }
  return m;
}

int ArmResult::n_success() const {
  int k = 0;
  for (int s : success) k += s;
  return k;
}

Metrics ArmResult::mean() const {
  Metrics acc;
  const int k = n_success();
  if (k == 0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return Metrics{nan, nan, nan};
  }
  for (std::size_t i = 0; i < success.size(); ++i) {
    if (!success[i]) continue;
    acc.l2 += metrics[i].l2;
    acc.tp += metrics[i].tp;
    acc.fp += metrics[i].fp;
  }
  acc.l2 /= double(k);
  acc.tp /= double(k);
  acc.fp /= double(k);
  return acc;
}

namespace {

void resize_arm(ArmResult& arm, int k) {
  arm.success.assign(size_t(k), 0);
  arm.metrics.assign(size_t(k), Metrics{});
  arm.errors.assign(size_t(k), std::string());
}

void record_arm(ArmResult& arm, std::int64_t k,
                const std::function<Eigen::VectorXd()>& estimate,
                const Eigen::VectorXd& beta_true, double zero_tol) {
  try {
    arm.metrics[size_t(k)] = compute_metrics(estimate(), beta_true, zero_tol);
    arm.success[size_t(k)] = 1;
  } catch (const error& e) {
    arm.errors[size_t(k)] = e.what();
  }
}

}  // namespace

ExperimentResult run_experiment(const SimulationSpec& spec) {
  spec.validate();
  ExperimentResult out;
  out.spec = spec;
  const int K = spec.n_monte_carlo;
  resize_arm(out.ideal, K);
  resize_arm(out.naive, K);
  resize_arm(out.iro, K);

  const int threads = resolve_threads(spec.threads);
  const FamilySpec fam{spec.family(), Eigen::VectorXi()};
  FitOptions opts;

  parallel_for(K, threads, [&](std::int64_t k) {
    RngStream gen(spec.seed,
                  compose_stream(kDomainGenerate, std::uint64_t(k), 0));
    const SimDataset ds = gen_dataset(spec, gen);
    const Eigen::MatrixXd wbar = ds.data.replicate_means();

    // Ideal and naive share the fold stream so they coincide exactly when the
    // replicates are noise-free.
    auto plain_fit = [&](const Eigen::MatrixXd& X) -> Eigen::VectorXd {
      if (spec.penalty == Penalty::scaled_lasso) {
        const double l0 =
            std::sqrt(2.0 * std::log(double(spec.p)) / double(spec.n));
        return scaled_lasso(X, ds.data.y, l0, opts).beta;
      }
      const Eigen::VectorXd grid =
          lambda_grid(X, ds.data.y, fam, spec.grid_length,
                      spec.resolved_grid_ratio(), opts);
      RngStream fold_rng(
          spec.seed, compose_stream(kDomainArmFolds, std::uint64_t(k), 0));
      return cross_validate(X, ds.data.y, fam, spec.penalty, spec.mcp_gamma,
                            spec.folds, grid, fold_rng, opts, 1)
          .fit.beta;
    };

    record_arm(out.ideal, k, [&] { return plain_fit(ds.x_true); },
               ds.beta_true, spec.zero_tol);
    record_arm(out.naive, k, [&] { return plain_fit(wbar); }, ds.beta_true,
               spec.zero_tol);
    record_arm(
        out.iro, k,
        [&] {
          IroConfig cfg;
          cfg.iterations = spec.iterations;
          cfg.burn_in = spec.burn_in;
          cfg.family = spec.family();
          cfg.penalty = spec.penalty;
          cfg.mcp_gamma = spec.mcp_gamma;
          cfg.tune_every = spec.tune_every;
          cfg.folds = spec.folds;
          cfg.grid_length = spec.grid_length;
          cfg.grid_min_ratio = spec.grid_min_ratio;
          cfg.aggregation = spec.aggregation;
          cfg.trim_alpha = spec.trim_alpha;
          cfg.seed = derive_seed(spec.seed, kDomainEngineSeed,
                                 std::uint64_t(k), 0);
          cfg.threads = 1;
          std::optional<Eigen::VectorXd> omega_u;
          if (spec.gamma == 0.0)
            omega_u = Eigen::VectorXd::Constant(spec.p, kExactNoisePrecision);
          return run_iro(ds.data, omega_u, cfg).beta_hat;
        },
        ds.beta_true, spec.zero_tol);
  });
  return out;
}

}  // namespace eivglm
