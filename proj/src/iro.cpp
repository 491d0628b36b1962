#include "eivglm/iro.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "eivglm/parallel.hpp"

namespace eivglm {

namespace {

// Stream-id domains (see compose_stream).
constexpr unsigned kDomainImpute = 1;
constexpr unsigned kDomainFolds = 2;

constexpr double kSigma2Floor = 1e-10;

double default_lambda0(Eigen::Index n, Eigen::Index p) {
  return std::sqrt(2.0 * std::log(double(p)) / double(n));
}

FamilySpec family_of(const IroConfig& cfg) {
  FamilySpec fam;
  fam.family = cfg.family;
  fam.trials = cfg.trials;
  return fam;
}

// One penalized refit on the current imputed covariates.  Re-tunes the
// penalty level by cross-validation on tuning rounds, otherwise refits at the
// last tuned level warm-started from the current coefficients.
FitResult refit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                const IroConfig& cfg, int round, double& lambda_star,
                const FitResult* warm) {
  const FamilySpec fam = family_of(cfg);
  if (cfg.penalty == Penalty::scaled_lasso) {
    const double l0 = cfg.scaled_lasso_lambda0 > 0.0
                          ? cfg.scaled_lasso_lambda0
                          : default_lambda0(X.rows(), X.cols());
    FitResult fit = scaled_lasso(X, y, l0, cfg.fit);
    lambda_star = fit.lambda;
    return fit;
  }
  const bool tune = round <= 0 || (round - 1) % cfg.tune_every == 0 ||
                    !(lambda_star > 0.0);
  if (tune) {
    const Eigen::VectorXd grid = lambda_grid(X, y, fam, cfg.grid_length,
                                             cfg.resolved_grid_ratio(), cfg.fit);
    RngStream fold_rng(cfg.seed,
                       compose_stream(kDomainFolds, std::uint64_t(
                                          round < 0 ? 0 : round), 0));
    CvResult cv = cross_validate(X, y, fam, cfg.penalty, cfg.mcp_gamma,
                                 cfg.folds, grid, fold_rng, cfg.fit,
                                 cfg.threads);
    lambda_star = cv.lambda_star;
    return cv.fit;
  }
  PenaltySpec pen{cfg.penalty, lambda_star, cfg.mcp_gamma};
  return fit_penalized(X, y, fam, pen, cfg.fit, warm);
}

// Gaussian rounds need a positive residual variance for the imputation pull.
double resolve_sigma2(const FitResult& fit, int round,
                      const std::vector<IroIterate>& retained) {
  if (!fit.sigma2.has_value())
    throw iro_abort_error(
        "round " + std::to_string(round) +
            ": residual variance undefined (support size reached n)",
        round, retained);
  return std::max(*fit.sigma2, kSigma2Floor);
}

}  // namespace

void IroConfig::validate() const {
  if (iterations < 1) throw domain_error("IroConfig: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations)
    throw domain_error("IroConfig: burn_in must be in [0, iterations)");
  if (tune_every < 1) throw domain_error("IroConfig: tune_every must be >= 1");
  if (folds < 2) throw domain_error("IroConfig: folds must be >= 2");
  if (grid_length < 1) throw domain_error("IroConfig: grid_length must be >= 1");
  if (grid_min_ratio < 0.0 || grid_min_ratio > 1.0)
    throw domain_error("IroConfig: grid_min_ratio must be in [0, 1]");
  if (penalty == Penalty::mcp && !(mcp_gamma > 1.0))
    throw domain_error("IroConfig: mcp concavity must exceed 1");
  if (aggregation == Aggregation::trimmed &&
      (trim_alpha < 0.0 || trim_alpha >= 0.5))
    throw domain_error("IroConfig: trim fraction must be in [0, 0.5)");
  if (threads < 0) throw domain_error("IroConfig: threads must be >= 0");
}

double IroConfig::resolved_grid_ratio() const {
  if (grid_min_ratio > 0.0) return grid_min_ratio;
  return family == Family::gaussian ? 1e-3 : 1e-2;
}

IroState initialize_state(const ReplicateDataset& data,
                          const std::optional<Eigen::VectorXd>& omega_u_diag,
                          const IroConfig& cfg) {
  data.validate();
  cfg.validate();
  const Eigen::Index n = data.n(), p = data.p();
  FamilySpec fam = family_of(cfg);
  fam.validate(n);

  IroState st;
  if (omega_u_diag.has_value()) {
    if (omega_u_diag->size() != p)
      throw domain_error("run_iro: omega_u length mismatch");
    if (!omega_u_diag->allFinite() || (omega_u_diag->array() <= 0.0).any())
      throw domain_error("run_iro: omega_u entries must be positive");
    st.omega_u = *omega_u_diag;
    st.omega_u_estimated = false;
  } else {
    st.omega_u = estimate_me_precision_diag(data).omega_u;
    st.omega_u_estimated = true;
  }

  // Work on covariates shifted to mean zero; the shift is reported so
  // predictions can undo it.
  ReplicateDataset centered = data;
  Eigen::MatrixXd wbar = centered.replicate_means();
  st.column_means = wbar.colwise().mean();
  centered.shift_columns(st.column_means);
  wbar.rowwise() -= st.column_means;

  double lambda_star = 0.0;
  FitResult fit = refit(wbar, centered.y, cfg, /*round=*/0, lambda_star, nullptr);
  st.beta = fit.beta;
  st.intercept = fit.intercept;
  st.lambda = lambda_star;
  if (cfg.family == Family::gaussian)
    st.sigma2 = resolve_sigma2(fit, 0, {});
  st.omega_x = estimate_omega_x_diag(wbar).omega_x;
  st.x_current = wbar;
  st.next_iteration = 1;
  return st;
}

IroState advance_iro(const ReplicateDataset& data, const IroConfig& cfg,
                     IroState st, int rounds) {
  data.validate();
  cfg.validate();
  const Eigen::Index n = data.n(), p = data.p();
  if (st.beta.size() != p || st.omega_x.size() != p || st.omega_u.size() != p ||
      st.x_current.rows() != n || st.x_current.cols() != p ||
      st.column_means.size() != p)
    throw domain_error("advance_iro: state shape mismatch");
  if (st.next_iteration < 1 || st.next_iteration > cfg.iterations + 1)
    throw domain_error("advance_iro: round index out of range");
  FamilySpec fam = family_of(cfg);
  fam.validate(n);

  ReplicateDataset centered = data;
  centered.shift_columns(st.column_means);
  Eigen::MatrixXd wbar = centered.replicate_means();
  const Eigen::VectorXd& y = centered.y;

  const int threads = resolve_threads(cfg.threads);
  Eigen::MatrixXd x_next(n, p);

  const int last = rounds <= 0
                       ? cfg.iterations
                       : std::min(cfg.iterations, st.next_iteration + rounds - 1);
  for (int t = st.next_iteration; t <= last; ++t) {
    try {
      PrecisionPair prec(st.omega_x, st.omega_u);
      prec.validate();
      // Prime the shared posterior-diagonal cache before the parallel region.
      for (Eigen::Index i = 0; i < n; ++i) prec.posterior_diag(centered.r(i));

      const Eigen::VectorXd beta = st.beta;
      const double intercept = st.intercept;
      const double sigma2 = st.sigma2;
      parallel_for(n, threads, [&](std::int64_t i) {
        RngStream rng(cfg.seed,
                      compose_stream(kDomainImpute, std::uint64_t(t),
                                     std::uint64_t(i)));
        const Eigen::VectorXd wb = wbar.row(i).transpose();
        const int ri = centered.r(i);
        switch (cfg.family) {
          case Family::gaussian:
            x_next.row(i) = impute_x_gaussian(y[i] - intercept, wb, ri, prec,
                                              beta, sigma2, rng)
                                .transpose();
            break;
          case Family::binomial: {
            const Eigen::VectorXd xi = st.x_current.row(i).transpose();
            const double z = sample_pg_latent(xi, beta, 1.0, rng, intercept);
            x_next.row(i) = impute_x_binomial(y[i], z, wb, ri, prec, beta, rng,
                                              intercept)
                                .transpose();
            break;
          }
          case Family::negbin: {
            const Eigen::VectorXd xi = st.x_current.row(i).transpose();
            const double mi = double(cfg.trials[i]);
            const double z = sample_pg_latent(xi, beta, mi, rng, intercept);
            x_next.row(i) =
                impute_x_negbin(y[i], cfg.trials[i], z, wb, ri, prec, beta,
                                rng, cfg.count_kappa, intercept)
                    .transpose();
            break;
          }
        }
      });
      st.x_current = x_next;
      st.omega_x = estimate_omega_x_diag(st.x_current).omega_x;

      FitResult warm;
      warm.beta = st.beta;
      warm.intercept = st.intercept;
      double lambda_star = st.lambda;
      const FitResult fit =
          refit(st.x_current, y, cfg, t, lambda_star, &warm);
      st.beta = fit.beta;
      st.intercept = fit.intercept;
      st.lambda = lambda_star;
      if (cfg.family == Family::gaussian)
        st.sigma2 = resolve_sigma2(fit, t, st.retained);

      if (t > cfg.burn_in) {
        IroIterate it;
        it.beta = st.beta;
        it.intercept = st.intercept;
        it.lambda = fit.lambda;
        it.sigma2 = cfg.family == Family::gaussian
                        ? st.sigma2
                        : std::numeric_limits<double>::quiet_NaN();
        it.nonzero = fit.nonzero_count;
        st.retained.push_back(std::move(it));
      }
    } catch (const iro_abort_error&) {
      throw;
    } catch (const error& e) {
      throw iro_abort_error("round " + std::to_string(t) + ": " + e.what(), t,
                            st.retained);
    }
    st.next_iteration = t + 1;
  }
  return st;
}

IroResult finalize_iro(const IroConfig& cfg, const IroState& st) {
  cfg.validate();
  if (st.next_iteration != cfg.iterations + 1)
    throw domain_error("finalize_iro: chain has unfinished rounds");

  IroResult out;
  out.trace = st.retained;
  const Eigen::MatrixXd betas = trace_beta_matrix(out.trace);
  out.beta_hat = aggregate_coefficients(betas, cfg.aggregation, cfg.trim_alpha);
  Eigen::MatrixXd intercepts(Eigen::Index(out.trace.size()), 1);
  for (std::size_t k = 0; k < out.trace.size(); ++k)
    intercepts(Eigen::Index(k), 0) = out.trace[k].intercept;
  out.intercept_hat =
      aggregate_coefficients(intercepts, cfg.aggregation, cfg.trim_alpha)[0];
  out.sigma2_final = st.sigma2;
  out.omega_x_final = st.omega_x;
  out.omega_u = st.omega_u;
  out.omega_u_estimated = st.omega_u_estimated;
  out.column_means = st.column_means;
  if (betas.rows() >= 4) out.diagnostics = split_chain_diagnostic(betas);
  return out;
}

IroResult run_iro_from_state(const ReplicateDataset& data,
                             const IroConfig& cfg, IroState st) {
  st = advance_iro(data, cfg, std::move(st), 0);
  return finalize_iro(cfg, st);
}

IroResult run_iro(const ReplicateDataset& data,
                  const std::optional<Eigen::VectorXd>& omega_u_diag,
                  const IroConfig& cfg) {
  return run_iro_from_state(data, cfg, initialize_state(data, omega_u_diag, cfg));
}

Eigen::VectorXd aggregate_coefficients(const Eigen::MatrixXd& draws,
                                       Aggregation method, double trim_alpha) {
  const Eigen::Index k = draws.rows(), p = draws.cols();
  if (k < 1) throw domain_error("aggregate_coefficients: no draws");
  if (method == Aggregation::mean) return draws.colwise().mean();
  if (method == Aggregation::trimmed &&
      (trim_alpha < 0.0 || trim_alpha >= 0.5))
    throw domain_error("aggregate_coefficients: trim fraction out of range");

  Eigen::VectorXd out(p);
  std::vector<double> col(static_cast<size_t>(k));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) col[size_t(i)] = draws(i, j);
    std::sort(col.begin(), col.end());
    if (method == Aggregation::median) {
      out[j] = k % 2 == 1 ? col[size_t(k / 2)]
                          : 0.5 * (col[size_t(k / 2 - 1)] + col[size_t(k / 2)]);
    } else {  // trimmed
      const Eigen::Index drop = Eigen::Index(std::floor(trim_alpha * double(k)));
      if (k - 2 * drop < 1)
        throw domain_error("aggregate_coefficients: trimming removed all draws");
      double acc = 0.0;
      for (Eigen::Index i = drop; i < k - drop; ++i) acc += col[size_t(i)];
      out[j] = acc / double(k - 2 * drop);
    }
  }
  return out;
}

IroDiagnostics split_chain_diagnostic(const Eigen::MatrixXd& draws) {
  const Eigen::Index k = draws.rows(), p = draws.cols();
  if (k < 4)
    throw domain_error("split_chain_diagnostic: need at least four rows");
  const Eigen::Index h = k / 2;  // odd k drops the middle row
  IroDiagnostics out;
  out.computed = true;
  out.rhat.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const auto first = draws.col(j).head(h);
    const auto second = draws.col(j).tail(h);
    const double m1 = first.mean(), m2 = second.mean();
    const double s1 = (first.array() - m1).square().sum() / double(h - 1);
    const double s2 = (second.array() - m2).square().sum() / double(h - 1);
    const double w = 0.5 * (s1 + s2);
    const double b_over_n = 0.5 * (m1 - m2) * (m1 - m2);
    if (w == 0.0) {
      out.rhat[j] = b_over_n == 0.0
                        ? 1.0
                        : std::numeric_limits<double>::infinity();
      out.degenerate.push_back(j);
      continue;
    }
    const double var_hat = double(h - 1) / double(h) * w + b_over_n;
    out.rhat[j] = std::sqrt(var_hat / w);
  }
  return out;
}

Eigen::MatrixXd trace_beta_matrix(const std::vector<IroIterate>& trace) {
  if (trace.empty()) throw domain_error("trace_beta_matrix: empty trace");
  const Eigen::Index k = Eigen::Index(trace.size());
  const Eigen::Index p = trace.front().beta.size();
  Eigen::MatrixXd out(k, p);
  for (Eigen::Index i = 0; i < k; ++i) {
    if (trace[size_t(i)].beta.size() != p)
      throw domain_error("trace_beta_matrix: ragged trace");
    out.row(i) = trace[size_t(i)].beta.transpose();
  }
  return out;
}

}  // namespace eivglm
