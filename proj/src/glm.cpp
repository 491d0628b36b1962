#include "eivglm/glm.hpp"

#include <cstdio>
#include <cstdlib>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "eivglm/parallel.hpp"
#include "eivglm/polya_gamma.hpp"

namespace eivglm {

namespace {

constexpr double kDegenerateColumn = 1e-12;

double log1pexp(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

void check_matrix(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const char* where) {
  if (X.rows() != y.size())
    throw domain_error(std::string(where) + ": X rows != y length");
  if (X.rows() < 2) throw domain_error(std::string(where) + ": need n >= 2");
  if (X.cols() < 1) throw domain_error(std::string(where) + ": need p >= 1");
  if (!X.allFinite() || !y.allFinite())
    throw domain_error(std::string(where) + ": non-finite inputs");
}

// Internal standardized view of the design.
struct Std {
  Eigen::MatrixXd X;        // (x - mean) / scale per column
  Eigen::RowVectorXd mean;  // column shifts applied
  Eigen::RowVectorXd scale; // column divisors applied (1 where degenerate)
  double ybar = 0.0;        // response shift (gaussian with centering)
  Eigen::VectorXd yc;       // shifted response
};

Std standardize(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                const FamilySpec& family, const FitOptions& opts) {
  const Eigen::Index n = X.rows(), p = X.cols();
  Std s;
  s.mean = opts.center ? X.colwise().mean()
                       : Eigen::RowVectorXd::Zero(p).eval();
  s.X = X.rowwise() - s.mean;
  s.scale.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double sc = 1.0;
    if (opts.standardize) {
      sc = std::sqrt(s.X.col(j).squaredNorm() / double(n));
      if (sc < kDegenerateColumn) sc = 1.0;  // constant column, stays zero
    }
    s.scale[j] = sc;
    if (sc != 1.0) s.X.col(j) /= sc;
  }
  if (family.family == Family::gaussian && opts.center) {
    s.ybar = y.mean();
    s.yc = y.array() - s.ybar;
  } else {
    s.ybar = 0.0;
    s.yc = y;
  }
  return s;
}

// Exact minimizer of (v/2) b^2 - z b + pen(b) where pen is the lasso or the
// curvature-rescaled concave penalty (concavity gamma applied relative to the
// local curvature v, so the update stays well defined for any v > 0).
double coordinate_update(double z, const PenaltySpec& pen, double v) {
  if (pen.kind == Penalty::lasso)
    return soft_threshold(z, pen.lambda) / v;
  // mcp
  if (std::fabs(z) <= pen.mcp_gamma * pen.lambda)
    return soft_threshold(z, pen.lambda) / (v * (1.0 - 1.0 / pen.mcp_gamma));
  return z / v;
}

double penalty_value(const Eigen::VectorXd& beta, const PenaltySpec& pen) {
  if (pen.kind == Penalty::lasso) return pen.lambda * beta.lpNorm<1>();
  double total = 0.0;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    total += mcp_value(beta[j], pen.lambda, pen.mcp_gamma);
  return total;
}

// Cyclic coordinate descent on the standardized gaussian problem.
// r must equal yc - Xs beta on entry and is kept consistent.
int cd_gaussian(const Eigen::MatrixXd& Xs, Eigen::VectorXd& r,
                Eigen::VectorXd& beta, const PenaltySpec& pen,
                const FitOptions& opts, const Eigen::VectorXd& v,
                std::vector<double>* obj_path) {
  const Eigen::Index n = Xs.rows(), p = Xs.cols();
  // Cycle over the ever-active set between full sweeps; convergence is only
  // declared after a full sweep moves no coordinate by more than tol, so the
  // stopping rule matches plain cyclic descent.
  std::vector<char> active(static_cast<size_t>(p), 0);
  for (Eigen::Index j = 0; j < p; ++j)
    if (beta[j] != 0.0) active[static_cast<size_t>(j)] = 1;
  bool full_pass = true;
  int sweeps = 0;
  while (sweeps < opts.max_sweeps) {
    ++sweeps;
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!full_pass && !active[static_cast<size_t>(j)]) continue;
      if (v[j] < kDegenerateColumn) continue;
      const double z = Xs.col(j).dot(r) / double(n) + v[j] * beta[j];
      const double bnew = coordinate_update(z, pen, v[j]);
      const double d = bnew - beta[j];
      if (d != 0.0) {
        r.noalias() -= d * Xs.col(j);
        beta[j] = bnew;
        max_delta = std::max(max_delta, std::fabs(d));
      }
      if (beta[j] != 0.0) active[static_cast<size_t>(j)] = 1;
    }
    if (obj_path)
      obj_path->push_back(0.5 * r.squaredNorm() / double(n) +
                          penalty_value(beta, pen));
    if (max_delta < opts.tol) {
      if (full_pass) break;
      full_pass = true;  // settled on the active set; verify with a full sweep
    } else {
      full_pass = false;
    }
  }
  return sweeps;
}

// One pass of weighted penalized coordinate descent with an unpenalized
// intercept.  r must equal u - b0 - Xs beta where u is the working response.
int cd_weighted(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& w,
                double wsum, Eigen::VectorXd& r, Eigen::VectorXd& beta,
                double& b0, const PenaltySpec& pen, const FitOptions& opts,
                const Eigen::VectorXd& v) {
  const Eigen::Index n = Xs.rows(), p = Xs.cols();
  std::vector<char> active(static_cast<size_t>(p), 0);
  for (Eigen::Index j = 0; j < p; ++j)
    if (beta[j] != 0.0) active[static_cast<size_t>(j)] = 1;
  bool full_pass = true;
  int sweeps = 0;
  while (sweeps < opts.max_sweeps) {
    ++sweeps;
    double max_delta = 0.0;
    const double d0 = (w.array() * r.array()).sum() / wsum;
    if (d0 != 0.0) {
      b0 += d0;
      r.array() -= d0;
      max_delta = std::fabs(d0);
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!full_pass && !active[static_cast<size_t>(j)]) continue;
      if (v[j] < kDegenerateColumn) continue;
      const double z =
          (Xs.col(j).array() * w.array() * r.array()).sum() / double(n) +
          v[j] * beta[j];
      const double bnew = coordinate_update(z, pen, v[j]);
      const double d = bnew - beta[j];
      if (d != 0.0) {
        r.noalias() -= d * Xs.col(j);
        beta[j] = bnew;
        max_delta = std::max(max_delta, std::fabs(d));
      }
      if (beta[j] != 0.0) active[static_cast<size_t>(j)] = 1;
    }
    if (max_delta < opts.tol) {
      if (full_pass) break;
      full_pass = true;  // settled on the active set; verify with a full sweep
    } else {
      full_pass = false;
    }
  }
  return sweeps;
}

int count_nonzero(const Eigen::VectorXd& beta) {
  int q = 0;
  for (Eigen::Index j = 0; j < beta.size(); ++j)
    if (beta[j] != 0.0) ++q;
  return q;
}

FitResult finish_gaussian(const Std& s, const Eigen::VectorXd& beta_int,
                          const Eigen::VectorXd& r, const PenaltySpec& pen,
                          int sweeps, std::vector<double> obj_path) {
  const Eigen::Index n = s.X.rows(), p = s.X.cols();
  FitResult out;
  out.beta = (beta_int.array() / s.scale.transpose().array()).matrix();
  out.intercept = s.ybar - out.beta.dot(s.mean.transpose());
  out.nonzero_count = count_nonzero(beta_int);
  out.lambda = pen.lambda;
  out.objective =
      0.5 * r.squaredNorm() / double(n) + penalty_value(beta_int, pen);
  out.sweeps = sweeps;
  out.objective_path = std::move(obj_path);
  if (out.nonzero_count < n)
    out.sigma2 = r.squaredNorm() / double(n - out.nonzero_count);
  (void)p;
  return out;
}

double negloglik(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                 const FamilySpec& family) {
  double nll = 0.0;
  const bool counts = family.family == Family::negbin;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double m = counts ? double(family.trials[i]) : 1.0;
    nll += m * log1pexp(eta[i]) - y[i] * eta[i];
  }
  return nll;
}

// Iteratively reweighted penalized least squares for the logistic families.
FitResult fit_irls(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const FamilySpec& family, const PenaltySpec& pen,
                   const FitOptions& opts, const FitResult* warm) {
  const Eigen::Index n = X.rows(), p = X.cols();
  const Std s = standardize(X, y, family, opts);
  const bool counts = family.family == Family::negbin;
  Eigen::VectorXd mvec(n);
  for (Eigen::Index i = 0; i < n; ++i)
    mvec[i] = counts ? double(family.trials[i]) : 1.0;

  const double pbar = y.sum() / mvec.sum();
  if (!(pbar > 0.0) || !(pbar < 1.0))
    throw degenerate_error("fit_penalized: single-class response");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double b0 = std::log(pbar / (1.0 - pbar));
  if (warm) {
    beta = (warm->beta.array() * s.scale.transpose().array()).matrix();
    b0 = warm->intercept + (beta.array() *
                            (s.mean.array() / s.scale.array()).transpose())
                               .sum();
  }

  // The coordinate update rescales the concavity per coordinate
  // (effective gamma_j = gamma / v_j), so the monitored objective must carry
  // the same penalty or healthy steps would register as rises.
  Eigen::VectorXd v = Eigen::VectorXd::Ones(p);
  auto objective = [&](const Eigen::VectorXd& eta,
                       const Eigen::VectorXd& b) {
    double penv = 0.0;
    if (pen.kind == Penalty::mcp) {
      for (Eigen::Index j = 0; j < p; ++j)
        penv += mcp_value(b[j], pen.lambda,
                          pen.mcp_gamma / std::max(v[j], kDegenerateColumn));
    } else {
      penv = penalty_value(b, pen);
    }
    return negloglik(y, eta, family) / double(n) + penv;
  };

  int total_sweeps = 0;
  int rises = 0;
  Eigen::VectorXd eta = Eigen::VectorXd::Constant(n, b0);
  eta.noalias() += s.X * beta;

  auto make_result = [&](int sweeps_done) {
    FitResult out;
    out.beta = (beta.array() / s.scale.transpose().array()).matrix();
    out.intercept =
        b0 -
        (beta.array() * (s.mean.array() / s.scale.array()).transpose()).sum();
    out.nonzero_count = count_nonzero(beta);
    out.lambda = pen.lambda;
    out.objective = objective(eta, beta);
    out.sweeps = sweeps_done;
    return out;
  };

  for (int outer = 0; outer < opts.max_irls; ++outer) {
    // Working weights and response at the current linear predictor.
    Eigen::VectorXd w(n), r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      // Clamp fitted probabilities away from the boundary so saturated
      // (quasi-separated) fits stay finite instead of running off.
      constexpr double kProbClamp = 1e-5;
      const double pi_raw = 1.0 / (1.0 + std::exp(-eta[i]));
      const double pi = std::min(std::max(pi_raw, kProbClamp), 1.0 - kProbClamp);
      double wi;
      if (counts) {
        // Latent-variable mean weight: m tanh(eta/2) / (2 eta), m/4 at 0.
        wi = pg_mean(PgParams{mvec[i], eta[i]});
      } else {
        wi = pi * (1.0 - pi);
      }
      wi = std::max(wi, opts.weight_floor);
      w[i] = wi;
      r[i] = (y[i] - mvec[i] * pi) / wi;
    }
    const double wsum = w.sum();
    for (Eigen::Index j = 0; j < p; ++j)
      v[j] = (s.X.col(j).array().square() * w.array()).sum() / double(n);

    const Eigen::VectorXd beta_prev = beta;
    const double b0_prev = b0;
    // Pre-step value under this outer's metric (v feeds the penalty).
    const double prev_obj = objective(eta, beta);
    total_sweeps += cd_weighted(s.X, w, wsum, r, beta, b0, pen, opts, v);

    eta = Eigen::VectorXd::Constant(n, b0);
    eta.noalias() += s.X * beta;
    double obj = objective(eta, beta);
    // Damped reweighting: back off toward the previous iterate while the
    // full coordinate pass materially increased the penalized objective.
    // The slack ignores rounding-level overshoot around a settled optimum.
    const double obj_slack = 1e-8 * (1.0 + std::fabs(prev_obj));
    for (int halvings = 0; obj > prev_obj + obj_slack && halvings < 10;
         ++halvings) {
      beta = 0.5 * (beta + beta_prev);
      b0 = 0.5 * (b0 + b0_prev);
      eta = Eigen::VectorXd::Constant(n, b0);
      eta.noalias() += s.X * beta;
      obj = objective(eta, beta);
    }
    if (obj > prev_obj + obj_slack) {
      if (++rises >= 5)
        throw convergence_error("fit_penalized: reweighting diverged",
                                make_result(total_sweeps));
    } else {
      rises = 0;
    }

    const double delta = std::max((beta - beta_prev).lpNorm<Eigen::Infinity>(),
                                  std::fabs(b0 - b0_prev));
    if (delta < opts.tol) break;
  }
  return make_result(total_sweeps);
}

}  // namespace

void FamilySpec::validate(Eigen::Index n) const {
  if (family != Family::negbin) return;
  if (trials.size() != n)
    throw domain_error("FamilySpec: negbin requires one trial count per row");
  for (Eigen::Index i = 0; i < n; ++i)
    if (trials[i] < 1)
      throw domain_error("FamilySpec: trial counts must be >= 1");
}

void PenaltySpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw domain_error("PenaltySpec: lambda must be finite and >= 0");
  if (kind == Penalty::mcp && !(mcp_gamma > 1.0))
    throw domain_error("PenaltySpec: mcp concavity must exceed 1");
}

double soft_threshold(double z, double lambda) {
  if (lambda < 0.0) throw domain_error("soft_threshold: negative lambda");
  if (z > lambda) return z - lambda;
  if (z < -lambda) return z + lambda;
  return 0.0;
}

double firm_threshold(double z, double lambda, double gamma) {
  if (lambda < 0.0) throw domain_error("firm_threshold: negative lambda");
  if (!(gamma > 1.0)) throw domain_error("firm_threshold: gamma must be > 1");
  if (std::fabs(z) > gamma * lambda) return z;
  return soft_threshold(z, lambda) / (1.0 - 1.0 / gamma);
}

double mcp_value(double b, double lambda, double gamma) {
  const double a = std::fabs(b);
  if (a <= gamma * lambda) return lambda * a - b * b / (2.0 * gamma);
  return 0.5 * gamma * lambda * lambda;
}

FitResult fit_penalized(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const FamilySpec& family, const PenaltySpec& penalty,
                        const FitOptions& opts, const FitResult* warm) {
  check_matrix(X, y, "fit_penalized");
  penalty.validate();
  family.validate(X.rows());
  if (penalty.kind == Penalty::scaled_lasso)
    throw domain_error("fit_penalized: use scaled_lasso() for that penalty");
  if (warm && warm->beta.size() != X.cols())
    throw domain_error("fit_penalized: warm start has wrong length");

  if (family.family == Family::binomial) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0)
        throw domain_error("fit_penalized: binomial response must be 0/1");
    return fit_irls(X, y, family, penalty, opts, warm);
  }
  if (family.family == Family::negbin) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y[i] < 0.0 || y[i] != std::floor(y[i]))
        throw domain_error(
            "fit_penalized: count response must be a nonnegative integer");
      if (y[i] > double(family.trials[i]))
        throw domain_error("fit_penalized: count response exceeds trials");
    }
    return fit_irls(X, y, family, penalty, opts, warm);
  }

  // gaussian
  const Std s = standardize(X, y, family, opts);
  const Eigen::Index n = X.rows(), p = X.cols();
  Eigen::VectorXd v(p);
  for (Eigen::Index j = 0; j < p; ++j)
    v[j] = s.X.col(j).squaredNorm() / double(n);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (warm) beta = (warm->beta.array() * s.scale.transpose().array()).matrix();
  Eigen::VectorXd r = s.yc - s.X * beta;
  std::vector<double> obj_path;
  const int sweeps = cd_gaussian(s.X, r, beta, penalty, opts, v,
                                 opts.record_objective ? &obj_path : nullptr);
  return finish_gaussian(s, beta, r, penalty, sweeps, std::move(obj_path));
}

double estimate_residual_variance(const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& beta) {
  check_matrix(X, y, "estimate_residual_variance");
  if (beta.size() != X.cols())
    throw domain_error("estimate_residual_variance: beta length mismatch");
  if (!beta.allFinite())
    throw domain_error("estimate_residual_variance: non-finite coefficients");
  const int q = count_nonzero(beta);
  if (q >= y.size())
    throw domain_error(
        "estimate_residual_variance: support size must be below n");
  const double rss = (y - X * beta).squaredNorm();
  return rss / double(y.size() - q);
}

FitResult scaled_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       double lambda0, const FitOptions& opts) {
  check_matrix(X, y, "scaled_lasso");
  if (!(lambda0 > 0.0) || !std::isfinite(lambda0))
    throw domain_error("scaled_lasso: lambda0 must be positive and finite");
  const Eigen::Index n = X.rows();
  const double ybar = opts.center ? y.mean() : 0.0;
  double sigma = std::sqrt((y.array() - ybar).square().sum() / double(n));
  if (sigma < 1e-8)
    throw degenerate_error("scaled_lasso: response scale collapsed");

  FamilySpec fam;  // gaussian
  FitResult fit;
  bool have_fit = false;
  for (int it = 0; it < 200; ++it) {
    PenaltySpec pen{Penalty::lasso, lambda0 * sigma, 3.0};
    fit = fit_penalized(X, y, fam, pen, opts, have_fit ? &fit : nullptr);
    have_fit = true;
    const Eigen::VectorXd resid =
        y - Eigen::VectorXd::Constant(n, fit.intercept) - X * fit.beta;
    const double sigma_new = std::sqrt(resid.squaredNorm() / double(n));
    if (sigma_new < 1e-8)
      throw degenerate_error("scaled_lasso: scale estimate collapsed");
    const bool done = std::fabs(sigma_new - sigma) < 1e-6;
    sigma = sigma_new;
    if (done) {
      fit.sigma2 = sigma * sigma;
      fit.lambda = lambda0 * sigma;
      return fit;
    }
  }
  fit.sigma2 = sigma * sigma;
  fit.lambda = lambda0 * sigma;
  throw convergence_error("scaled_lasso: scale did not stabilize", fit);
}

Eigen::VectorXd lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const FamilySpec& family, int length,
                            double min_ratio, const FitOptions& opts) {
  check_matrix(X, y, "lambda_grid");
  family.validate(X.rows());
  if (length < 1) throw domain_error("lambda_grid: length must be >= 1");
  if (!(min_ratio > 0.0) || !(min_ratio <= 1.0))
    throw domain_error("lambda_grid: min_ratio must be in (0, 1]");
  const Eigen::Index n = X.rows(), p = X.cols();
  const Std s = standardize(X, y, family, opts);

  Eigen::VectorXd resid0;
  if (family.family == Family::gaussian) {
    resid0 = s.yc;
  } else {
    Eigen::VectorXd mvec = Eigen::VectorXd::Ones(n);
    if (family.family == Family::negbin)
      mvec = family.trials.cast<double>();
    const double pbar = y.sum() / mvec.sum();
    if (!(pbar > 0.0) || !(pbar < 1.0))
      throw degenerate_error("lambda_grid: single-class response");
    resid0 = y - pbar * mvec;
  }
  double lmax = 0.0;
  for (Eigen::Index j = 0; j < p; ++j)
    lmax = std::max(lmax, std::fabs(s.X.col(j).dot(resid0)) / double(n));
  if (!(lmax > 0.0) || !std::isfinite(lmax))
    throw degenerate_error("lambda_grid: response carries no signal");

  Eigen::VectorXd grid(length);
  if (length == 1) {
    grid[0] = lmax;
    return grid;
  }
  for (int g = 0; g < length; ++g)
    grid[g] = lmax * std::pow(min_ratio, double(g) / double(length - 1));
  return grid;
}

double mean_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                     const FamilySpec& family,
                     const std::vector<Eigen::Index>& rows) {
  if (rows.empty()) throw domain_error("mean_deviance: empty index set");
  double total = 0.0;
  const bool counts = family.family == Family::negbin;
  for (const Eigen::Index i : rows) {
    if (family.family == Family::gaussian) {
      const double d = y[i] - eta[i];
      total += d * d;
    } else {
      const double m = counts ? double(family.trials[i]) : 1.0;
      total += 2.0 * (m * log1pexp(eta[i]) - y[i] * eta[i]);
    }
  }
  return total / double(rows.size());
}

namespace {

FamilySpec subset_family(const FamilySpec& family,
                         const std::vector<Eigen::Index>& rows) {
  FamilySpec out;
  out.family = family.family;
  if (family.family == Family::negbin) {
    out.trials.resize(Eigen::Index(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k)
      out.trials[Eigen::Index(k)] = family.trials[rows[k]];
  }
  return out;
}

std::vector<FitResult> fit_path(const Eigen::MatrixXd& X,
                                const Eigen::VectorXd& y,
                                const FamilySpec& family, Penalty kind,
                                double mcp_gamma, const Eigen::VectorXd& grid,
                                const FitOptions& opts) {
  std::vector<FitResult> path;
  path.reserve(grid.size());

  // For the logistic-type families the smallest penalties can saturate a
  // separable response; there descent stalls and every further grid point
  // only burns iterations.  Stop the path once the fitted deviance is nearly
  // exhausted (or descent fails) and reuse the boundary fit for the rest --
  // selection by held-out loss never moves past it unless it improves.
  const bool can_saturate = family.family != Family::gaussian;
  std::vector<Eigen::Index> all_rows;
  double null_dev = 0.0;
  if (can_saturate) {
    all_rows.resize(static_cast<size_t>(X.rows()));
    std::iota(all_rows.begin(), all_rows.end(), 0);
    const Eigen::VectorXd eta0 =
        Eigen::VectorXd::Zero(X.rows());
    null_dev = mean_deviance(y, eta0, family, all_rows);
  }

  const FitResult* warm = nullptr;
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    PenaltySpec pen{kind, grid[g], mcp_gamma};
    bool saturated = false;
    try {
      path.push_back(fit_penalized(X, y, family, pen, opts, warm));
    } catch (const convergence_error& e) {
      path.push_back(e.last);
      saturated = true;
    }
    if (can_saturate && !saturated) {
      Eigen::VectorXd eta =
          Eigen::VectorXd::Constant(X.rows(), path.back().intercept);
      eta.noalias() += X * path.back().beta;
      saturated = mean_deviance(y, eta, family, all_rows) < 0.01 * null_dev;
    }
    if (saturated) {
      while (Eigen::Index(path.size()) < grid.size())
        path.push_back(path.back());
      break;
    }
    warm = &path.back();
  }
  return path;
}

bool training_folds_two_class(const Eigen::VectorXd& y,
                              const FamilySpec& family,
                              const std::vector<int>& fold_of, int folds) {
  if (family.family == Family::gaussian) return true;
  for (int f = 0; f < folds; ++f) {
    double ysum = 0.0, msum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (fold_of[size_t(i)] == f) continue;
      ysum += y[i];
      msum += family.family == Family::negbin ? double(family.trials[i]) : 1.0;
    }
    if (!(ysum > 0.0) || !(ysum < msum)) return false;
  }
  return true;
}

}  // namespace

CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const FamilySpec& family, Penalty kind,
                        double mcp_gamma, int folds,
                        const Eigen::VectorXd& grid, RngStream& rng,
                        const FitOptions& opts, int threads) {
  check_matrix(X, y, "cross_validate");
  family.validate(X.rows());
  const Eigen::Index n = X.rows(), p = X.cols();
  if (folds < 2) throw domain_error("cross_validate: folds must be >= 2");
  if (folds > n) throw domain_error("cross_validate: folds exceed n");
  if (grid.size() < 1) throw domain_error("cross_validate: empty grid");
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    if (!(grid[g] >= 0.0) || !std::isfinite(grid[g]))
      throw domain_error("cross_validate: invalid grid value");
    if (g > 0 && !(grid[g] < grid[g - 1]))
      throw domain_error("cross_validate: grid must be strictly decreasing");
  }
  if (kind == Penalty::scaled_lasso)
    throw domain_error("cross_validate: scaled lasso tunes itself");

  // Shuffled balanced fold assignment; one reshuffle is allowed when a
  // training fold would see a single response class.
  std::vector<int> fold_of(static_cast<size_t>(n));
  for (int attempt = 0;; ++attempt) {
    std::vector<Eigen::Index> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (Eigen::Index i = n - 1; i > 0; --i) {
      const auto j = Eigen::Index(rng.uniform_index(std::uint64_t(i) + 1));
      std::swap(idx[size_t(i)], idx[size_t(j)]);
    }
    for (Eigen::Index k = 0; k < n; ++k)
      fold_of[size_t(idx[size_t(k)])] = int(k % folds);
    if (training_folds_two_class(y, family, fold_of, folds)) break;
    if (attempt == 1)
      throw degenerate_error(
          "cross_validate: a training fold has a single response class");
  }

  // Full-data path doubles as the refit source.
  const std::vector<FitResult> full_path =
      fit_path(X, y, family, kind, mcp_gamma, grid, opts);

  const int G = int(grid.size());
  std::vector<std::vector<double>> fold_dev_sum(size_t(folds),
                                                std::vector<double>(G, 0.0));
  parallel_for(folds, threads, [&](std::int64_t f) {
    std::vector<Eigen::Index> train, test;
    for (Eigen::Index i = 0; i < n; ++i)
      (fold_of[size_t(i)] == int(f) ? test : train).push_back(i);
    Eigen::MatrixXd Xtr(Eigen::Index(train.size()), p);
    Eigen::VectorXd ytr(Eigen::Index(train.size()));
    for (std::size_t k = 0; k < train.size(); ++k) {
      Xtr.row(Eigen::Index(k)) = X.row(train[k]);
      ytr[Eigen::Index(k)] = y[train[k]];
    }
    const FamilySpec fam_tr = subset_family(family, train);
    const std::vector<FitResult> path =
        fit_path(Xtr, ytr, fam_tr, kind, mcp_gamma, grid, opts);
    for (int g = 0; g < G; ++g) {
      Eigen::VectorXd eta =
          Eigen::VectorXd::Constant(n, path[size_t(g)].intercept);
      eta.noalias() += X * path[size_t(g)].beta;
      if (family.family == Family::gaussian) {
        double total = 0.0;
        for (const Eigen::Index i : test) {
          const double d = y[i] - eta[i];
          total += d * d;
        }
        fold_dev_sum[size_t(f)][size_t(g)] = total;
      } else {
        fold_dev_sum[size_t(f)][size_t(g)] =
            mean_deviance(y, eta, family, test) * double(test.size());
      }
    }
  });

  Eigen::VectorXd mean_dev = Eigen::VectorXd::Zero(G);
  for (int f = 0; f < folds; ++f)
    for (int g = 0; g < G; ++g) mean_dev[g] += fold_dev_sum[size_t(f)][size_t(g)];
  mean_dev /= double(n);

  int best = 0;
  for (int g = 1; g < G; ++g)
    if (mean_dev[g] < mean_dev[best]) best = g;  // ties keep the larger level

  CvResult out;
  out.lambda_star = grid[best];
  out.lambda_index = best;
  out.mean_deviance = mean_dev;
  out.fit = full_path[size_t(best)];
  return out;
}

}  // namespace eivglm
