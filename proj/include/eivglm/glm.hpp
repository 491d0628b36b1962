#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "eivglm/errors.hpp"
#include "eivglm/rng.hpp"

namespace eivglm {

enum class Family { gaussian, binomial, negbin };
enum class Penalty { lasso, mcp, scaled_lasso };

// Response family plus per-observation shape counts for the count family.
struct FamilySpec {
  Family family = Family::gaussian;
  Eigen::VectorXi trials;  // required (size n, entries >= 1) for negbin

  void validate(Eigen::Index n) const;
};

struct PenaltySpec {
  Penalty kind = Penalty::lasso;
  double lambda = 0.0;     // >= 0
  double mcp_gamma = 3.0;  // > 1

  void validate() const;
};

struct FitOptions {
  bool standardize = true;  // scale columns to unit variance internally
  bool center = true;       // center columns (and the gaussian response)
  double tol = 1e-7;        // l-infinity coefficient change per sweep
  int max_sweeps = 10000;
  int max_irls = 100;
  double weight_floor = 1e-5;     // working-weight floor for IRLS
  bool record_objective = false;  // store the per-sweep objective path
};

struct FitResult {
  Eigen::VectorXd beta;    // coefficients on the input scale
  double intercept = 0.0;  // unpenalized; implied by centering for gaussian
  int nonzero_count = 0;
  double lambda = 0.0;
  double objective = 0.0;  // penalized objective at the solution
  std::optional<double> sigma2;  // gaussian residual variance when estimable
  int sweeps = 0;
  std::vector<double> objective_path;  // filled when record_objective
};

// Iterative reweighting stopped making progress; carries the last iterate.
class convergence_error : public error {
 public:
  convergence_error(const std::string& msg, FitResult last_iterate)
      : error(msg), last(std::move(last_iterate)) {}
  FitResult last;
};

// Soft-thresholding operator: argmin_b (1/2)(z - b)^2 + lambda |b|.
double soft_threshold(double z, double lambda);

// Firm-thresholding operator: the exact minimizer of
// (1/2)(z - b)^2 + MCP(b; lambda, gamma) for gamma > 1.
double firm_threshold(double z, double lambda, double gamma);

// Minimum-concavity penalty value at b.
double mcp_value(double b, double lambda, double gamma);

// Penalized fit at a fixed penalty level by cyclic coordinate descent
// (gaussian) or iteratively reweighted penalized least squares (binomial and
// count families, with an unpenalized intercept).  An optional warm start is
// given on the input scale.
FitResult fit_penalized(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const FamilySpec& family, const PenaltySpec& penalty,
                        const FitOptions& opts = {},
                        const FitResult* warm = nullptr);

// Residual variance ||y - X beta||^2 / (n - q) with q = #{j : beta_j != 0}.
// Requires q < n.
double estimate_residual_variance(const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& X,
                                  const Eigen::VectorXd& beta);

// Joint lasso scale estimation: alternates beta <- lasso(lambda0 * sigma)
// and sigma^2 <- ||y - X beta||^2 / n until sigma stabilizes (1e-6).
// The result carries sigma^2 in sigma2 and lambda0 * sigma in lambda.
FitResult scaled_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       double lambda0, const FitOptions& opts = {});

// Geometric penalty grid from the smallest level with an all-zero solution
// down to lambda_max * min_ratio.
Eigen::VectorXd lambda_grid(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const FamilySpec& family, int length,
                            double min_ratio, const FitOptions& opts = {});

struct CvResult {
  double lambda_star = 0.0;
  int lambda_index = 0;
  Eigen::VectorXd mean_deviance;  // per grid point, averaged held-out loss
  FitResult fit;                  // refit on all data at lambda_star
};

// K-fold cross-validation over a decreasing penalty grid.  Folds are shuffled
// from the given stream, sizes differ by at most one, and ties in held-out
// deviance resolve toward the larger penalty.
CvResult cross_validate(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        const FamilySpec& family, Penalty kind,
                        double mcp_gamma, int folds,
                        const Eigen::VectorXd& grid, RngStream& rng,
                        const FitOptions& opts = {}, int threads = 1);

// Mean held-out loss used by cross_validate: squared error for gaussian,
// -2/n * log-likelihood (up to constants) otherwise.
double mean_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                     const FamilySpec& family,
                     const std::vector<Eigen::Index>& rows);

}  // namespace eivglm
