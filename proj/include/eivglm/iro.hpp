#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "eivglm/eiv.hpp"
#include "eivglm/glm.hpp"

namespace eivglm {

enum class Aggregation { median, mean, trimmed };

struct IroConfig {
  int iterations = 100;  // total imputation/refit rounds
  int burn_in = 20;      // leading rounds excluded from aggregation
  Family family = Family::gaussian;
  Eigen::VectorXi trials;  // per-observation shape counts (negbin)
  Penalty penalty = Penalty::mcp;
  double mcp_gamma = 3.0;
  double scaled_lasso_lambda0 = 0.0;  // 0 -> sqrt(2 log p / n)
  int tune_every = 1;                 // re-tune the penalty every k rounds
  int folds = 10;
  int grid_length = 50;
  double grid_min_ratio = 0.0;  // 0 -> 1e-3 gaussian, 1e-2 logistic families
  Aggregation aggregation = Aggregation::median;
  double trim_alpha = 0.1;
  CountKappa count_kappa = CountKappa::shape_half;
  std::uint64_t seed = 1;
  int threads = 1;
  FitOptions fit;

  void validate() const;
  double resolved_grid_ratio() const;
};

// One retained round of the chain.
struct IroIterate {
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double lambda = 0.0;
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  int nonzero = 0;
};

// Everything needed to continue the chain from round `next_iteration`.
struct IroState {
  int next_iteration = 1;  // 1-based index of the round to run next
  Eigen::VectorXd beta;
  double intercept = 0.0;
  double sigma2 = std::numeric_limits<double>::quiet_NaN();
  double lambda = 0.0;
  Eigen::VectorXd omega_x;
  Eigen::MatrixXd x_current;  // latest imputed covariates (replicate means
                              // before the first round)
  Eigen::RowVectorXd column_means;
  Eigen::VectorXd omega_u;
  bool omega_u_estimated = false;
  std::vector<IroIterate> retained;
};

struct IroDiagnostics {
  bool computed = false;
  Eigen::VectorXd rhat;                  // split-chain statistic per coefficient
  std::vector<Eigen::Index> degenerate;  // coordinates with a constant trace
};

struct IroResult {
  Eigen::VectorXd beta_hat;
  double intercept_hat = 0.0;
  double sigma2_final = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd omega_x_final;
  Eigen::VectorXd omega_u;
  bool omega_u_estimated = false;
  Eigen::RowVectorXd column_means;
  std::vector<IroIterate> trace;  // retained rounds, length T - burn_in
  IroDiagnostics diagnostics;
};

// A solver failure inside round `iteration`; carries the retained trace
// accumulated before the failure.
class iro_abort_error : public error {
 public:
  iro_abort_error(const std::string& msg, int iter,
                  std::vector<IroIterate> trace)
      : error(msg), iteration(iter), partial(std::move(trace)) {}
  int iteration;
  std::vector<IroIterate> partial;
};

// Builds the starting state: resolves the noise precision (estimating it from
// replicate scatter when absent), shifts covariate columns to mean zero, and
// fits the replicate means for the initial coefficients and nuisances.
IroState initialize_state(const ReplicateDataset& data,
                          const std::optional<Eigen::VectorXd>& omega_u_diag,
                          const IroConfig& cfg);

// Advances the chain by up to `rounds` imputation/refit rounds (all remaining
// rounds when `rounds` <= 0) and returns the updated state.  Splitting a run
// into slices changes nothing: every round draws from streams keyed by its own
// index, never by execution history.
IroState advance_iro(const ReplicateDataset& data, const IroConfig& cfg,
                     IroState state, int rounds = 0);

// Aggregates a completed chain (next_iteration == iterations + 1) into the
// final estimate and diagnostics.
IroResult finalize_iro(const IroConfig& cfg, const IroState& state);

// Runs the remaining rounds of the chain from the given state and aggregates.
IroResult run_iro_from_state(const ReplicateDataset& data,
                             const IroConfig& cfg, IroState state);

// initialize_state + run_iro_from_state.
IroResult run_iro(const ReplicateDataset& data,
                  const std::optional<Eigen::VectorXd>& omega_u_diag,
                  const IroConfig& cfg);

// Coordinatewise aggregation of stacked draws (rows = rounds).
Eigen::VectorXd aggregate_coefficients(const Eigen::MatrixXd& draws,
                                       Aggregation method, double trim_alpha);

// Split-chain scale-reduction diagnostic on a retained trace (rows = rounds,
// >= 4 required).  A coordinate constant in both halves reports 1 and is
// flagged as degenerate.
IroDiagnostics split_chain_diagnostic(const Eigen::MatrixXd& draws);

// Stacks the coefficient rows of a trace.
Eigen::MatrixXd trace_beta_matrix(const std::vector<IroIterate>& trace);

}  // namespace eivglm
