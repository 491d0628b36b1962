// Command-line front end: Monte-Carlo benchmarks, single-dataset fits with
// optional checkpointing, and replicate-noise estimation.
//
// Exit codes: 0 success; 2 usage or validation problems; 3 statistically
// degenerate data; 4 runtime failures (solver divergence, aborted chains,
// I/O errors).

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "eivglm/io.hpp"
#include "eivglm/parallel.hpp"

namespace {

using namespace eivglm;

constexpr int kLongRunInstances = 100;
constexpr Eigen::Index kLongRunDimension = 2000;

struct CommonChainArgs {
  std::string penalty = "mcp";
  double mcp_gamma = 3.0;
  int iterations = 100;
  int burn_in = 20;
  int folds = 10;
  int tune_every = 1;
  std::string aggregation = "median";
  double trim_alpha = 0.1;
  int grid_length = 50;
  double grid_ratio = 0.0;
  std::uint64_t seed = 1;
  int threads = 0;
};

void add_chain_options(CLI::App* cmd, CommonChainArgs& a) {
  cmd->add_option("--penalty", a.penalty,
                  "Penalty: lasso, mcp, or scaled-lasso");
  cmd->add_option("--mcp-gamma", a.mcp_gamma, "Concavity parameter for mcp");
  cmd->add_option("--iterations", a.iterations,
                  "Total imputation/refit rounds");
  cmd->add_option("--burnin", a.burn_in,
                  "Leading rounds excluded from aggregation");
  cmd->add_option("--folds", a.folds, "Cross-validation folds");
  cmd->add_option("--tune-every", a.tune_every,
                  "Re-tune the penalty level every k rounds");
  cmd->add_option("--aggregation", a.aggregation,
                  "Trace aggregation: median, mean, or trimmed");
  cmd->add_option("--trim-alpha", a.trim_alpha,
                  "Tail fraction dropped by trimmed aggregation");
  cmd->add_option("--grid-length", a.grid_length, "Penalty grid size");
  cmd->add_option("--grid-ratio", a.grid_ratio,
                  "Smallest grid level relative to the largest (0 = default)");
  cmd->add_option("--seed", a.seed, "Master seed");
  cmd->add_option("--threads", a.threads,
                  "Worker threads (0 = EIVGLM_THREADS or hardware)");
}

Penalty penalty_or_throw(const std::string& name) {
  auto p = parse_penalty(name);
  if (!p)
    throw domain_error("unknown penalty '" + name +
                       "'; valid penalties: lasso, mcp, scaled-lasso");
  return *p;
}

Aggregation aggregation_or_throw(const std::string& name) {
  auto a = parse_aggregation(name);
  if (!a)
    throw domain_error("unknown aggregation '" + name +
                       "'; valid aggregations: median, mean, trimmed");
  return *a;
}

int run_simulate(const CommonChainArgs& chain, const std::string& setting,
                 Eigen::Index n, Eigen::Index p, double gamma, int replicates,
                 int instances, double band_magnitude, double zero_tol,
                 const std::string& out, bool yes_long) {
  SimulationSpec spec;
  auto s = parse_setting(setting);
  if (!s)
    throw domain_error("unknown setting '" + setting +
                       "'; valid settings: G1, G2, G3, B1, B2");
  spec.setting = *s;
  spec.n = n;
  spec.p = p;
  spec.gamma = gamma;
  spec.replicates = replicates;
  spec.n_monte_carlo = instances;
  spec.penalty = penalty_or_throw(chain.penalty);
  spec.mcp_gamma = chain.mcp_gamma;
  spec.seed = chain.seed;
  spec.iterations = chain.iterations;
  spec.burn_in = chain.burn_in;
  spec.folds = chain.folds;
  spec.tune_every = chain.tune_every;
  spec.aggregation = aggregation_or_throw(chain.aggregation);
  spec.trim_alpha = chain.trim_alpha;
  spec.grid_length = chain.grid_length;
  spec.grid_min_ratio = chain.grid_ratio;
  spec.band_magnitude = band_magnitude;
  spec.zero_tol = zero_tol;
  spec.threads = chain.threads;
  spec.validate();
  if ((instances > kLongRunInstances || p > kLongRunDimension) && !yes_long)
    throw domain_error(
        "this run is large (instances > 100 or p > 2000); pass --yes-long to "
        "confirm");
  const ExperimentResult result = run_experiment(spec);
  write_experiment(out, result);
  return 0;
}

int run_fit(const CommonChainArgs& chain, const std::string& data,
            const std::string& family, const std::string& kappa,
            double lambda0, const std::string& out,
            const std::string& checkpoint, int checkpoint_every,
            const std::string& resume, bool yes_long) {
  auto fam = parse_family(family);
  if (!fam)
    throw domain_error("unknown family '" + family +
                       "'; valid families: gaussian, binomial, negbin");
  auto kap = parse_kappa(kappa);
  if (!kap)
    throw domain_error("unknown count centering '" + kappa +
                       "'; valid choices: shape-half, half");

  const FitInput input = read_fit_input(data, *fam);
  if (input.data.p() > kLongRunDimension && !yes_long)
    throw domain_error(
        "this run is large (p > 2000); pass --yes-long to confirm");

  IroConfig cfg;
  cfg.iterations = chain.iterations;
  cfg.burn_in = chain.burn_in;
  cfg.family = *fam;
  if (*fam == Family::negbin) cfg.trials = *input.trials;
  cfg.penalty = penalty_or_throw(chain.penalty);
  cfg.mcp_gamma = chain.mcp_gamma;
  cfg.scaled_lasso_lambda0 = lambda0;
  cfg.tune_every = chain.tune_every;
  cfg.folds = chain.folds;
  cfg.grid_length = chain.grid_length;
  cfg.grid_min_ratio = chain.grid_ratio;
  cfg.aggregation = aggregation_or_throw(chain.aggregation);
  cfg.trim_alpha = chain.trim_alpha;
  cfg.count_kappa = *kap;
  cfg.seed = chain.seed;
  cfg.threads = chain.threads;
  cfg.validate();

  IroState state;
  if (!resume.empty()) {
    CheckpointDoc doc = read_checkpoint(resume);
    if (!config_equivalent(doc.config, cfg))
      throw domain_error(
          "resume: checkpoint configuration differs from the requested run");
    state = std::move(doc.state);
  } else {
    state = initialize_state(input.data, input.omega_u_diag, cfg);
  }

  if (!checkpoint.empty()) {
    while (state.next_iteration <= cfg.iterations) {
      state = advance_iro(input.data, cfg, std::move(state), checkpoint_every);
      write_checkpoint(checkpoint, cfg, state);
    }
  } else {
    state = advance_iro(input.data, cfg, std::move(state), 0);
  }
  const IroResult result = finalize_iro(cfg, state);
  write_text_atomic(out, fit_result_json(cfg, result));
  return 0;
}

int run_noise(const std::string& data, const std::string& out,
              bool debug_raw) {
  const FitInput input = read_fit_input(data, Family::gaussian);
  const NoiseEstimate est = estimate_me_precision_diag(input.data);
  std::optional<Eigen::VectorXd> raw;
  if (debug_raw) raw = me_raw_signed_average(input.data);
  write_text_atomic(out, noise_json(est, raw));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Sparse regression for covariates observed through noisy replicates"};
  app.require_subcommand(1);

  CommonChainArgs sim_chain;
  std::string sim_setting;
  Eigen::Index sim_n = 200, sim_p = 100;
  double sim_gamma = 0.5;
  int sim_replicates = 3, sim_instances = 1;
  double sim_band = 0.45, sim_zero_tol = 1e-8;
  std::string sim_out;
  bool sim_yes_long = false;
  CLI::App* sim = app.add_subcommand(
      "simulate", "Run a Monte-Carlo benchmark and write metric summaries");
  sim->add_option("--setting", sim_setting, "Benchmark setting name")
      ->required();
  sim->add_option("--n", sim_n, "Observations per instance");
  sim->add_option("--p", sim_p, "Covariate dimension");
  sim->add_option("--gamma", sim_gamma,
                  "Replicate-noise variance relative to the signal");
  sim->add_option("--replicates", sim_replicates,
                  "Replicates per observation");
  sim->add_option("--instances", sim_instances, "Monte-Carlo instances");
  sim->add_option("--band-magnitude", sim_band,
                  "Off-diagonal magnitude for the banded settings");
  sim->add_option("--zero-tol", sim_zero_tol,
                  "Support threshold for the selection metrics");
  sim->add_option("--out", sim_out, "Output CSV path (JSON mirror alongside)")
      ->required();
  sim->add_flag("--yes-long", sim_yes_long, "Confirm a large run");
  add_chain_options(sim, sim_chain);

  CommonChainArgs fit_chain;
  std::string fit_data, fit_family, fit_out;
  std::string fit_kappa = "shape-half";
  double fit_lambda0 = 0.0;
  std::string fit_checkpoint, fit_resume;
  int fit_checkpoint_every = 10;
  bool fit_yes_long = false;
  CLI::App* fit = app.add_subcommand(
      "fit", "Fit a dataset of replicated covariates and write the estimate");
  fit->add_option("--data", fit_data, "Input JSON dataset")->required();
  fit->add_option("--family", fit_family,
                  "Response family: gaussian, binomial, negbin")
      ->required();
  fit->add_option("--kappa", fit_kappa,
                  "Count-family centering: shape-half or half");
  fit->add_option("--lambda0", fit_lambda0,
                  "Scale level for scaled-lasso (0 = sqrt(2 log p / n))");
  fit->add_option("--out", fit_out, "Output JSON path")->required();
  CLI::Option* ckpt_opt =
      fit->add_option("--checkpoint", fit_checkpoint,
                      "Write a resumable snapshot to this path");
  fit->add_option("--checkpoint-every", fit_checkpoint_every,
                  "Rounds between snapshots")
      ->needs(ckpt_opt)
      ->check(CLI::PositiveNumber);
  fit->add_option("--resume", fit_resume, "Continue from a snapshot");
  fit->add_flag("--yes-long", fit_yes_long, "Confirm a large run");
  add_chain_options(fit, fit_chain);

  std::string noise_data, noise_out;
  bool noise_debug_raw = false;
  CLI::App* noise = app.add_subcommand(
      "noise", "Estimate the replicate-noise variance from a dataset");
  noise->add_option("--data", noise_data, "Input JSON dataset")->required();
  noise->add_option("--out", noise_out, "Output JSON path")->required();
  noise->add_flag("--debug-raw-average", noise_debug_raw,
                  "Include the signed-difference diagnostic in the output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed())
      return run_simulate(sim_chain, sim_setting, sim_n, sim_p, sim_gamma,
                          sim_replicates, sim_instances, sim_band,
                          sim_zero_tol, sim_out, sim_yes_long);
    if (fit->parsed())
      return run_fit(fit_chain, fit_data, fit_family, fit_kappa, fit_lambda0,
                     fit_out, fit_checkpoint, fit_checkpoint_every, fit_resume,
                     fit_yes_long);
    if (noise->parsed())
      return run_noise(noise_data, noise_out, noise_debug_raw);
  } catch (const domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const degenerate_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
