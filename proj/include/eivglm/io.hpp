#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "eivglm/iro.hpp"
#include "eivglm/sim.hpp"

namespace eivglm {

// Parsed model input: the response, replicate blocks, and optional knowns
// (per-observation counts "m" for the count family, a known noise precision
// diagonal).
struct FitInput {
  ReplicateDataset data;
  std::optional<Eigen::VectorXd> omega_u_diag;
  std::optional<Eigen::VectorXi> trials;
};

// Reads and validates an input document for the given response family.
// Violations raise domain_error naming the first offending key or index.
FitInput read_fit_input(const std::filesystem::path& path, Family family);

// Writes through a same-directory temporary plus rename, so readers never
// observe a partial file.
void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content);

std::string fit_result_json(const IroConfig& cfg, const IroResult& result);
std::string noise_json(const NoiseEstimate& est,
                       const std::optional<Eigen::VectorXd>& raw_signed_average);
std::string experiment_csv(const ExperimentResult& result);
std::string experiment_json(const ExperimentResult& result);

// CSV summary at csv_path plus a JSON mirror with per-instance detail next to
// it (extension replaced by .json).
void write_experiment(const std::filesystem::path& csv_path,
                      const ExperimentResult& result);

// Chain snapshot: the full configuration echo plus everything needed to
// resume.
struct CheckpointDoc {
  IroConfig config;
  IroState state;
};

std::string checkpoint_json(const IroConfig& cfg, const IroState& state);
void write_checkpoint(const std::filesystem::path& path, const IroConfig& cfg,
                      const IroState& state);
CheckpointDoc read_checkpoint(const std::filesystem::path& path);

// True when two configurations describe the same chain.  Thread counts are
// an execution detail and excluded; results do not depend on them.
bool config_equivalent(const IroConfig& a, const IroConfig& b);

// Enum <-> string names shared by the writers and the command line.
std::string family_name(Family f);
std::optional<Family> parse_family(const std::string& name);
std::string penalty_name(Penalty p);
std::optional<Penalty> parse_penalty(const std::string& name);
std::string aggregation_name(Aggregation a);
std::optional<Aggregation> parse_aggregation(const std::string& name);
std::string kappa_name(CountKappa k);
std::optional<CountKappa> parse_kappa(const std::string& name);

}  // namespace eivglm
