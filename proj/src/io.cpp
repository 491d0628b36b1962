#include "eivglm/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace eivglm {

namespace {

using nlohmann::json;

json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(); }

double null_or_num(const json& v, const std::string& path) {
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number())
    throw domain_error("input: " + path + " must be a number or null");
  return v.get<double>();
}

json vec_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json rowvec_to_json(const Eigen::RowVectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json ivec_to_json(const Eigen::VectorXi& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json mat_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

const json& require_key(const json& doc, const std::string& key,
                        const std::string& where) {
  auto it = doc.find(key);
  if (it == doc.end())
    throw domain_error(where + ": missing key '" + key + "'");
  return *it;
}

double require_finite_number(const json& v, const std::string& path) {
  if (!v.is_number())
    throw domain_error("input: " + path + " must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x))
    throw domain_error("input: " + path + " must be finite");
  return x;
}

Eigen::VectorXd json_to_vec(const json& v, const std::string& path) {
  if (!v.is_array())
    throw domain_error("input: " + path + " must be an array");
  Eigen::VectorXd out(Eigen::Index(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i)
    out[Eigen::Index(i)] =
        require_finite_number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

Eigen::VectorXi json_to_ivec(const json& v, const std::string& path) {
  if (!v.is_array())
    throw domain_error("input: " + path + " must be an array");
  Eigen::VectorXi out(Eigen::Index(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    const double x = require_finite_number(v[i], p);
    if (x != std::floor(x))
      throw domain_error("input: " + p + " must be an integer");
    out[Eigen::Index(i)] = int(x);
  }
  return out;
}

Eigen::MatrixXd json_to_mat(const json& v, const std::string& path) {
  if (!v.is_array() || v.empty())
    throw domain_error("input: " + path + " must be a non-empty array");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  Eigen::MatrixXd out;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!v[i].is_array() || v[i].empty())
      throw domain_error("input: " + rp + " must be a non-empty array");
    if (i == 0) {
      cols = v[i].size();
      out.resize(Eigen::Index(rows), Eigen::Index(cols));
    } else if (v[i].size() != cols) {
      throw domain_error("input: " + rp + " must have " +
                         std::to_string(cols) + " entries");
    }
    for (std::size_t j = 0; j < cols; ++j)
      out(Eigen::Index(i), Eigen::Index(j)) = require_finite_number(
          v[i][j], rp + "[" + std::to_string(j) + "]");
  }
  return out;
}

json config_to_json(const IroConfig& cfg) {
  json c;
  c["iterations"] = cfg.iterations;
  c["burn_in"] = cfg.burn_in;
  c["family"] = family_name(cfg.family);
  if (cfg.trials.size() > 0) c["trials"] = ivec_to_json(cfg.trials);
  c["penalty"] = penalty_name(cfg.penalty);
  c["mcp_gamma"] = cfg.mcp_gamma;
  c["scaled_lasso_lambda0"] = cfg.scaled_lasso_lambda0;
  c["tune_every"] = cfg.tune_every;
  c["folds"] = cfg.folds;
  c["grid_length"] = cfg.grid_length;
  c["grid_min_ratio"] = cfg.grid_min_ratio;
  c["aggregation"] = aggregation_name(cfg.aggregation);
  c["trim_alpha"] = cfg.trim_alpha;
  c["count_kappa"] = kappa_name(cfg.count_kappa);
  c["seed"] = cfg.seed;
  c["fit"] = {{"standardize", cfg.fit.standardize},
              {"center", cfg.fit.center},
              {"tol", cfg.fit.tol},
              {"max_sweeps", cfg.fit.max_sweeps},
              {"max_irls", cfg.fit.max_irls},
              {"weight_floor", cfg.fit.weight_floor}};
  return c;
}

template <typename T>
T parse_enum(const std::optional<T>& v, const std::string& name,
             const std::string& what) {
  if (!v) throw domain_error("checkpoint: unknown " + what + " '" + name + "'");
  return *v;
}

IroConfig config_from_json(const json& c) {
  IroConfig cfg;
  const std::string where = "checkpoint";
  cfg.iterations = require_key(c, "iterations", where).get<int>();
  cfg.burn_in = require_key(c, "burn_in", where).get<int>();
  const std::string fam = require_key(c, "family", where).get<std::string>();
  cfg.family = parse_enum(parse_family(fam), fam, "family");
  if (c.contains("trials"))
    cfg.trials = json_to_ivec(c["trials"], "config.trials");
  const std::string pen = require_key(c, "penalty", where).get<std::string>();
  cfg.penalty = parse_enum(parse_penalty(pen), pen, "penalty");
  cfg.mcp_gamma = require_key(c, "mcp_gamma", where).get<double>();
  cfg.scaled_lasso_lambda0 =
      require_key(c, "scaled_lasso_lambda0", where).get<double>();
  cfg.tune_every = require_key(c, "tune_every", where).get<int>();
  cfg.folds = require_key(c, "folds", where).get<int>();
  cfg.grid_length = require_key(c, "grid_length", where).get<int>();
  cfg.grid_min_ratio = require_key(c, "grid_min_ratio", where).get<double>();
  const std::string agg =
      require_key(c, "aggregation", where).get<std::string>();
  cfg.aggregation = parse_enum(parse_aggregation(agg), agg, "aggregation");
  cfg.trim_alpha = require_key(c, "trim_alpha", where).get<double>();
  const std::string kap =
      require_key(c, "count_kappa", where).get<std::string>();
  cfg.count_kappa = parse_enum(parse_kappa(kap), kap, "count centering");
  cfg.seed = require_key(c, "seed", where).get<std::uint64_t>();
  const json& f = require_key(c, "fit", where);
  cfg.fit.standardize = require_key(f, "standardize", where).get<bool>();
  cfg.fit.center = require_key(f, "center", where).get<bool>();
  cfg.fit.tol = require_key(f, "tol", where).get<double>();
  cfg.fit.max_sweeps = require_key(f, "max_sweeps", where).get<int>();
  cfg.fit.max_irls = require_key(f, "max_irls", where).get<int>();
  cfg.fit.weight_floor = require_key(f, "weight_floor", where).get<double>();
  return cfg;
}

json iterate_to_json(const IroIterate& it) {
  json o;
  o["beta"] = vec_to_json(it.beta);
  o["intercept"] = it.intercept;
  o["lambda"] = it.lambda;
  o["sigma2"] = num_or_null(it.sigma2);
  o["nonzero"] = it.nonzero;
  return o;
}

IroIterate iterate_from_json(const json& o, const std::string& path) {
  IroIterate it;
  it.beta = json_to_vec(require_key(o, "beta", path), path + ".beta");
  it.intercept = require_key(o, "intercept", path).get<double>();
  it.lambda = require_key(o, "lambda", path).get<double>();
  it.sigma2 = null_or_num(require_key(o, "sigma2", path), path + ".sigma2");
  it.nonzero = require_key(o, "nonzero", path).get<int>();
  return it;
}

json state_to_json(const IroState& st) {
  json s;
  s["next_iteration"] = st.next_iteration;
  s["beta"] = vec_to_json(st.beta);
  s["intercept"] = st.intercept;
  s["sigma2"] = num_or_null(st.sigma2);
  s["lambda"] = st.lambda;
  s["omega_x"] = vec_to_json(st.omega_x);
  s["x_current"] = mat_to_json(st.x_current);
  s["column_means"] = rowvec_to_json(st.column_means);
  s["omega_u"] = vec_to_json(st.omega_u);
  s["omega_u_estimated"] = st.omega_u_estimated;
  json retained = json::array();
  for (const IroIterate& it : st.retained)
    retained.push_back(iterate_to_json(it));
  s["retained"] = std::move(retained);
  return s;
}

IroState state_from_json(const json& s) {
  const std::string where = "checkpoint";
  IroState st;
  st.next_iteration = require_key(s, "next_iteration", where).get<int>();
  st.beta = json_to_vec(require_key(s, "beta", where), "state.beta");
  st.intercept = require_key(s, "intercept", where).get<double>();
  st.sigma2 = null_or_num(require_key(s, "sigma2", where), "state.sigma2");
  st.lambda = require_key(s, "lambda", where).get<double>();
  st.omega_x = json_to_vec(require_key(s, "omega_x", where), "state.omega_x");
  st.x_current =
      json_to_mat(require_key(s, "x_current", where), "state.x_current");
  st.column_means =
      json_to_vec(require_key(s, "column_means", where), "state.column_means")
          .transpose();
  st.omega_u = json_to_vec(require_key(s, "omega_u", where), "state.omega_u");
  st.omega_u_estimated =
      require_key(s, "omega_u_estimated", where).get<bool>();
  const json& retained = require_key(s, "retained", where);
  if (!retained.is_array())
    throw domain_error("checkpoint: state.retained must be an array");
  for (std::size_t i = 0; i < retained.size(); ++i)
    st.retained.push_back(iterate_from_json(
        retained[i], "state.retained[" + std::to_string(i) + "]"));
  return st;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void append_arm_rows(std::string& out, const SimulationSpec& spec,
                     const std::string& arm, const ArmResult& res) {
  const Metrics m = res.mean();
  const std::string prefix = setting_name(spec.setting) + "," +
                             std::to_string(spec.p) + "," +
                             std::to_string(spec.n) + "," +
                             fmt_double(spec.gamma) + "," + arm + ",";
  const std::string suffix = "," + std::to_string(res.n_success()) + "\n";
  out += prefix + "L2," + fmt_double(m.l2) + suffix;
  out += prefix + "TP," + fmt_double(m.tp) + suffix;
  out += prefix + "FP," + fmt_double(m.fp) + suffix;
}

json arm_to_json(const ArmResult& res) {
  json a;
  a["n_success"] = res.n_success();
  const Metrics m = res.mean();
  a["mean"] = {{"L2", num_or_null(m.l2)},
               {"TP", num_or_null(m.tp)},
               {"FP", num_or_null(m.fp)}};
  json inst = json::array();
  for (std::size_t k = 0; k < res.success.size(); ++k) {
    json row;
    row["instance"] = k;
    row["ok"] = bool(res.success[k]);
    if (res.success[k]) {
      row["L2"] = res.metrics[k].l2;
      row["TP"] = res.metrics[k].tp;
      row["FP"] = res.metrics[k].fp;
    } else {
      row["error"] = res.errors[k];
    }
    inst.push_back(std::move(row));
  }
  a["instances"] = std::move(inst);
  return a;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::gaussian: return "gaussian";
    case Family::binomial: return "binomial";
    case Family::negbin: return "negbin";
  }
  return "?";
}

std::optional<Family> parse_family(const std::string& name) {
  if (name == "gaussian") return Family::gaussian;
  if (name == "binomial") return Family::binomial;
  if (name == "negbin") return Family::negbin;
  return std::nullopt;
}

std::string penalty_name(Penalty p) {
  switch (p) {
    case Penalty::lasso: return "lasso";
    case Penalty::mcp: return "mcp";
    case Penalty::scaled_lasso: return "scaled-lasso";
  }
  return "?";
}

std::optional<Penalty> parse_penalty(const std::string& name) {
  if (name == "lasso") return Penalty::lasso;
  if (name == "mcp") return Penalty::mcp;
  if (name == "scaled-lasso") return Penalty::scaled_lasso;
  return std::nullopt;
}

std::string aggregation_name(Aggregation a) {
  switch (a) {
    case Aggregation::median: return "median";
    case Aggregation::mean: return "mean";
    case Aggregation::trimmed: return "trimmed";
  }
  return "?";
}

std::optional<Aggregation> parse_aggregation(const std::string& name) {
  if (name == "median") return Aggregation::median;
  if (name == "mean") return Aggregation::mean;
  if (name == "trimmed") return Aggregation::trimmed;
  return std::nullopt;
}

std::string kappa_name(CountKappa k) {
  return k == CountKappa::shape_half ? "shape-half" : "half";
}

std::optional<CountKappa> parse_kappa(const std::string& name) {
  if (name == "shape-half") return CountKappa::shape_half;
  if (name == "half") return CountKappa::half;
  return std::nullopt;
}

FitInput read_fit_input(const std::filesystem::path& path, Family family) {
  std::ifstream is(path);
  if (!is)
    throw domain_error("input: cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw domain_error(std::string("input: invalid JSON: ") + e.what());
  }
  if (!doc.is_object())
    throw domain_error("input: document must be an object");
  const json& ver = require_key(doc, "schema_version", "input");
  if (!ver.is_number_integer() || ver.get<int>() != 1)
    throw domain_error("input: schema_version must be 1");

  FitInput out;
  out.data.y = json_to_vec(require_key(doc, "y", "input"), "y");
  const Eigen::Index n = out.data.y.size();
  if (n < 1) throw domain_error("input: y must be non-empty");

  const json& reps = require_key(doc, "replicates", "input");
  if (!reps.is_array())
    throw domain_error("input: replicates must be an array");
  if (Eigen::Index(reps.size()) != n)
    throw domain_error("input: replicates must have " + std::to_string(n) +
                       " blocks to match y");
  Eigen::Index p = 0;
  out.data.replicates.reserve(reps.size());
  for (std::size_t i = 0; i < reps.size(); ++i) {
    Eigen::MatrixXd block =
        json_to_mat(reps[i], "replicates[" + std::to_string(i) + "]");
    if (i == 0) {
      p = block.cols();
    } else if (block.cols() != p) {
      throw domain_error("input: replicates[" + std::to_string(i) +
                         "] rows must have " + std::to_string(p) + " entries");
    }
    out.data.replicates.push_back(std::move(block));
  }

  if (doc.contains("m")) {
    Eigen::VectorXi m = json_to_ivec(doc["m"], "m");
    if (m.size() != n)
      throw domain_error("input: m must have " + std::to_string(n) +
                         " entries to match y");
    for (Eigen::Index i = 0; i < n; ++i)
      if (m[i] < 1)
        throw domain_error("input: m[" + std::to_string(i) +
                           "] must be >= 1");
    out.trials = std::move(m);
  }

  if (doc.contains("omega_u_diag")) {
    Eigen::VectorXd ou = json_to_vec(doc["omega_u_diag"], "omega_u_diag");
    if (ou.size() != p)
      throw domain_error("input: omega_u_diag must have " + std::to_string(p) +
                         " entries");
    for (Eigen::Index j = 0; j < p; ++j)
      if (!(ou[j] > 0.0))
        throw domain_error("input: omega_u_diag[" + std::to_string(j) +
                           "] must be positive");
    out.omega_u_diag = std::move(ou);
  }

  // Family-specific response checks.
  if (family == Family::binomial) {
    for (Eigen::Index i = 0; i < n; ++i)
      if (out.data.y[i] != 0.0 && out.data.y[i] != 1.0)
        throw domain_error("input: y[" + std::to_string(i) +
                           "] must be 0 or 1 for the binomial family");
  } else if (family == Family::negbin) {
    if (!out.trials.has_value())
      throw domain_error("input: key 'm' is required for the negbin family");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double yi = out.data.y[i];
      if (yi < 0.0 || yi != std::floor(yi))
        throw domain_error("input: y[" + std::to_string(i) +
                           "] must be a non-negative integer for the negbin "
                           "family");
      if (yi > double((*out.trials)[i]))
        throw domain_error("input: y[" + std::to_string(i) +
                           "] exceeds m[" + std::to_string(i) + "]");
    }
  }

  out.data.validate();
  return out;
}

void write_text_atomic(const std::filesystem::path& path,
                       const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw error("output: cannot write '" + tmp.string() + "'");
    os << content;
    os.flush();
    if (!os) throw error("output: write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec)
    throw error("output: cannot move '" + tmp.string() + "' to '" +
                path.string() + "': " + ec.message());
}

std::string fit_result_json(const IroConfig& cfg, const IroResult& result) {
  json doc;
  doc["schema_version"] = 1;
  doc["config"] = config_to_json(cfg);
  doc["omega_u"] = {
      {"source", result.omega_u_estimated ? "estimated" : "provided"},
      {"diag", vec_to_json(result.omega_u)}};
  doc["beta_hat"] = vec_to_json(result.beta_hat);
  doc["intercept_hat"] = result.intercept_hat;
  json support = json::array();
  for (Eigen::Index j = 0; j < result.beta_hat.size(); ++j)
    if (result.beta_hat[j] != 0.0) support.push_back(j);
  doc["nonzero_count"] = support.size();
  doc["support"] = std::move(support);
  json trace = json::array();
  for (const IroIterate& it : result.trace) {
    trace.push_back({{"lambda", it.lambda},
                     {"nonzero", it.nonzero},
                     {"sigma2", num_or_null(it.sigma2)},
                     {"intercept", it.intercept}});
  }
  doc["trace"] = std::move(trace);
  json diag;
  diag["computed"] = result.diagnostics.computed;
  if (result.diagnostics.computed) {
    json rhat = json::array();
    for (Eigen::Index j = 0; j < result.diagnostics.rhat.size(); ++j)
      rhat.push_back(num_or_null(result.diagnostics.rhat[j]));
    diag["rhat"] = std::move(rhat);
    json degen = json::array();
    for (Eigen::Index j : result.diagnostics.degenerate) degen.push_back(j);
    diag["degenerate"] = std::move(degen);
  }
  doc["diagnostics"] = std::move(diag);
  doc["omega_x_final"] = vec_to_json(result.omega_x_final);
  doc["column_means"] = rowvec_to_json(result.column_means);
  doc["sigma2_final"] = num_or_null(result.sigma2_final);
  return doc.dump(2) + "\n";
}

std::string noise_json(
    const NoiseEstimate& est,
    const std::optional<Eigen::VectorXd>& raw_signed_average) {
  json doc;
  doc["schema_version"] = 1;
  doc["sigma_u_diag"] = vec_to_json(est.sigma_u);
  doc["omega_u_diag"] = vec_to_json(est.omega_u);
  if (raw_signed_average.has_value())
    doc["raw_signed_average"] = vec_to_json(*raw_signed_average);
  return doc.dump(2) + "\n";
}

std::string experiment_csv(const ExperimentResult& result) {
  std::string out = "setting,p,n,gamma,arm,metric,value,n_success\n";
  append_arm_rows(out, result.spec, "ideal", result.ideal);
  append_arm_rows(out, result.spec, "naive", result.naive);
  append_arm_rows(out, result.spec, "iro", result.iro);
  return out;
}

std::string experiment_json(const ExperimentResult& result) {
  const SimulationSpec& spec = result.spec;
  json doc;
  doc["schema_version"] = 1;
  json s;
  s["setting"] = setting_name(spec.setting);
  s["n"] = spec.n;
  s["p"] = spec.p;
  s["gamma"] = spec.gamma;
  s["replicates"] = spec.replicates;
  s["penalty"] = penalty_name(spec.penalty);
  s["mcp_gamma"] = spec.mcp_gamma;
  s["instances"] = spec.n_monte_carlo;
  s["seed"] = spec.seed;
  s["iterations"] = spec.iterations;
  s["burn_in"] = spec.burn_in;
  s["folds"] = spec.folds;
  s["tune_every"] = spec.tune_every;
  s["aggregation"] = aggregation_name(spec.aggregation);
  s["trim_alpha"] = spec.trim_alpha;
  s["grid_length"] = spec.grid_length;
  s["grid_min_ratio"] = spec.grid_min_ratio;
  s["band_magnitude"] = spec.band_magnitude;
  s["zero_tol"] = spec.zero_tol;
  doc["spec"] = std::move(s);
  doc["arms"] = {{"ideal", arm_to_json(result.ideal)},
                 {"naive", arm_to_json(result.naive)},
                 {"iro", arm_to_json(result.iro)}};
  return doc.dump(2) + "\n";
}

void write_experiment(const std::filesystem::path& csv_path,
                      const ExperimentResult& result) {
  write_text_atomic(csv_path, experiment_csv(result));
  std::filesystem::path json_path = csv_path;
  json_path.replace_extension(".json");
  write_text_atomic(json_path, experiment_json(result));
}

std::string checkpoint_json(const IroConfig& cfg, const IroState& state) {
  json doc;
  doc["schema_version"] = 1;
  doc["kind"] = "checkpoint";
  doc["config"] = config_to_json(cfg);
  doc["state"] = state_to_json(state);
  return doc.dump(2) + "\n";
}

void write_checkpoint(const std::filesystem::path& path, const IroConfig& cfg,
                      const IroState& state) {
  write_text_atomic(path, checkpoint_json(cfg, state));
}

CheckpointDoc read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is)
    throw domain_error("checkpoint: cannot open '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw domain_error(std::string("checkpoint: invalid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("kind") ||
      doc["kind"] != std::string("checkpoint"))
    throw domain_error("checkpoint: '" + path.string() +
                       "' is not a checkpoint document");
  CheckpointDoc out;
  out.config = config_from_json(require_key(doc, "config", "checkpoint"));
  out.state = state_from_json(require_key(doc, "state", "checkpoint"));
  return out;
}

bool config_equivalent(const IroConfig& a, const IroConfig& b) {
  const bool trials_equal =
      a.trials.size() == b.trials.size() &&
      (a.trials.size() == 0 || (a.trials.array() == b.trials.array()).all());
  return a.iterations == b.iterations && a.burn_in == b.burn_in &&
         a.family == b.family && trials_equal && a.penalty == b.penalty &&
         a.mcp_gamma == b.mcp_gamma &&
         a.scaled_lasso_lambda0 == b.scaled_lasso_lambda0 &&
         a.tune_every == b.tune_every && a.folds == b.folds &&
         a.grid_length == b.grid_length &&
         a.grid_min_ratio == b.grid_min_ratio &&
         a.aggregation == b.aggregation && a.trim_alpha == b.trim_alpha &&
         a.count_kappa == b.count_kappa && a.seed == b.seed &&
         a.fit.standardize == b.fit.standardize &&
         a.fit.center == b.fit.center && a.fit.tol == b.fit.tol &&
         a.fit.max_sweeps == b.fit.max_sweeps &&
         a.fit.max_irls == b.fit.max_irls &&
         a.fit.weight_floor == b.fit.weight_floor;
}

}  // namespace eivglm
