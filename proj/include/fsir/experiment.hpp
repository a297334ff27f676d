#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fsir/csv.hpp"
#include "fsir/edr.hpp"
#include "fsir/errors.hpp"
#include "fsir/link.hpp"
#include "fsir/metrics.hpp"
#include "fsir/operators.hpp"
#include "fsir/simulation.hpp"
#include "fsir/version.hpp"

namespace fsir {

using json = nlohmann::json;

// Resolved run configuration for every CLI mode. JSON fields mirror the
// member names; command-line flags override file values.
struct ExperimentConfig {
  std::string mode;

  std::uint64_t seed = 20260825;
  std::string output_dir = "out";
  int workers = 1;
  int grid_size = 31;
  double fve = 0.95;
  int k = 1;
  int n_runs = 100;
  std::vector<int> n_list = {100, 200};
  bool n_list_set = false;
  std::vector<std::string> designs = {"complete", "sparse"};
  int eval_paths = 1000;

  // simulate mode / synthetic cells
  int sim_n = 100;
  double noise_sd = 0.1;
  int n_obs_min = 2;
  int n_obs_max = 10;
  int fixed_n_obs = 0;
  bool sim_sparse = true;

  // ingested data (fit / link modes)
  std::string data_path;
  double interval_min = 0.0;
  double interval_max = 1.0;
  bool interval_set = false;

  // smoothing
  std::string kernel = "epanechnikov";
  double bandwidth_scale = 1.0;
  double h_t = 0.0, h_y = 0.0, h_mu = 0.0, h_phi = 0.0;  // 0 = data-driven
  bool exclude_diagonal_pairs = false;

  std::vector<double> fve_sweep;
};

namespace detail {

inline void require_keys(const json& obj, const std::vector<std::string>& known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : known)
      if (it.key() == k) { ok = true; break; }
    if (!ok)
      throw Error(ErrorKind::ConfigInvalid, "unknown key '" + it.key() + "' in " + where,
                  it.key());
  }
}

inline double as_number(const json& v, const std::string& field) {
  if (!v.is_number())
    throw Error(ErrorKind::ConfigInvalid, "'" + field + "' must be a number", field);
  return v.get<double>();
}

inline int as_int(const json& v, const std::string& field) {
  if (!v.is_number_integer())
    throw Error(ErrorKind::ConfigInvalid, "'" + field + "' must be an integer", field);
  return v.get<int>();
}

}  // namespace detail

inline ExperimentConfig parse_config_json(const json& doc) {
  if (!doc.is_object())
    throw Error(ErrorKind::ConfigInvalid, "config root must be an object", "config");
  detail::require_keys(doc,
                       {"seed", "output_dir", "workers", "grid_size", "fve", "k", "n_runs",
                        "n_list", "designs", "eval_paths", "sim", "data", "smoother",
                        "exclude_diagonal_pairs", "fve_sweep"},
                       "config");
  ExperimentConfig cfg;
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_integer() || doc["seed"].get<long long>() < 0)
      throw Error(ErrorKind::ConfigInvalid, "'seed' must be a nonnegative integer", "seed");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("output_dir")) cfg.output_dir = doc["output_dir"].get<std::string>();
  if (doc.contains("workers")) cfg.workers = detail::as_int(doc["workers"], "workers");
  if (doc.contains("grid_size")) cfg.grid_size = detail::as_int(doc["grid_size"], "grid_size");
  if (doc.contains("fve")) cfg.fve = detail::as_number(doc["fve"], "fve");
  if (doc.contains("k")) cfg.k = detail::as_int(doc["k"], "k");
  if (doc.contains("n_runs")) cfg.n_runs = detail::as_int(doc["n_runs"], "n_runs");
  if (doc.contains("n_list")) {
    if (!doc["n_list"].is_array() || doc["n_list"].empty())
      throw Error(ErrorKind::ConfigInvalid, "'n_list' must be a nonempty array", "n_list");
    cfg.n_list.clear();
    for (const auto& v : doc["n_list"]) cfg.n_list.push_back(detail::as_int(v, "n_list"));
    cfg.n_list_set = true;
  }
  if (doc.contains("designs")) {
    if (!doc["designs"].is_array() || doc["designs"].empty())
      throw Error(ErrorKind::ConfigInvalid, "'designs' must be a nonempty array", "designs");
    cfg.designs.clear();
    for (const auto& v : doc["designs"]) {
      const std::string d = v.get<std::string>();
      if (d != "complete" && d != "sparse")
        throw Error(ErrorKind::ConfigInvalid, "design must be 'complete' or 'sparse'",
                    "designs");
      cfg.designs.push_back(d);
    }
  }
  if (doc.contains("eval_paths")) cfg.eval_paths = detail::as_int(doc["eval_paths"], "eval_paths");
  if (doc.contains("sim")) {
    const json& s = doc["sim"];
    detail::require_keys(
        s, {"n", "noise_sd", "n_obs_min", "n_obs_max", "fixed_n_obs", "sparse"}, "sim");
    if (s.contains("n")) cfg.sim_n = detail::as_int(s["n"], "sim.n");
    if (s.contains("noise_sd")) cfg.noise_sd = detail::as_number(s["noise_sd"], "sim.noise_sd");
    if (s.contains("n_obs_min")) cfg.n_obs_min = detail::as_int(s["n_obs_min"], "sim.n_obs_min");
    if (s.contains("n_obs_max")) cfg.n_obs_max = detail::as_int(s["n_obs_max"], "sim.n_obs_max");
    if (s.contains("fixed_n_obs"))
      cfg.fixed_n_obs = detail::as_int(s["fixed_n_obs"], "sim.fixed_n_obs");
    if (s.contains("sparse")) {
      if (!s["sparse"].is_boolean())
        throw Error(ErrorKind::ConfigInvalid, "'sim.sparse' must be a boolean", "sim.sparse");
      cfg.sim_sparse = s["sparse"].get<bool>();
    }
  }
  if (doc.contains("data")) {
    const json& d = doc["data"];
    detail::require_keys(d, {"path", "interval"}, "data");
    if (d.contains("path")) cfg.data_path = d["path"].get<std::string>();
    if (d.contains("interval")) {
      if (!d["interval"].is_array() || d["interval"].size() != 2)
        throw Error(ErrorKind::ConfigInvalid, "'data.interval' must be [min, max]",
                    "data.interval");
      cfg.interval_min = detail::as_number(d["interval"][0], "data.interval");
      cfg.interval_max = detail::as_number(d["interval"][1], "data.interval");
      cfg.interval_set = true;
    }
  }
  if (doc.contains("smoother")) {
    const json& s = doc["smoother"];
    detail::require_keys(s, {"kernel", "bandwidth_scale", "h_t", "h_y", "h_mu", "h_phi"},
                         "smoother");
    if (s.contains("kernel")) cfg.kernel = s["kernel"].get<std::string>();
    if (s.contains("bandwidth_scale"))
      cfg.bandwidth_scale = detail::as_number(s["bandwidth_scale"], "smoother.bandwidth_scale");
    if (s.contains("h_t")) cfg.h_t = detail::as_number(s["h_t"], "smoother.h_t");
    if (s.contains("h_y")) cfg.h_y = detail::as_number(s["h_y"], "smoother.h_y");
    if (s.contains("h_mu")) cfg.h_mu = detail::as_number(s["h_mu"], "smoother.h_mu");
    if (s.contains("h_phi")) cfg.h_phi = detail::as_number(s["h_phi"], "smoother.h_phi");
  }
  if (doc.contains("exclude_diagonal_pairs")) {
    if (!doc["exclude_diagonal_pairs"].is_boolean())
      throw Error(ErrorKind::ConfigInvalid, "'exclude_diagonal_pairs' must be a boolean",
                  "exclude_diagonal_pairs");
    cfg.exclude_diagonal_pairs = doc["exclude_diagonal_pairs"].get<bool>();
  }
  if (doc.contains("fve_sweep")) {
    if (!doc["fve_sweep"].is_array())
      throw Error(ErrorKind::ConfigInvalid, "'fve_sweep' must be an array", "fve_sweep");
    for (const auto& v : doc["fve_sweep"])
      cfg.fve_sweep.push_back(detail::as_number(v, "fve_sweep"));
  }
  return cfg;
}

inline ExperimentConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigInvalid, "cannot open config '" + path + "'", "config");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, "config is not valid JSON: " + std::string(e.what()),
                "config");
  }
  return parse_config_json(doc);
}

inline void validate_config(const ExperimentConfig& cfg) {
  if (cfg.mode != "simulate" && cfg.mode != "fit" && cfg.mode != "replicate-table1" &&
      cfg.mode != "rate-check" && cfg.mode != "link")
    throw Error(ErrorKind::ConfigInvalid, "unknown mode '" + cfg.mode + "'", "mode");
  if (cfg.k < 1) throw Error(ErrorKind::ConfigInvalid, "k must be at least 1", "k");
  if (cfg.grid_size < 3)
    throw Error(ErrorKind::ConfigInvalid, "grid_size must be at least 3", "grid_size");
  if (!(cfg.fve > 0.0) || cfg.fve > 1.0)
    throw Error(ErrorKind::ConfigInvalid, "fve must lie in (0, 1]", "fve");
  if (cfg.n_runs < 1) throw Error(ErrorKind::ConfigInvalid, "n_runs must be positive", "n_runs");
  if (cfg.eval_paths < 2)
    throw Error(ErrorKind::ConfigInvalid, "eval_paths must be at least 2", "eval_paths");
  if (cfg.workers < 0)
    throw Error(ErrorKind::ConfigInvalid, "workers must be nonnegative", "workers");
  if (!(cfg.bandwidth_scale > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "bandwidth_scale must be positive",
                "smoother.bandwidth_scale");
  for (int n : cfg.n_list)
    if (n < 2) throw Error(ErrorKind::ConfigInvalid, "sample sizes must be at least 2", "n_list");
  Kernel1D::from_name(cfg.kernel);  // validates the name
  if ((cfg.mode == "fit" || cfg.mode == "link") && cfg.data_path.empty())
    throw Error(ErrorKind::ConfigInvalid, "mode '" + cfg.mode + "' needs data.path",
                "data.path");
  if (cfg.mode == "link" && cfg.k > 2)
    throw Error(ErrorKind::ConfigInvalid, "link mode supports k of 1 or 2", "k");
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["mode"] = cfg.mode;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["grid_size"] = cfg.grid_size;
  j["fve"] = cfg.fve;
  j["k"] = cfg.k;
  j["n_runs"] = cfg.n_runs;
  j["n_list"] = cfg.n_list;
  j["designs"] = cfg.designs;
  j["eval_paths"] = cfg.eval_paths;
  j["sim"] = {{"n", cfg.sim_n},          {"noise_sd", cfg.noise_sd},
              {"n_obs_min", cfg.n_obs_min}, {"n_obs_max", cfg.n_obs_max},
              {"fixed_n_obs", cfg.fixed_n_obs}, {"sparse", cfg.sim_sparse}};
  if (!cfg.data_path.empty())
    j["data"] = {{"path", cfg.data_path},
                 {"interval", {cfg.interval_min, cfg.interval_max}}};
  j["smoother"] = {{"kernel", cfg.kernel}, {"bandwidth_scale", cfg.bandwidth_scale},
                   {"h_t", cfg.h_t},       {"h_y", cfg.h_y},
                   {"h_mu", cfg.h_mu},     {"h_phi", cfg.h_phi}};
  j["exclude_diagonal_pairs"] = cfg.exclude_diagonal_pairs;
  if (!cfg.fve_sweep.empty()) j["fve_sweep"] = cfg.fve_sweep;
  return j;
}

namespace detail {

// Run fn(0..n_tasks-1) on up to `workers` threads. Tasks write to
// preallocated slots; the first thrown exception is rethrown after joining.
template <typename Fn>
inline void parallel_for(int n_tasks, int workers, Fn&& fn) {
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, n_tasks));
  if (workers == 1) {
    for (int i = 0; i < n_tasks; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n_tasks) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

// Data-driven bandwidths with config overrides applied on top.
inline SmootherSpec resolve_spec(const ExperimentConfig& cfg, const LongitudinalDataset& data) {
  SmootherSpec spec =
      auto_bandwidths(data, Kernel1D::from_name(cfg.kernel), cfg.bandwidth_scale);
  if (cfg.h_t > 0.0) spec.h_t = cfg.h_t;
  if (cfg.h_y > 0.0) spec.h_y = cfg.h_y;
  if (cfg.h_mu > 0.0) spec.h_mu = cfg.h_mu;
  if (cfg.h_phi > 0.0) spec.h_phi = cfg.h_phi;
  validate_spec(spec, data);
  return spec;
}

// One Monte Carlo cell: n_runs synthetic datasets of one (n, design) pair,
// each fitted and reduced into summary metrics in run-index order.
struct CellResult {
  int n = 0;
  std::string design;
  MonteCarloSummary beta;      // metrics on normalized, sign-aligned beta_1
  MonteCarloSummary eta;       // metrics on sign-aligned eta_1
  double mean_abs_correlation = 0.0;
  double mean_h_t = 0.0, mean_h_y = 0.0, mean_h_mu = 0.0, mean_h_phi = 0.0;
  long widened = 0;
  long degenerate = 0;
  double max_eta_orthonormality_error = 0.0;
  double max_beta_gamma_error = 0.0;
  double seconds = 0.0;
};

inline CellResult run_mc_cell(const ExperimentConfig& cfg, int n, bool sparse, int fixed_n_obs,
                              const TrajectorySet& eval_paths,
                              const std::optional<SmootherSpec>& fixed_spec = std::nullopt) {
  const auto t_start = std::chrono::steady_clock::now();
  const Eigen::VectorXd grid = linspace(0.0, 1.0, cfg.grid_size);
  const TrueModel model = default_true_model(grid);

  struct RunSlot {
    FunctionOnGrid beta, eta;
    double corr = 0.0;
    SmootherSpec spec;
    long widened = 0, degenerate = 0;
    double eta_err = 0.0, beta_err = 0.0;
  };
  std::vector<RunSlot> slots(static_cast<std::size_t>(cfg.n_runs));

  detail::parallel_for(cfg.n_runs, cfg.workers, [&](int r) {
    SimConfig sc;
    sc.n = n;
    sc.grid_size = cfg.grid_size;
    sc.noise_sd = cfg.noise_sd;
    sc.n_obs_min = cfg.n_obs_min;
    sc.n_obs_max = cfg.n_obs_max;
    sc.fixed_n_obs = fixed_n_obs;
    sc.seed = rng::derive_key(cfg.seed, rng::Tag::run, static_cast<std::uint64_t>(r));

    const TrajectorySet paths = simulate_brownian(sc);
    const Eigen::VectorXd y = generate_responses(paths, model, sc);
    const LongitudinalDataset data =
        sparse ? sparsify(paths, y, sc) : complete_dataset(paths, y);
    const SmootherSpec spec = fixed_spec ? *fixed_spec : resolve_spec(cfg, data);
    EdrFit f = fit(data, spec, grid, cfg.fve, cfg.k, !cfg.exclude_diagonal_pairs);

    RunSlot& slot = slots[static_cast<std::size_t>(r)];
    slot.corr = projection_correlation(f.beta[0], model.beta, eval_paths);
    slot.beta = normalize_l2(align_sign_to(f.beta[0], model.beta));
    slot.eta = align_sign_to(f.eta[0], model.beta);
    slot.spec = spec;
    slot.widened = f.diagnostics.smoother.widened;
    slot.degenerate = f.diagnostics.smoother.degenerate;
    slot.eta_err = f.diagnostics.eta_orthonormality_error;
    slot.beta_err = f.diagnostics.beta_gamma_error;
  });

  // reduce in run-index order
  CellResult cell;
  cell.n = n;
  cell.design = sparse ? "sparse" : "complete";
  std::vector<FunctionOnGrid> betas, etas;
  std::vector<double> corrs;
  betas.reserve(slots.size());
  etas.reserve(slots.size());
  for (const auto& s : slots) {
    betas.push_back(s.beta);
    etas.push_back(s.eta);
    corrs.push_back(s.corr);
    cell.mean_h_t += s.spec.h_t;
    cell.mean_h_y += s.spec.h_y;
    cell.mean_h_mu += s.spec.h_mu;
    cell.mean_h_phi += s.spec.h_phi;
    cell.widened += s.widened;
    cell.degenerate += s.degenerate;
    cell.max_eta_orthonormality_error =
        std::max(cell.max_eta_orthonormality_error, s.eta_err);
    cell.max_beta_gamma_error = std::max(cell.max_beta_gamma_error, s.beta_err);
  }
  const double nr = static_cast<double>(cfg.n_runs);
  cell.mean_h_t /= nr;
  cell.mean_h_y /= nr;
  cell.mean_h_mu /= nr;
  cell.mean_h_phi /= nr;
  cell.beta = summarize_runs(betas, model.beta, corrs);
  cell.eta = summarize_runs(etas, model.beta, corrs);
  cell.mean_abs_correlation = cell.beta.mean_abs_correlation;
  cell.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return cell;
}

inline TrajectorySet make_eval_paths(const ExperimentConfig& cfg) {
  SimConfig ec;
  ec.n = cfg.eval_paths;
  ec.grid_size = cfg.grid_size;
  ec.noise_sd = 0.0;
  ec.seed = rng::derive_key(cfg.seed, rng::Tag::eval, 0);
  return simulate_brownian(ec);
}

inline std::vector<CellResult> run_table1_cells(const ExperimentConfig& cfg) {
  const TrajectorySet eval_paths = make_eval_paths(cfg);
  std::vector<CellResult> cells;
  for (int n : cfg.n_list)
    for (const auto& design : cfg.designs)
      cells.push_back(run_mc_cell(cfg, n, design == "sparse", cfg.fixed_n_obs, eval_paths));
  return cells;
}

struct RateCheckResult {
  std::vector<CellResult> cells;
  std::vector<RateRatio> ratios;
  SmootherSpec calibration_spec;
  int fixed_n_obs = 0;
};

// Sparse-design rate check: one bandwidth set, calibrated on a synthetic
// dataset at the smallest sample size, reused for every run of every n.
inline RateCheckResult run_rate_check_cells(const ExperimentConfig& cfg) {
  RateCheckResult out;
  out.fixed_n_obs = cfg.fixed_n_obs > 0 ? cfg.fixed_n_obs : 6;
  std::vector<int> sizes = cfg.n_list_set ? cfg.n_list : std::vector<int>{100, 200, 400};
  std::sort(sizes.begin(), sizes.end());

  SimConfig calib;
  calib.n = sizes.front();
  calib.grid_size = cfg.grid_size;
  calib.noise_sd = cfg.noise_sd;
  calib.fixed_n_obs = out.fixed_n_obs;
  calib.seed = rng::derive_key(cfg.seed, rng::Tag::calib, 0);
  const TrajectorySet calib_paths = simulate_brownian(calib);
  const Eigen::VectorXd calib_y =
      generate_responses(calib_paths, default_true_model(calib_paths.grid), calib);
  const LongitudinalDataset calib_data = sparsify(calib_paths, calib_y, calib);
  out.calibration_spec = resolve_spec(cfg, calib_data);

  const TrajectorySet eval_paths = make_eval_paths(cfg);
  std::vector<std::pair<int, MonteCarloSummary>> eta_summaries;
  for (int n : sizes) {
    out.cells.push_back(
        run_mc_cell(cfg, n, true, out.fixed_n_obs, eval_paths, out.calibration_spec));
    eta_summaries.emplace_back(n, out.cells.back().eta);
  }
  out.ratios = ivar_rate_ratio(eta_summaries);
  return out;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::ConfigInvalid, "cannot write '" + path + "'", "output_dir");
  out << text;
}

inline json cell_to_json(const CellResult& cell) {
  json j;
  j["n"] = cell.n;
  j["design"] = cell.design;
  j["correlation"] = cell.mean_abs_correlation;
  j["isb"] = cell.beta.isb;
  j["ivar"] = cell.beta.ivar;
  j["imse"] = cell.beta.imse;
  j["eta_isb"] = cell.eta.isb;
  j["eta_ivar"] = cell.eta.ivar;
  j["eta_imse"] = cell.eta.imse;
  j["identity_abs_error"] = std::abs(cell.beta.imse - (cell.beta.isb + cell.beta.ivar));
  j["bandwidths"] = {{"h_t", cell.mean_h_t},
                     {"h_y", cell.mean_h_y},
                     {"h_mu", cell.mean_h_mu},
                     {"h_phi", cell.mean_h_phi}};
  j["diagnostics"] = {{"widened", cell.widened},
                      {"degenerate", cell.degenerate},
                      {"max_eta_orthonormality_error", cell.max_eta_orthonormality_error},
                      {"max_beta_gamma_error", cell.max_beta_gamma_error},
                      {"seconds", cell.seconds}};
  j["per_run_correlations"] = cell.beta.per_run_correlations;
  return j;
}

inline std::string table1_csv(const std::vector<CellResult>& cells) {
  std::string out = "n,data_type,correlation,isb,ivar,imse\n";
  for (const auto& c : cells) {
    out += std::to_string(c.n) + "," + c.design + "," +
           format_sig(c.mean_abs_correlation) + "," + format_sig(c.beta.isb) + "," +
           format_sig(c.beta.ivar) + "," + format_sig(c.beta.imse) + "\n";
  }
  return out;
}

inline std::string beta_mean_csv(const std::vector<CellResult>& cells,
                                 const FunctionOnGrid& truth) {
  std::string header = "t,true_beta";
  for (const auto& c : cells) header += "," + c.design + "_n" + std::to_string(c.n);
  std::string out = header + "\n";
  for (Eigen::Index j = 0; j < truth.grid.size(); ++j) {
    out += format_sig(truth.grid[j]) + "," + format_sig(truth.values[j]);
    for (const auto& c : cells) out += "," + format_sig(c.beta.mean_estimate[j]);
    out += "\n";
  }
  return out;
}

inline std::string ratios_csv(const std::vector<RateRatio>& ratios,
                              const std::vector<CellResult>& cells) {
  std::string out = "n_small,n_large,ivar_small,ivar_large,sqrt_ivar_ratio\n";
  auto ivar_of = [&](int n) {
    for (const auto& c : cells)
      if (c.n == n) return c.eta.ivar;
    return 0.0;
  };
  for (const auto& r : ratios)
    out += std::to_string(r.n_small) + "," + std::to_string(r.n_large) + "," +
           format_sig(ivar_of(r.n_small)) + "," + format_sig(ivar_of(r.n_large)) + "," +
           format_sig(r.sqrt_ivar_ratio) + "\n";
  return out;
}

}  // namespace detail

// Per-subject index values <beta_j, X_i> from a fitted model, integrating
// over each subject's own observation times (the directions are interpolated
// linearly onto those times). Exact for subjects observed on the fit grid.
inline Eigen::MatrixXd subject_indices(const EdrFit& fit, const LongitudinalDataset& data) {
  const int n = data.n();
  Eigen::MatrixXd idx(n, fit.k);
  for (int i = 0; i < n; ++i) {
    const auto& s = data.subjects[i];
    for (int j = 0; j < fit.k; ++j) {
      Eigen::VectorXd prod(s.times.size());
      for (Eigen::Index m = 0; m < s.times.size(); ++m)
        prod[m] = linear_interp(fit.beta[j].grid, fit.beta[j].values, s.times[m]) * s.values[m];
      idx(i, j) = s.times.size() > 1 ? trapz(s.times, prod) : 0.0;
    }
  }
  return idx;
}

// Executes one mode end to end, writes the artifacts under cfg.output_dir,
// and returns the results.json document.
inline json run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  std::filesystem::create_directories(cfg.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (std::filesystem::path(cfg.output_dir) / name).string();
  };

  json doc;
  doc["version"] = FSIR_VERSION;
  doc["generated_at"] = detail::utc_timestamp();
  doc["config"] = config_to_json(cfg);
  doc["seed"] = cfg.seed;
  json results;

  if (cfg.mode == "simulate") {
    SimConfig sc;
    sc.n = cfg.sim_n;
    sc.grid_size = cfg.grid_size;
    sc.noise_sd = cfg.noise_sd;
    sc.n_obs_min = cfg.n_obs_min;
    sc.n_obs_max = cfg.n_obs_max;
    sc.fixed_n_obs = cfg.fixed_n_obs;
    sc.seed = cfg.seed;
    const TrajectorySet paths = simulate_brownian(sc);
    const TrueModel model = default_true_model(paths.grid);
    const Eigen::VectorXd y = generate_responses(paths, model, sc);
    const LongitudinalDataset data =
        cfg.sim_sparse ? sparsify(paths, y, sc) : complete_dataset(paths, y);
    write_dataset_csv(data, out_path("dataset.csv"));
    results["dataset"] = "dataset.csv";
    results["n"] = data.n();
    results["total_observations"] = data.total_observations();
    results["design"] = cfg.sim_sparse ? "sparse" : "complete";
  } else if (cfg.mode == "fit") {
    const LongitudinalDataset data = cfg.interval_set
        ? ingest_csv(cfg.data_path, cfg.interval_min, cfg.interval_max)
        : [&] {
            LongitudinalDataset probe = ingest_csv(cfg.data_path, -1e300, 1e300);
            auto [lo, hi] = observed_time_range(probe);
            probe.t_min = lo;
            probe.t_max = hi;
            return probe;
          }();
    const Eigen::VectorXd grid = linspace(data.t_min, data.t_max, cfg.grid_size);
    const SmootherSpec spec = resolve_spec(cfg, data);
    const EdrFit f = fit(data, spec, grid, cfg.fve, cfg.k, !cfg.exclude_diagonal_pairs);

    std::string dir_csv = "t";
    for (int j = 1; j <= f.k; ++j)
      dir_csv += ",eta_" + std::to_string(j) + ",beta_" + std::to_string(j);
    dir_csv += "\n";
    for (Eigen::Index m = 0; m < grid.size(); ++m) {
      dir_csv += detail::format_sig(grid[m]);
      for (int j = 0; j < f.k; ++j)
        dir_csv += "," + detail::format_sig(f.eta[j].values[m]) + "," +
                   detail::format_sig(f.beta[j].values[m]);
      dir_csv += "\n";
    }
    detail::write_text(out_path("directions.csv"), dir_csv);

    results["n"] = data.n();
    results["total_observations"] = data.total_observations();
    results["lambda"] = std::vector<double>(f.eigenvalues.data(),
                                            f.eigenvalues.data() + f.eigenvalues.size());
    results["retained_rank"] = f.retained_rank;
    results["fve_achieved"] = f.fve;
    results["gamma_eigenvalues"] = std::vector<double>(
        f.diagnostics.gamma_eigenvalues.data(),
        f.diagnostics.gamma_eigenvalues.data() + f.diagnostics.gamma_eigenvalues.size());
    results["m_cumulative_fraction"] = std::vector<double>(
        f.diagnostics.m_cumulative_fraction.data(),
        f.diagnostics.m_cumulative_fraction.data() + f.diagnostics.m_cumulative_fraction.size());
    results["bandwidths"] = {{"h_t", spec.h_t},
                             {"h_y", spec.h_y},
                             {"h_mu", spec.h_mu},
                             {"h_phi", spec.h_phi}};
    results["diagnostics"] = {
        {"widened", f.diagnostics.smoother.widened},
        {"degenerate", f.diagnostics.smoother.degenerate},
        {"gamma_condition", f.diagnostics.gamma_condition},
        {"eta_orthonormality_error", f.diagnostics.eta_orthonormality_error},
        {"beta_gamma_error", f.diagnostics.beta_gamma_error}};
    results["directions"] = "directions.csv";
    if (!cfg.fve_sweep.empty()) {
      SmootherDiagnostics sd;
      const OperatorMatrix gamma =
          estimate_gamma(data, spec, grid, &sd, !cfg.exclude_diagonal_pairs);
      const OperatorMatrix gamma_e = estimate_gamma_e(data, spec, grid, &sd);
      json sweep = json::array();
      for (double threshold : cfg.fve_sweep) {
        const EdrFit fs = fit_from_operators(gamma, gamma_e, threshold, cfg.k);
        sweep.push_back({{"fve", threshold},
                         {"retained_rank", fs.retained_rank},
                         {"fve_achieved", fs.fve},
                         {"lambda_1", fs.eigenvalues[0]}});
      }
      results["fve_sweep"] = sweep;
    }
  } else if (cfg.mode == "replicate-table1") {
    const std::vector<CellResult> cells = run_table1_cells(cfg);
    detail::write_text(out_path("table1.csv"), detail::table1_csv(cells));
    const FunctionOnGrid truth = default_true_model(linspace(0.0, 1.0, cfg.grid_size)).beta;
    detail::write_text(out_path("beta_mean.csv"), detail::beta_mean_csv(cells, truth));
    json jc = json::array();
    double identity_max = 0.0;
    for (const auto& c : cells) {
      jc.push_back(detail::cell_to_json(c));
      identity_max = std::max(identity_max,
                              std::abs(c.beta.imse - (c.beta.isb + c.beta.ivar)));
      identity_max =
          std::max(identity_max, std::abs(c.eta.imse - (c.eta.isb + c.eta.ivar)));
    }
    results["cells"] = jc;
    results["identity_max_abs_error"] = identity_max;
    results["table1"] = "table1.csv";
    results["beta_mean"] = "beta_mean.csv";
  } else if (cfg.mode == "rate-check") {
    const RateCheckResult rc = run_rate_check_cells(cfg);
    detail::write_text(out_path("ratios.csv"), detail::ratios_csv(rc.ratios, rc.cells));
    json jc = json::array();
    double identity_max = 0.0;
    for (const auto& c : rc.cells) {
      jc.push_back(detail::cell_to_json(c));
      identity_max =
          std::max(identity_max, std::abs(c.eta.imse - (c.eta.isb + c.eta.ivar)));
    }
    json jr = json::array();
    for (const auto& r : rc.ratios)
      jr.push_back({{"n_small", r.n_small},
                    {"n_large", r.n_large},
                    {"sqrt_ivar_ratio", r.sqrt_ivar_ratio}});
    results["cells"] = jc;
    results["ratios"] = jr;
    results["identity_max_abs_error"] = identity_max;
    results["fixed_n_obs"] = rc.fixed_n_obs;
    results["calibration_bandwidths"] = {{"h_t", rc.calibration_spec.h_t},
                                         {"h_y", rc.calibration_spec.h_y},
                                         {"h_mu", rc.calibration_spec.h_mu},
                                         {"h_phi", rc.calibration_spec.h_phi}};
    results["ratios_file"] = "ratios.csv";
  } else if (cfg.mode == "link") {
    const LongitudinalDataset data = cfg.interval_set
        ? ingest_csv(cfg.data_path, cfg.interval_min, cfg.interval_max)
        : [&] {
            LongitudinalDataset probe = ingest_csv(cfg.data_path, -1e300, 1e300);
            auto [lo, hi] = observed_time_range(probe);
            probe.t_min = lo;
            probe.t_max = hi;
            return probe;
          }();
    const Eigen::VectorXd grid = linspace(data.t_min, data.t_max, cfg.grid_size);
    const SmootherSpec spec = resolve_spec(cfg, data);
    const EdrFit f = fit(data, spec, grid, cfg.fve, cfg.k, !cfg.exclude_diagonal_pairs);
    const Eigen::MatrixXd indices = subject_indices(f, data);
    Eigen::VectorXd responses(data.n());
    for (int i = 0; i < data.n(); ++i) responses[i] = data.subjects[i].response;
    const LinkFit link = fit_link(indices, responses);

    // probe surface over the training bounding box
    std::string surf = "index1,index2,fitted\n";
    const int probes = cfg.k == 2 ? 20 : 100;
    const Eigen::VectorXd lo = indices.colwise().minCoeff().transpose();
    const Eigen::VectorXd hi = indices.colwise().maxCoeff().transpose();
    if (cfg.k == 1) {
      Eigen::MatrixXd at(probes, 1);
      at.col(0) = linspace(lo[0], hi[0], probes);
      const LinkPrediction pred = predict_link(link, at);
      for (int i = 0; i < probes; ++i)
        surf += detail::format_sig(at(i, 0)) + ",0," + detail::format_sig(pred.values[i]) + "\n";
    } else {
      const Eigen::VectorXd g1 = linspace(lo[0], hi[0], probes);
      const Eigen::VectorXd g2 = linspace(lo[1], hi[1], probes);
      Eigen::MatrixXd at(probes * probes, 2);
      int row = 0;
      for (int a = 0; a < probes; ++a)
        for (int b = 0; b < probes; ++b) {
          at(row, 0) = g1[a];
          at(row, 1) = g2[b];
          ++row;
        }
      const LinkPrediction pred = predict_link(link, at);
      for (int r = 0; r < at.rows(); ++r)
        surf += detail::format_sig(at(r, 0)) + "," + detail::format_sig(at(r, 1)) + "," +
                detail::format_sig(pred.values[r]) + "\n";
    }
    detail::write_text(out_path("surface.csv"), surf);

    results["n"] = data.n();
    results["k"] = cfg.k;
    results["fitted_error"] = link.fitted_error;
    std::vector<double> bw(link.bandwidths.data(),
                           link.bandwidths.data() + link.bandwidths.size());
    results["link_bandwidths"] = bw;
    results["lambda"] = std::vector<double>(f.eigenvalues.data(),
                                            f.eigenvalues.data() + f.eigenvalues.size());
    results["retained_rank"] = f.retained_rank;
    results["fve_achieved"] = f.fve;
    results["surface"] = "surface.csv";
    results["diagnostics"] = {{"widened", link.diag.widened},
                              {"degenerate", link.diag.degenerate}};
  }

  doc["results"] = results;
  detail::write_text(out_path("results.json"), doc.dump(2) + "\n");
  return doc;
}

}  // namespace fsir
