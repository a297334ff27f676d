#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "fsir/dataset.hpp"
#include "fsir/errors.hpp"
#include "fsir/grid_function.hpp"
#include "fsir/rng.hpp"

namespace fsir {

// Synthetic-data configuration. Subject i draws its Brownian path, response
// noise, and sparse design from substreams keyed by (seed, role, i), so the
// first m subjects are identical for any n >= m and any worker count.
struct SimConfig {
  int n = 100;
  int grid_size = 31;
  double t_begin = 0.0;
  double t_end = 1.0;
  double noise_sd = 0.1;
  int n_obs_min = 2;
  int n_obs_max = 10;
  int fixed_n_obs = 0;  // 0 = draw N_i uniformly from [n_obs_min, n_obs_max]
  std::uint64_t seed = 1;
};

inline void validate_sim_config(const SimConfig& cfg) {
  if (cfg.n < 1) throw Error(ErrorKind::ConfigInvalid, "n must be at least 1", "n");
  if (cfg.grid_size < 3)
    throw Error(ErrorKind::ConfigInvalid, "grid_size must be at least 3", "grid_size");
  if (!(cfg.t_end > cfg.t_begin))
    throw Error(ErrorKind::ConfigInvalid, "time interval is empty", "interval");
  if (cfg.noise_sd < 0.0)
    throw Error(ErrorKind::ConfigInvalid, "noise_sd must be nonnegative", "noise_sd");
  const int avail = cfg.grid_size - 1;  // index 0 is never sampled
  if (cfg.fixed_n_obs != 0) {
    if (cfg.fixed_n_obs < 1 || cfg.fixed_n_obs > avail)
      throw Error(ErrorKind::ConfigInvalid,
                  "fixed_n_obs must lie in [1, grid_size-1]", "fixed_n_obs");
  } else {
    if (cfg.n_obs_min < 1 || cfg.n_obs_max < cfg.n_obs_min || cfg.n_obs_max > avail)
      throw Error(ErrorKind::ConfigInvalid,
                  "need 1 <= n_obs_min <= n_obs_max <= grid_size-1", "n_obs_range");
  }
}

// Dense trajectories on a shared grid; row i is subject i.
struct TrajectorySet {
  Eigen::VectorXd grid;
  Eigen::MatrixXd paths;
};

// Standard Brownian motion started at 0, sampled by independent Gaussian
// increments over the grid steps.
inline TrajectorySet simulate_brownian(const SimConfig& cfg) {
  validate_sim_config(cfg);
  TrajectorySet out;
  out.grid = linspace(cfg.t_begin, cfg.t_end, cfg.grid_size);
  out.paths.resize(cfg.n, cfg.grid_size);
  for (int i = 0; i < cfg.n; ++i) {
    rng::Stream stream(rng::derive_key(cfg.seed, rng::Tag::path, static_cast<std::uint64_t>(i)));
    out.paths(i, 0) = 0.0;
    for (int j = 1; j < cfg.grid_size; ++j) {
      const double dt = out.grid[j] - out.grid[j - 1];
      out.paths(i, j) = out.paths(i, j - 1) + std::sqrt(dt) * stream.normal();
    }
  }
  return out;
}

// Single-index response model y = offset + exp(<beta, x>) + noise.
struct TrueModel {
  FunctionOnGrid beta;
  double link_offset = 3.0;

  double link(double index) const { return link_offset + std::exp(index); }
};

// Default coefficient function sqrt(2) sin(3 pi t / 2); has unit L2 norm on
// [0, 1].
inline TrueModel default_true_model(const Eigen::VectorXd& grid) {
  TrueModel model;
  model.beta.grid = grid;
  model.beta.values.resize(grid.size());
  for (Eigen::Index j = 0; j < grid.size(); ++j)
    model.beta.values[j] = std::sqrt(2.0) * std::sin(1.5 * M_PI * grid[j]);
  return model;
}

// Responses y_i = link(<beta, X_i>) + noise, with the index integrated by the
// trapezoid rule on the grid.
inline Eigen::VectorXd generate_responses(const TrajectorySet& trajectories,
                                          const TrueModel& model, const SimConfig& cfg) {
  require_same_grid(trajectories.grid, model.beta.grid, "response generation");
  const int n = static_cast<int>(trajectories.paths.rows());
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    const double index =
        trapz(trajectories.grid,
              (trajectories.paths.row(i).transpose().array() * model.beta.values.array())
                  .matrix());
    double eps = 0.0;
    if (cfg.noise_sd > 0.0) {
      rng::Stream stream(
          rng::derive_key(cfg.seed, rng::Tag::noise, static_cast<std::uint64_t>(i)));
      eps = cfg.noise_sd * stream.normal();
    }
    y[i] = model.link(index) + eps;
  }
  return y;
}

// Intermittent design: subject i keeps N_i grid values drawn uniformly
// without replacement from indices {1, ..., grid_size-1}; index 0 is never
// observed.
inline LongitudinalDataset sparsify(const TrajectorySet& trajectories,
                                    const Eigen::VectorXd& responses, const SimConfig& cfg) {
  validate_sim_config(cfg);
  const int n = static_cast<int>(trajectories.paths.rows());
  if (responses.size() != n)
    throw Error(ErrorKind::ConfigInvalid, "responses/trajectories size mismatch", "responses");
  const int p = static_cast<int>(trajectories.grid.size());
  LongitudinalDataset data;
  data.t_min = trajectories.grid[0];
  data.t_max = trajectories.grid[p - 1];
  data.subjects.reserve(n);
  for (int i = 0; i < n; ++i) {
    rng::Stream stream(
        rng::derive_key(cfg.seed, rng::Tag::design, static_cast<std::uint64_t>(i)));
    const int n_obs = cfg.fixed_n_obs != 0 ? cfg.fixed_n_obs
                                           : stream.uniform_int(cfg.n_obs_min, cfg.n_obs_max);
    const std::vector<int> idx = stream.sample_without_replacement(1, p - 1, n_obs);
    Subject s;
    s.id = std::to_string(i + 1);
    s.response = responses[i];
    s.times.resize(n_obs);
    s.values.resize(n_obs);
    for (int j = 0; j < n_obs; ++j) {
      s.times[j] = trajectories.grid[idx[j]];
      s.values[j] = trajectories.paths(i, idx[j]);
    }
    data.subjects.push_back(std::move(s));
  }
  return data;
}

// Complete design: every subject observed at grid indices 1..grid_size-1
// (index 0 excluded, matching the sparse design's support).
inline LongitudinalDataset complete_dataset(const TrajectorySet& trajectories,
                                            const Eigen::VectorXd& responses) {
  const int n = static_cast<int>(trajectories.paths.rows());
  if (responses.size() != n)
    throw Error(ErrorKind::ConfigInvalid, "responses/trajectories size mismatch", "responses");
  const int p = static_cast<int>(trajectories.grid.size());
  LongitudinalDataset data;
  data.t_min = trajectories.grid[0];
  data.t_max = trajectories.grid[p - 1];
  data.subjects.reserve(n);
  for (int i = 0; i < n; ++i) {
    Subject s;
    s.id = std::to_string(i + 1);
    s.response = responses[i];
    s.times.resize(p - 1);
    s.values.resize(p - 1);
    for (int j = 1; j < p; ++j) {
      s.times[j - 1] = trajectories.grid[j];
      s.values[j - 1] = trajectories.paths(i, j);
    }
    data.subjects.push_back(std::move(s));
  }
  return data;
}

}  // namespace fsir
