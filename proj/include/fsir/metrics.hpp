#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "fsir/edr.hpp"
#include "fsir/errors.hpp"
#include "fsir/grid_function.hpp"
#include "fsir/simulation.hpp"

namespace fsir {

// Monte Carlo accuracy measures over a set of estimated coefficient curves.
// All three integrals are left Riemann sums over the grid (the last grid
// value carries no weight), so IMSE = ISB + IVAR holds identically.
//
// Callers are expected to pass estimates that are sign-aligned to the truth
// and normalized to unit L2 norm.

namespace detail {

inline void check_estimates(const std::vector<FunctionOnGrid>& estimates,
                            const FunctionOnGrid& truth) {
  if (estimates.empty())
    throw Error(ErrorKind::EmptyEstimateList, "no estimates supplied");
  for (const auto& e : estimates) require_same_grid(e.grid, truth.grid, "metrics");
  if (truth.grid.size() != truth.values.size())
    throw Error(ErrorKind::GridMismatch, "truth grid/value length mismatch");
}

inline Eigen::VectorXd mean_curve(const std::vector<FunctionOnGrid>& estimates) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(estimates[0].values.size());
  for (const auto& e : estimates) m += e.values;
  return m / static_cast<double>(estimates.size());
}

}  // namespace detail

// Integrated squared bias of the pointwise mean estimate.
inline double compute_isb(const std::vector<FunctionOnGrid>& estimates,
                          const FunctionOnGrid& truth) {
  detail::check_estimates(estimates, truth);
  const Eigen::VectorXd mean = detail::mean_curve(estimates);
  const Eigen::VectorXd sq = (mean - truth.values).array().square().matrix();
  return riemann_left(truth.grid, sq);
}

// Integrated pointwise variance across estimates.
inline double compute_ivar(const std::vector<FunctionOnGrid>& estimates,
                           const FunctionOnGrid& truth) {
  detail::check_estimates(estimates, truth);
  const Eigen::Index p = truth.grid.size();
  const double ns = static_cast<double>(estimates.size());
  Eigen::VectorXd second = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd first = Eigen::VectorXd::Zero(p);
  for (const auto& e : estimates) {
    first += e.values;
    second += e.values.array().square().matrix();
  }
  first /= ns;
  second /= ns;
  const Eigen::VectorXd var = second - first.array().square().matrix();
  return riemann_left(truth.grid, var);
}

// Integrated mean squared error, averaged over estimates.
inline double compute_imse(const std::vector<FunctionOnGrid>& estimates,
                           const FunctionOnGrid& truth) {
  detail::check_estimates(estimates, truth);
  const double ns = static_cast<double>(estimates.size());
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(truth.grid.size());
  for (const auto& e : estimates) acc += (e.values - truth.values).array().square().matrix();
  return riemann_left(truth.grid, acc / ns);
}

// Absolute Pearson correlation between estimated and true single indices over
// a set of dense evaluation trajectories.
inline double projection_correlation(const FunctionOnGrid& fit_beta,
                                     const FunctionOnGrid& true_beta,
                                     const TrajectorySet& eval_paths) {
  require_same_grid(fit_beta.grid, true_beta.grid, "projection correlation");
  require_same_grid(fit_beta.grid, eval_paths.grid, "projection correlation");
  const int n = static_cast<int>(eval_paths.paths.rows());
  if (n < 2)
    throw Error(ErrorKind::ConfigInvalid, "need at least 2 evaluation paths", "eval_paths");
  Eigen::VectorXd a(n), b(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd path = eval_paths.paths.row(i).transpose();
    a[i] = trapz(eval_paths.grid, (path.array() * fit_beta.values.array()).matrix());
    b[i] = trapz(eval_paths.grid, (path.array() * true_beta.values.array()).matrix());
  }
  return std::abs(pearson_correlation(a, b));
}

struct MonteCarloSummary {
  int n_runs = 0;
  Eigen::VectorXd grid;
  Eigen::VectorXd mean_estimate;
  double isb = 0.0;
  double ivar = 0.0;
  double imse = 0.0;
  double mean_abs_correlation = 0.0;
  std::vector<double> per_run_correlations;
};

inline MonteCarloSummary summarize_runs(const std::vector<FunctionOnGrid>& estimates,
                                        const FunctionOnGrid& truth,
                                        std::vector<double> correlations = {}) {
  detail::check_estimates(estimates, truth);
  MonteCarloSummary s;
  s.n_runs = static_cast<int>(estimates.size());
  s.grid = truth.grid;
  s.mean_estimate = detail::mean_curve(estimates);
  s.isb = compute_isb(estimates, truth);
  s.ivar = compute_ivar(estimates, truth);
  s.imse = compute_imse(estimates, truth);
  s.per_run_correlations = std::move(correlations);
  if (!s.per_run_correlations.empty()) {
    double acc = 0.0;
    for (double c : s.per_run_correlations) acc += std::abs(c);
    s.mean_abs_correlation = acc / static_cast<double>(s.per_run_correlations.size());
  }
  return s;
}

// Root-IVAR ratios between consecutive sample sizes (n, 2n); a parametric
// n^(-1/2) variance decay puts each ratio near sqrt(2).
struct RateRatio {
  int n_small = 0;
  int n_large = 0;
  double sqrt_ivar_ratio = 0.0;
};

inline std::vector<RateRatio> ivar_rate_ratio(
    std::vector<std::pair<int, MonteCarloSummary>> summaries) {
  if (summaries.size() < 2)
    throw Error(ErrorKind::ConfigInvalid, "need at least two sample sizes", "summaries");
  std::sort(summaries.begin(), summaries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<RateRatio> out;
  for (std::size_t i = 0; i + 1 < summaries.size(); ++i) {
    if (summaries[i + 1].first != 2 * summaries[i].first) continue;
    const double v_small = summaries[i].second.ivar;
    const double v_large = summaries[i + 1].second.ivar;
    if (!(v_small > 0.0) || !(v_large > 0.0))
      throw Error(ErrorKind::DegenerateVariance, "nonpositive IVAR in rate ratio");
    out.push_back(RateRatio{summaries[i].first, summaries[i + 1].first,
                            std::sqrt(v_small / v_large)});
  }
  return out;
}

// Sign-align an estimate against a reference (used before averaging across
// Monte Carlo runs); a zero inner product leaves the sign untouched.
inline FunctionOnGrid align_sign_to(FunctionOnGrid estimate, const FunctionOnGrid& reference) {
  require_same_grid(estimate.grid, reference.grid, "sign alignment");
  if (inner_trapz(estimate, reference) < 0.0) estimate.values = -estimate.values;
  return estimate;
}

}  // namespace fsir
