#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "fsir/errors.hpp"

namespace fsir {

// A real function sampled on an ordered grid. Grids are value types; helpers
// that combine two functions require bitwise-identical grids.
struct FunctionOnGrid {
  Eigen::VectorXd grid;
  Eigen::VectorXd values;
};

inline Eigen::VectorXd linspace(double a, double b, int p) {
  if (p < 2) throw Error(ErrorKind::ConfigInvalid, "linspace needs at least 2 points", "grid_size");
  Eigen::VectorXd g(p);
  for (int i = 0; i < p; ++i) g[i] = a + (b - a) * static_cast<double>(i) / (p - 1);
  g[p - 1] = b;
  return g;
}

inline bool same_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size()) return false;
  for (Eigen::Index i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

inline void require_same_grid(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                              const char* what) {
  if (!same_grid(a, b))
    throw Error(ErrorKind::GridMismatch, std::string("grids differ in ") + what);
}

// Mean spacing; the estimators assume (near-)uniform grids.
inline double grid_spacing(const Eigen::VectorXd& grid) {
  if (grid.size() < 2) throw Error(ErrorKind::ConfigInvalid, "grid needs at least 2 points");
  return (grid[grid.size() - 1] - grid[0]) / static_cast<double>(grid.size() - 1);
}

// Trapezoid rule over the full grid.
inline double trapz(const Eigen::VectorXd& grid, const Eigen::VectorXd& v) {
  if (grid.size() != v.size())
    throw Error(ErrorKind::GridMismatch, "trapz: grid/value length mismatch");
  double s = 0.0;
  for (Eigen::Index j = 0; j + 1 < grid.size(); ++j)
    s += 0.5 * (v[j] + v[j + 1]) * (grid[j + 1] - grid[j]);
  return s;
}

// Left Riemann sum: sum_{j<p-1} v_j * (t_{j+1} - t_j). The last grid value
// carries no weight.
inline double riemann_left(const Eigen::VectorXd& grid, const Eigen::VectorXd& v) {
  if (grid.size() != v.size())
    throw Error(ErrorKind::GridMismatch, "riemann_left: grid/value length mismatch");
  double s = 0.0;
  for (Eigen::Index j = 0; j + 1 < grid.size(); ++j) s += v[j] * (grid[j + 1] - grid[j]);
  return s;
}

inline double inner_trapz(const FunctionOnGrid& f, const FunctionOnGrid& g) {
  require_same_grid(f.grid, g.grid, "inner product");
  return trapz(f.grid, (f.values.array() * g.values.array()).matrix());
}

inline double l2_norm(const FunctionOnGrid& f) {
  return std::sqrt(trapz(f.grid, (f.values.array() * f.values.array()).matrix()));
}

inline FunctionOnGrid normalize_l2(FunctionOnGrid f) {
  double nrm = l2_norm(f);
  if (!(nrm > 0.0) || !std::isfinite(nrm))
    throw Error(ErrorKind::DegenerateVariance, "cannot normalize a zero function");
  f.values /= nrm;
  return f;
}

// Piecewise-linear interpolation; clamps outside the grid range.
inline double linear_interp(const Eigen::VectorXd& grid, const Eigen::VectorXd& v, double t) {
  const Eigen::Index p = grid.size();
  if (t <= grid[0]) return v[0];
  if (t >= grid[p - 1]) return v[p - 1];
  Eigen::Index lo = 0, hi = p - 1;
  while (hi - lo > 1) {
    Eigen::Index mid = (lo + hi) / 2;
    if (grid[mid] <= t) lo = mid; else hi = mid;
  }
  double w = (t - grid[lo]) / (grid[hi] - grid[lo]);
  return (1.0 - w) * v[lo] + w * v[hi];
}

inline double pearson_correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw Error(ErrorKind::ConfigInvalid, "correlation needs two equally sized vectors");
  const double n = static_cast<double>(a.size());
  const double ma = a.mean(), mb = b.mean();
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  saa /= n; sbb /= n; sab /= n;
  if (saa <= 1e-30 || sbb <= 1e-30)
    throw Error(ErrorKind::DegenerateVariance, "correlation of a constant vector");
  return sab / std::sqrt(saa * sbb);
}

}  // namespace fsir
