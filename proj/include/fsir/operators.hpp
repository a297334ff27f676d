#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "fsir/dataset.hpp"
#include "fsir/errors.hpp"
#include "fsir/grid_function.hpp"
#include "fsir/smoothers.hpp"

namespace fsir {

enum class OperatorKind { gamma, gamma_e, inv_sqrt, generic };

// Integral-operator kernel sampled on grid x grid: values(i, j) = K(t_i, t_j).
// Compositions and inner products carry one grid-spacing factor per
// integration, so matrix eigen-analysis of spacing * values approximates the
// L2 operator eigenproblem.
struct OperatorMatrix {
  Eigen::VectorXd grid;
  Eigen::MatrixXd values;
  OperatorKind kind = OperatorKind::generic;
};

// Truncated spectrum of a covariance operator. Eigenvalues are in operator
// (L2) scaling; eigenvector columns are function values with unit L2 norm,
// i.e. orthonormal under the spacing-weighted Euclidean inner product.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;   // retained, descending
  Eigen::MatrixXd eigenvectors;  // p x L
  double fve = 0.0;              // fraction of positive variance retained
  int retained_rank = 0;
};

// Kernel of the composition A o B (one integration between them).
inline OperatorMatrix compose(const OperatorMatrix& a, const OperatorMatrix& b) {
  require_same_grid(a.grid, b.grid, "operator composition");
  OperatorMatrix out;
  out.grid = a.grid;
  out.values = a.values * b.values * grid_spacing(a.grid);
  return out;
}

// Operator applied to a function: (A f)(s) = sum_j A(s, t_j) f(t_j) dt.
inline FunctionOnGrid apply_operator(const OperatorMatrix& a, const FunctionOnGrid& f) {
  require_same_grid(a.grid, f.grid, "operator application");
  return FunctionOnGrid{a.grid, a.values * f.values * grid_spacing(a.grid)};
}

// L2 bilinear form <f, A g>.
inline double operator_form(const OperatorMatrix& a, const FunctionOnGrid& f,
                            const FunctionOnGrid& g) {
  require_same_grid(a.grid, f.grid, "operator form");
  require_same_grid(a.grid, g.grid, "operator form");
  const double dt = grid_spacing(a.grid);
  return f.values.dot(a.values * g.values) * dt * dt;
}

namespace detail {

// Fix eigenvector signs (largest-|entry| coordinate positive) so downstream
// output does not depend on solver sign conventions.
inline void canonicalize_sign(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double a = std::abs(vectors(r, c));
      if (a > best) { best = a; arg = r; }
    }
    if (vectors(arg, c) < 0.0) vectors.col(c) = -vectors.col(c);
  }
}

// Descending eigendecomposition of the spacing-weighted symmetric matrix.
inline void operator_eigen(const OperatorMatrix& op, Eigen::VectorXd* eigenvalues,
                           Eigen::MatrixXd* eigenvectors) {
  const double dt = grid_spacing(op.grid);
  Eigen::MatrixXd sym = 0.5 * dt * (op.values + op.values.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::ConfigInvalid, "eigendecomposition failed");
  const Eigen::Index p = op.grid.size();
  eigenvalues->resize(p);
  eigenvectors->resize(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    (*eigenvalues)[i] = solver.eigenvalues()[p - 1 - i];
    eigenvectors->col(i) = solver.eigenvectors().col(p - 1 - i);
  }
  canonicalize_sign(*eigenvectors);
}

constexpr double kEigenFloor = 1e-12;  // relative floor separating rank from noise
constexpr double kTieTol = 1e-9;       // relative tie width at the FVE boundary

}  // namespace detail

// Covariance of the trajectory process: smoothed cross products minus the
// outer product of the smoothed mean, symmetrized.
inline OperatorMatrix estimate_gamma(const LongitudinalDataset& data, const SmootherSpec& spec,
                                     const Eigen::VectorXd& grid,
                                     SmootherDiagnostics* diag = nullptr,
                                     bool include_diagonal = true) {
  validate_dataset(data);
  auto mu = smooth_mean(data, spec, grid);
  auto phi = cross_product_smoother(data, spec, grid, include_diagonal);
  if (diag) {
    diag->absorb(mu.diag);
    diag->absorb(phi.diag);
  }
  OperatorMatrix out;
  out.grid = grid;
  out.values = phi.values - mu.fn.values * mu.fn.values.transpose();
  out.values = 0.5 * (out.values + out.values.transpose()).eval();
  out.kind = OperatorKind::gamma;
  return out;
}

// Covariance of the inverse regression curve E[X(.) | Y]: empirical
// covariance (1/n normalization) of the smoothed surface columns, one per
// subject. Positive semidefinite by construction.
inline OperatorMatrix estimate_gamma_e(const LongitudinalDataset& data, const SmootherSpec& spec,
                                       const Eigen::VectorXd& grid,
                                       SmootherDiagnostics* diag = nullptr) {
  validate_dataset(data);
  auto surface = inverse_regression_surface(data, spec, grid);
  if (diag) diag->absorb(surface.diag);
  const Eigen::VectorXd mbar = surface.values.rowwise().mean();
  Eigen::MatrixXd centered = surface.values.colwise() - mbar;
  OperatorMatrix out;
  out.grid = grid;
  out.values = centered * centered.transpose() / static_cast<double>(data.n());
  out.kind = OperatorKind::gamma_e;
  return out;
}

// Moore-Penrose inverse square root truncated by fraction of variance
// explained. Nonpositive eigenvalues (relative to the leading one) are
// discarded; the retained rank is the smallest L whose positive-eigenvalue
// cumulative fraction reaches the threshold, extended across exact ties.
inline std::pair<OperatorMatrix, SpectralDecomposition> regularized_inv_sqrt(
    const OperatorMatrix& gamma, double fve_threshold) {
  if (!(fve_threshold > 0.0) || fve_threshold > 1.0)
    throw Error(ErrorKind::ConfigInvalid, "fve threshold must lie in (0, 1]", "fve");
  Eigen::VectorXd xi;
  Eigen::MatrixXd u;
  detail::operator_eigen(gamma, &xi, &u);
  const Eigen::Index p = xi.size();

  Eigen::Index n_pos = 0;
  const double floor = xi[0] > 0.0 ? xi[0] * detail::kEigenFloor : 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    if (xi[i] > floor) ++n_pos;
  if (n_pos == 0)
    throw Error(ErrorKind::AllNonpositive, "operator has no positive eigenvalues");

  double total = 0.0;
  for (Eigen::Index i = 0; i < n_pos; ++i) total += xi[i];
  Eigen::Index rank = n_pos;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < n_pos; ++i) {
    cum += xi[i];
    if (cum / total >= fve_threshold - 1e-15) {
      rank = i + 1;
      break;
    }
  }
  while (rank < n_pos && xi[rank] >= xi[rank - 1] - detail::kTieTol * xi[0]) ++rank;

  const double dt = grid_spacing(gamma.grid);
  SpectralDecomposition dec;
  dec.retained_rank = static_cast<int>(rank);
  dec.eigenvalues = xi.head(rank);
  dec.eigenvectors = u.leftCols(rank) / std::sqrt(dt);
  double kept = 0.0;
  for (Eigen::Index i = 0; i < rank; ++i) kept += xi[i];
  dec.fve = kept / total;

  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < rank; ++i)
    s.noalias() += (1.0 / std::sqrt(xi[i])) * (u.col(i) * u.col(i).transpose());
  OperatorMatrix inv;
  inv.grid = gamma.grid;
  inv.values = s / dt;
  inv.values = 0.5 * (inv.values + inv.values.transpose()).eval();
  inv.kind = OperatorKind::inv_sqrt;
  return {inv, dec};
}

}  // namespace fsir
