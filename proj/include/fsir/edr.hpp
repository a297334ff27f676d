#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "fsir/dataset.hpp"
#include "fsir/errors.hpp"
#include "fsir/grid_function.hpp"
#include "fsir/operators.hpp"
#include "fsir/smoothers.hpp"

namespace fsir {

struct EdrDiagnostics {
  SmootherDiagnostics smoother;           // widening / reduced-order counts
  double gamma_condition = 0.0;           // ratio of retained extreme eigenvalues
  Eigen::VectorXd gamma_eigenvalues;      // retained spectrum of the covariance
  Eigen::VectorXd m_eigenvalues;          // nonnegative spectrum of the target operator
  Eigen::VectorXd m_cumulative_fraction;  // FVE profile of the target operator
  double eta_orthonormality_error = 0.0;  // max |<eta_i, eta_j> - delta_ij|
  double beta_gamma_error = 0.0;          // max |<beta_i, Gamma beta_j> - delta_ij|
};

// Estimated effective dimension reduction structure. eta holds the
// standardized directions (unit L2 norm, mutually orthonormal); beta holds
// the raw directions, orthonormal with respect to the estimated covariance.
struct EdrFit {
  Eigen::VectorXd eigenvalues;       // top-k, descending
  std::vector<FunctionOnGrid> eta;   // k standardized directions
  std::vector<FunctionOnGrid> beta;  // k raw directions
  int retained_rank = 0;             // rank L kept by the covariance truncation
  double fve = 0.0;                  // variance fraction kept by that truncation
  int k = 0;
  EdrDiagnostics diagnostics;
};

// Core eigen-analysis once the two covariance operators are available:
// whiten the inverse-regression covariance by the regularized inverse square
// root of the trajectory covariance, take the leading k eigenfunctions, and
// map them back through the inverse square root.
inline EdrFit fit_from_operators(const OperatorMatrix& gamma, const OperatorMatrix& gamma_e,
                                 double fve_threshold, int k) {
  require_same_grid(gamma.grid, gamma_e.grid, "covariance operators");
  if (k < 1) throw Error(ErrorKind::ConfigInvalid, "k must be at least 1", "k");

  auto [inv_sqrt, dec] = regularized_inv_sqrt(gamma, fve_threshold);
  if (k > dec.retained_rank)
    throw Error(ErrorKind::RankTooSmall,
                "k=" + std::to_string(k) + " exceeds the retained rank L=" +
                    std::to_string(dec.retained_rank));

  const double dt = grid_spacing(gamma.grid);
  const Eigen::Index p = gamma.grid.size();
  // Euclidean-convention inverse square root of the weighted matrix.
  Eigen::MatrixXd s = inv_sqrt.values * dt;
  Eigen::MatrixXd m = s * (dt * gamma_e.values) * s;
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::ConfigInvalid, "eigendecomposition of the target operator failed");

  Eigen::VectorXd lambda(p);
  Eigen::MatrixXd w(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    lambda[i] = solver.eigenvalues()[p - 1 - i];
    w.col(i) = solver.eigenvectors().col(p - 1 - i);
  }
  detail::canonicalize_sign(w);

  if (!(lambda[0] > 0.0) || lambda[k - 1] <= lambda[0] * detail::kEigenFloor)
    throw Error(ErrorKind::RankTooSmall,
                "target operator has effective rank below k=" + std::to_string(k));

  EdrFit fit;
  fit.k = k;
  fit.retained_rank = dec.retained_rank;
  fit.fve = dec.fve;
  fit.eigenvalues = lambda.head(k);
  const double root_dt = std::sqrt(dt);
  for (int j = 0; j < k; ++j) {
    FunctionOnGrid eta{gamma.grid, w.col(j) / root_dt};
    FunctionOnGrid beta{gamma.grid, s * w.col(j) / root_dt};
    fit.eta.push_back(std::move(eta));
    fit.beta.push_back(std::move(beta));
  }

  auto& d = fit.diagnostics;
  d.gamma_eigenvalues = dec.eigenvalues;
  d.gamma_condition = dec.eigenvalues[0] / dec.eigenvalues[dec.retained_rank - 1];
  Eigen::Index n_pos = 0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < p; ++i)
    if (lambda[i] > lambda[0] * detail::kEigenFloor) {
      ++n_pos;
      total += lambda[i];
    }
  d.m_eigenvalues = lambda.head(n_pos);
  d.m_cumulative_fraction.resize(n_pos);
  double cum = 0.0;
  for (Eigen::Index i = 0; i < n_pos; ++i) {
    cum += lambda[i];
    d.m_cumulative_fraction[i] = cum / total;
  }
  for (int a = 0; a < k; ++a)
    for (int b = a; b < k; ++b) {
      const double target = a == b ? 1.0 : 0.0;
      d.eta_orthonormality_error =
          std::max(d.eta_orthonormality_error,
                   std::abs(fit.eta[a].values.dot(fit.eta[b].values) * dt - target));
      d.beta_gamma_error = std::max(
          d.beta_gamma_error,
          std::abs(fit.beta[a].values.dot(gamma.values * fit.beta[b].values) * dt * dt - target));
    }
  return fit;
}

// Full estimation from raw longitudinal data.
inline EdrFit fit(const LongitudinalDataset& data, const SmootherSpec& spec,
                  const Eigen::VectorXd& grid, double fve_threshold, int k,
                  bool include_diagonal = true) {
  validate_dataset(data);
  validate_spec(spec, data);
  SmootherDiagnostics sd;
  OperatorMatrix gamma = estimate_gamma(data, spec, grid, &sd, include_diagonal);
  OperatorMatrix gamma_e = estimate_gamma_e(data, spec, grid, &sd);
  EdrFit out = fit_from_operators(gamma, gamma_e, fve_threshold, k);
  out.diagnostics.smoother = sd;
  return out;
}

// Estimated indices <beta_j, X> for one trajectory on the fit grid,
// integrated with the trapezoid rule.
inline Eigen::VectorXd project(const EdrFit& fit, const FunctionOnGrid& trajectory) {
  if (fit.beta.empty()) throw Error(ErrorKind::ConfigInvalid, "fit holds no directions");
  require_same_grid(fit.beta[0].grid, trajectory.grid, "projection");
  Eigen::VectorXd idx(fit.k);
  for (int j = 0; j < fit.k; ++j) idx[j] = inner_trapz(fit.beta[j], trajectory);
  return idx;
}

// Flip direction j (both beta and eta) so that <beta_j, reference> >= 0.
// A zero inner product leaves the direction unchanged.
inline EdrFit sign_align(EdrFit fit, const FunctionOnGrid& reference, int j) {
  if (j < 0 || j >= fit.k)
    throw Error(ErrorKind::ConfigInvalid, "direction index out of range", "j");
  require_same_grid(fit.beta[j].grid, reference.grid, "sign alignment");
  const double ip = inner_trapz(fit.beta[j], reference);
  if (ip < 0.0) {
    fit.beta[j].values = -fit.beta[j].values;
    fit.eta[j].values = -fit.eta[j].values;
  }
  return fit;
}

}  // namespace fsir
