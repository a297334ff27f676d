#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "fsir/errors.hpp"
#include "fsir/kernels.hpp"
#include "fsir/smoothers.hpp"

namespace fsir {

// Nonparametric regression of the response on one or two estimated indices
// (local linear, product kernel). Fitted values are leave-in: the fit at a
// training point uses all training points including itself.
struct LinkFit {
  Eigen::MatrixXd indices;    // n x k training index points
  Eigen::VectorXd responses;  // n
  Eigen::VectorXd fitted;     // n leave-in fitted values
  Eigen::VectorXd bandwidths; // per index axis
  double fitted_error = 0.0;  // mean squared residual of the fitted values
  Kernel1D kernel = Kernel1D::epanechnikov();
  SmootherDiagnostics diag;
};

struct LinkPrediction {
  Eigen::VectorXd values;
  std::vector<bool> extrapolated;  // outside the training bounding box
  SmootherDiagnostics diag;
};

namespace detail {

inline void check_link_dims(const Eigen::MatrixXd& indices, int k_expected = 0) {
  const int k = static_cast<int>(indices.cols());
  if (k < 1 || k > 2)
    throw Error(ErrorKind::ConfigInvalid, "link regression supports 1 or 2 indices", "k");
  if (k_expected != 0 && k != k_expected)
    throw Error(ErrorKind::ConfigInvalid, "index dimension mismatch", "indices");
}

inline Eigen::VectorXd link_eval(const LinkFit& fit, const Eigen::MatrixXd& at,
                                 SmootherDiagnostics* diag) {
  const int k = static_cast<int>(fit.indices.cols());
  const int n = static_cast<int>(fit.indices.rows());
  Eigen::VectorXd out(at.rows());
  if (k == 1) {
    std::vector<Point1> pts(n);
    for (int i = 0; i < n; ++i) pts[i] = Point1{fit.indices(i, 0), fit.responses[i], 1.0};
    std::sort(pts.begin(), pts.end(), point1_less);
    for (Eigen::Index r = 0; r < at.rows(); ++r) {
      EvalStatus st;
      out[r] = eval_point_1d(pts, fit.kernel, fit.bandwidths[0], at(r, 0), &st);
      if (diag) {
        if (st.widened) ++diag->widened;
        if (st.degenerate) ++diag->degenerate;
      }
    }
  } else {
    std::vector<Point2> pts(n);
    for (int i = 0; i < n; ++i)
      pts[i] = Point2{fit.indices(i, 0), fit.indices(i, 1), fit.responses[i], 1.0};
    std::sort(pts.begin(), pts.end(), point2_less);
    const Kernel2D k2{fit.kernel, fit.kernel};
    for (Eigen::Index r = 0; r < at.rows(); ++r) {
      EvalStatus st;
      out[r] = eval_point_2d(pts, k2, fit.bandwidths[0], fit.bandwidths[1], at(r, 0), at(r, 1),
                             &st);
      if (diag) {
        if (st.widened) ++diag->widened;
        if (st.degenerate) ++diag->degenerate;
      }
    }
  }
  return out;
}

}  // namespace detail

// Default per-axis bandwidth: sd(index_j) * n^(-1/6).
inline Eigen::VectorXd link_auto_bandwidths(const Eigen::MatrixXd& indices) {
  detail::check_link_dims(indices);
  const double n = static_cast<double>(indices.rows());
  Eigen::VectorXd h(indices.cols());
  for (Eigen::Index j = 0; j < indices.cols(); ++j) {
    const double mean = indices.col(j).mean();
    const double var = (indices.col(j).array() - mean).square().sum() / n;
    const double sd = std::sqrt(var);
    if (!(sd > 0.0))
      throw Error(ErrorKind::DegenerateVariance,
                  "index axis " + std::to_string(j + 1) + " has zero spread");
    h[j] = sd * std::pow(n, -1.0 / 6.0);
  }
  return h;
}

inline LinkFit fit_link(const Eigen::MatrixXd& indices, const Eigen::VectorXd& responses,
                        Eigen::VectorXd bandwidths = Eigen::VectorXd(),
                        Kernel1D kernel = Kernel1D::epanechnikov()) {
  detail::check_link_dims(indices);
  const int n = static_cast<int>(indices.rows());
  const int k = static_cast<int>(indices.cols());
  if (responses.size() != n)
    throw Error(ErrorKind::ConfigInvalid, "indices/responses size mismatch", "responses");
  if (n < 3 * (k + 1))
    throw Error(ErrorKind::ConfigInvalid,
                "need at least " + std::to_string(3 * (k + 1)) + " observations", "indices");
  LinkFit fit;
  fit.indices = indices;
  fit.responses = responses;
  fit.kernel = kernel;
  if (bandwidths.size() == 0) {
    fit.bandwidths = link_auto_bandwidths(indices);
  } else {
    if (bandwidths.size() != k)
      throw Error(ErrorKind::ConfigInvalid, "one bandwidth per index axis", "bandwidths");
    for (Eigen::Index j = 0; j < k; ++j)
      if (!(bandwidths[j] > 0.0))
        throw Error(ErrorKind::ConfigInvalid, "bandwidths must be positive", "bandwidths");
    fit.bandwidths = bandwidths;
  }
  fit.fitted = detail::link_eval(fit, indices, &fit.diag);
  fit.fitted_error =
      (fit.fitted - responses).squaredNorm() / static_cast<double>(n);
  return fit;
}

// Evaluate the fitted link at new index points. Points outside the training
// bounding box are evaluated anyway (the local fit extrapolates) but flagged.
inline LinkPrediction predict_link(const LinkFit& fit, const Eigen::MatrixXd& new_indices) {
  detail::check_link_dims(new_indices, static_cast<int>(fit.indices.cols()));
  LinkPrediction pred;
  pred.values = detail::link_eval(fit, new_indices, &pred.diag);
  pred.extrapolated.resize(static_cast<std::size_t>(new_indices.rows()));
  Eigen::VectorXd lo = fit.indices.colwise().minCoeff().transpose();
  Eigen::VectorXd hi = fit.indices.colwise().maxCoeff().transpose();
  for (Eigen::Index r = 0; r < new_indices.rows(); ++r) {
    bool outside = false;
    for (Eigen::Index j = 0; j < new_indices.cols(); ++j)
      if (new_indices(r, j) < lo[j] || new_indices(r, j) > hi[j]) outside = true;
    pred.extrapolated[static_cast<std::size_t>(r)] = outside;
  }
  return pred;
}

// Held-out squared-error search over joint bandwidth scales, folds cut by row
// index.
inline CvResult cv_bandwidth_link(const Eigen::MatrixXd& indices,
                                  const Eigen::VectorXd& responses,
                                  const std::vector<double>& scales, int n_folds = 5,
                                  Kernel1D kernel = Kernel1D::epanechnikov()) {
  detail::check_link_dims(indices);
  if (scales.empty()) throw Error(ErrorKind::ConfigInvalid, "no scale candidates", "candidates");
  const int n = static_cast<int>(indices.rows());
  n_folds = std::max(2, std::min(n_folds, n));
  const Eigen::VectorXd base = link_auto_bandwidths(indices);
  CvResult out;
  out.candidates = scales;
  out.scores.assign(scales.size(), std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < scales.size(); ++c) {
    if (!(scales[c] > 0.0))
      throw Error(ErrorKind::ConfigInvalid, "scale must be positive", "candidates");
    double sse = 0.0;
    long used = 0;
    for (int fold = 0; fold < n_folds; ++fold) {
      std::vector<int> train_rows;
      for (int i = 0; i < n; ++i)
        if (i % n_folds != fold) train_rows.push_back(i);
      if (static_cast<int>(train_rows.size()) < 3 * (static_cast<int>(indices.cols()) + 1))
        continue;
      Eigen::MatrixXd tr_idx(train_rows.size(), indices.cols());
      Eigen::VectorXd tr_y(train_rows.size());
      for (std::size_t r = 0; r < train_rows.size(); ++r) {
        tr_idx.row(static_cast<Eigen::Index>(r)) = indices.row(train_rows[r]);
        tr_y[static_cast<Eigen::Index>(r)] = responses[train_rows[r]];
      }
      LinkFit fit = fit_link(tr_idx, tr_y, base * scales[c], kernel);
      for (int i = fold; i < n; i += n_folds) {
        try {
          LinkPrediction p = predict_link(fit, indices.row(i));
          const double r = p.values[0] - responses[i];
          sse += r * r;
          ++used;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::EmptyWindow) throw;
        }
      }
    }
    if (used > 0) out.scores[c] = sse / static_cast<double>(used);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < scales.size(); ++c)
    if (out.scores[c] < out.scores[best]) best = c;
  out.best = scales[best];
  return out;
}

}  // namespace fsir
