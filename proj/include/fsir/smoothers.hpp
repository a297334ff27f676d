#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "fsir/dataset.hpp"
#include "fsir/errors.hpp"
#include "fsir/grid_function.hpp"
#include "fsir/kernels.hpp"

namespace fsir {

// Weighted scatter point on the line; w is a multiplicity/weight.
struct Point1 {
  double t = 0.0;
  double x = 0.0;
  double w = 1.0;
};

// Weighted scatter point in the plane.
struct Point2 {
  double t = 0.0;
  double y = 0.0;
  double x = 0.0;
  double w = 1.0;
};

struct SmootherDiagnostics {
  long widened = 0;     // eval points that needed window widening
  long degenerate = 0;  // eval points served by a reduced-order fallback

  void absorb(const SmootherDiagnostics& o) {
    widened += o.widened;
    degenerate += o.degenerate;
  }
};

// Bandwidth bundle for the four smoothing problems: pooled mean (h_mu),
// inverse-regression surface (h_t, h_y), and cross-product surface (h_phi).
struct SmootherSpec {
  Kernel1D kernel = Kernel1D::epanechnikov();
  double h_t = 0.0;
  double h_y = 0.0;
  double h_mu = 0.0;
  double h_phi = 0.0;

  Kernel2D kernel2() const { return Kernel2D{kernel, kernel}; }
};

// Default data-driven bandwidths. With m pooled observations over n subjects
// the surface smoothers use range * m^(-1/6) and the 1D mean smoother uses
// range * m^(-1/5), each scaled by `scale` and clamped to the axis range.
inline SmootherSpec auto_bandwidths(const LongitudinalDataset& data,
                                    Kernel1D kernel = Kernel1D::epanechnikov(),
                                    double scale = 1.0) {
  if (!(scale > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "bandwidth scale must be positive", "bandwidth_scale");
  const double m = static_cast<double>(std::max<long>(data.total_observations(), 2));
  auto [t_lo, t_hi] = observed_time_range(data);
  double range_t = t_hi - t_lo;
  if (!(range_t > 0.0)) range_t = data.t_max - data.t_min;
  auto [y_lo, y_hi] = response_range(data);
  double range_y = y_hi - y_lo;
  const double f2 = std::pow(m, -1.0 / 6.0);
  const double f1 = std::pow(m, -1.0 / 5.0);

  SmootherSpec spec;
  spec.kernel = kernel;
  spec.h_t = std::min(scale * range_t * f2, range_t);
  spec.h_phi = spec.h_t;
  spec.h_mu = std::min(scale * range_t * f1, range_t);
  // A flat response axis makes the y-kernel weights constant; any positive
  // bandwidth then yields the same fit.
  spec.h_y = range_y > 0.0 ? std::min(scale * range_y * f2, range_y) : 1.0;
  return spec;
}

inline void validate_spec(const SmootherSpec& spec, const LongitudinalDataset& data) {
  auto positive = [](double h, const char* field) {
    if (!(h > 0.0) || !std::isfinite(h))
      throw Error(ErrorKind::ConfigInvalid, "bandwidth must be positive and finite", field);
  };
  positive(spec.h_t, "h_t");
  positive(spec.h_y, "h_y");
  positive(spec.h_mu, "h_mu");
  positive(spec.h_phi, "h_phi");

  auto [t_lo, t_hi] = observed_time_range(data);
  const double range_t = std::max(t_hi - t_lo, data.t_max - data.t_min);
  auto [y_lo, y_hi] = response_range(data);
  const double range_y = y_hi - y_lo;
  if (spec.h_t > range_t)
    throw Error(ErrorKind::ConfigInvalid, "h_t exceeds the observed time range", "h_t");
  if (spec.h_phi > range_t)
    throw Error(ErrorKind::ConfigInvalid, "h_phi exceeds the observed time range", "h_phi");
  if (spec.h_mu > range_t)
    throw Error(ErrorKind::ConfigInvalid, "h_mu exceeds the observed time range", "h_mu");
  if (range_y > 0.0 && spec.h_y > range_y)
    throw Error(ErrorKind::ConfigInvalid, "h_y exceeds the response range", "h_y");
}

namespace detail {

constexpr double kWidenFactor = 1.5;
constexpr int kMaxWiden = 4;
constexpr double kRidge = 1e-12;     // relative ridge on the centered Gram
constexpr double kVarFloor = 1e-12;  // relative spread needed per regressor

inline bool point1_less(const Point1& a, const Point1& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.x != b.x) return a.x < b.x;
  return a.w < b.w;
}

inline bool point2_less(const Point2& a, const Point2& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  return a.w < b.w;
}

// Merge points sharing a time coordinate into one weighted point carrying the
// weighted-mean value. Exact for local polynomial fits: the normal equations
// only see sums of w * monomial(t) * x.
inline void compress_points(std::vector<Point1>& pts) {
  std::sort(pts.begin(), pts.end(), point1_less);
  std::size_t out = 0;
  for (std::size_t i = 0; i < pts.size();) {
    double wsum = 0.0, wx = 0.0;
    std::size_t j = i;
    for (; j < pts.size() && pts[j].t == pts[i].t; ++j) {
      wsum += pts[j].w;
      wx += pts[j].w * pts[j].x;
    }
    pts[out++] = Point1{pts[i].t, wsum > 0.0 ? wx / wsum : 0.0, wsum};
    i = j;
  }
  pts.resize(out);
}

// Same merge for plane points sharing (t, y).
inline void compress_points(std::vector<Point2>& pts) {
  std::sort(pts.begin(), pts.end(), point2_less);
  std::size_t out = 0;
  for (std::size_t i = 0; i < pts.size();) {
    double wsum = 0.0, wx = 0.0;
    std::size_t j = i;
    for (; j < pts.size() && pts[j].t == pts[i].t && pts[j].y == pts[i].y; ++j) {
      wsum += pts[j].w;
      wx += pts[j].w * pts[j].x;
    }
    pts[out++] = Point2{pts[i].t, pts[i].y, wsum > 0.0 ? wx / wsum : 0.0, wsum};
    i = j;
  }
  pts.resize(out);
}

struct EvalStatus {
  bool widened = false;
  bool degenerate = false;
};

// One local-linear fit on the line with geometric window widening. Points must
// be sorted by t. Throws EmptyWindow if no point carries weight after maximum
// widening; falls back to a local-constant fit when the in-window design has
// no time spread.
inline double eval_point_1d(const std::vector<Point1>& pts, const Kernel1D& kernel, double h,
                            double t, EvalStatus* status) {
  const double radius = kernel.support_radius();
  double heff = h;
  for (int tries = 0;; ++tries) {
    const double half = heff * radius;
    auto lo = std::lower_bound(pts.begin(), pts.end(), t - half,
                               [](const Point1& p, double v) { return p.t < v; });
    auto hi = std::upper_bound(pts.begin(), pts.end(), t + half,
                               [](double v, const Point1& p) { return v < p.t; });
    double s0 = 0, st = 0, stt = 0, sx = 0, stx = 0;
    long cnt = 0;
    for (auto it = lo; it != hi; ++it) {
      const double d = it->t - t;
      const double kw = kernel(d / heff) * it->w;
      if (!(kw > 0.0)) continue;
      ++cnt;
      s0 += kw;
      st += kw * d;
      stt += kw * d * d;
      sx += kw * it->x;
      stx += kw * d * it->x;
    }
    if (cnt > 0) {
      const double dbar = st / s0;
      const double xbar = sx / s0;
      const double vtt = stt / s0 - dbar * dbar;
      const double ctx = stx / s0 - dbar * xbar;
      if (cnt >= 2 && vtt > kVarFloor * heff * heff) {
        const double slope = ctx / (vtt + kRidge * heff * heff);
        if (status && tries > 0) status->widened = true;
        return xbar - slope * dbar;
      }
      if (tries >= kMaxWiden) {
        if (status) {
          status->degenerate = true;
          if (tries > 0) status->widened = true;
        }
        return xbar;  // local-constant fallback
      }
    } else if (tries >= kMaxWiden) {
      throw Error(ErrorKind::EmptyWindow,
                  "no data in the kernel window at t=" + std::to_string(t) +
                      " after maximum widening");
    }
    heff *= kWidenFactor;
  }
}

// Centered 2x2 solve for the plane fit; returns the fitted value at the eval
// point given first/second weighted moments.
struct PlaneSums {
  double s0 = 0, st = 0, sy = 0, stt = 0, sty = 0, syy = 0, sx = 0, stx = 0, syx = 0;
  long cnt = 0;

  void add(double dt, double dy, double x, double kw) {
    ++cnt;
    s0 += kw;
    st += kw * dt;
    sy += kw * dy;
    stt += kw * dt * dt;
    sty += kw * dt * dy;
    syy += kw * dy * dy;
    sx += kw * x;
    stx += kw * dt * x;
    syx += kw * dy * x;
  }
};

enum class PlaneFit { full, line_t, line_y, constant, insufficient };

inline PlaneFit classify_plane(const PlaneSums& s, double ht, double hy, double* moments) {
  if (s.cnt == 0) return PlaneFit::insufficient;
  const double dbar_t = s.st / s.s0, dbar_y = s.sy / s.s0, xbar = s.sx / s.s0;
  const double vtt = s.stt / s.s0 - dbar_t * dbar_t;
  const double vyy = s.syy / s.s0 - dbar_y * dbar_y;
  const double vty = s.sty / s.s0 - dbar_t * dbar_y;
  const double ctx = s.stx / s.s0 - dbar_t * xbar;
  const double cyx = s.syx / s.s0 - dbar_y * xbar;
  moments[0] = dbar_t; moments[1] = dbar_y; moments[2] = xbar;
  moments[3] = vtt; moments[4] = vyy; moments[5] = vty;
  moments[6] = ctx; moments[7] = cyx;
  const bool spread_t = vtt > kVarFloor * ht * ht;
  const bool spread_y = vyy > kVarFloor * hy * hy;
  if (s.cnt >= 3 && spread_t && spread_y && vtt * vyy - vty * vty > kVarFloor * vtt * vyy)
    return PlaneFit::full;
  if (spread_t && (!spread_y || vtt / (ht * ht) >= vyy / (hy * hy))) return PlaneFit::line_t;
  if (spread_y) return PlaneFit::line_y;
  return PlaneFit::constant;
}

inline double solve_plane(PlaneFit kind, const double* m, double ht, double hy) {
  const double dbar_t = m[0], dbar_y = m[1], xbar = m[2];
  const double vtt = m[3], vyy = m[4], vty = m[5], ctx = m[6], cyx = m[7];
  switch (kind) {
    case PlaneFit::full: {
      const double a11 = vtt + kRidge * ht * ht;
      const double a22 = vyy + kRidge * hy * hy;
      const double det = a11 * a22 - vty * vty;
      const double b1 = (a22 * ctx - vty * cyx) / det;
      const double b2 = (a11 * cyx - vty * ctx) / det;
      return xbar - b1 * dbar_t - b2 * dbar_y;
    }
    case PlaneFit::line_t:
      return xbar - ctx / (vtt + kRidge * ht * ht) * dbar_t;
    case PlaneFit::line_y:
      return xbar - cyx / (vyy + kRidge * hy * hy) * dbar_y;
    default:
      return xbar;
  }
}

// One local-linear plane fit with joint widening of both bandwidths. Points
// must be sorted by t.
inline double eval_point_2d(const std::vector<Point2>& pts, const Kernel2D& k2, double h_t,
                            double h_y, double t, double y, EvalStatus* status) {
  const double rt = k2.kt.support_radius();
  const double ry = k2.ky.support_radius();
  double ht = h_t, hy = h_y;
  for (int tries = 0;; ++tries) {
    const double half_t = ht * rt;
    const double half_y = hy * ry;
    auto lo = std::lower_bound(pts.begin(), pts.end(), t - half_t,
                               [](const Point2& p, double v) { return p.t < v; });
    auto hi = std::upper_bound(pts.begin(), pts.end(), t + half_t,
                               [](double v, const Point2& p) { return v < p.t; });
    PlaneSums sums;
    for (auto it = lo; it != hi; ++it) {
      const double dy = it->y - y;
      if (std::abs(dy) > half_y) continue;
      const double dt = it->t - t;
      const double kw = k2(dt / ht, dy / hy) * it->w;
      if (!(kw > 0.0)) continue;
      sums.add(dt, dy, it->x, kw);
    }
    double moments[8];
    const PlaneFit kind = classify_plane(sums, ht, hy, moments);
    if (kind == PlaneFit::full) {
      if (status && tries > 0) status->widened = true;
      return solve_plane(kind, moments, ht, hy);
    }
    if (tries >= kMaxWiden) {
      if (kind == PlaneFit::insufficient)
        throw Error(ErrorKind::EmptyWindow,
                    "no data in the kernel window at (t=" + std::to_string(t) +
                        ", y=" + std::to_string(y) + ") after maximum widening");
      if (status) {
        status->degenerate = true;
        if (tries > 0) status->widened = true;
      }
      return solve_plane(kind, moments, ht, hy);
    }
    ht *= kWidenFactor;
    hy *= kWidenFactor;
  }
}

// Scratch row of a t-window, sorted by y, for the Cartesian fast path.
struct WindowPoint {
  double y, dt, x, kw;
};

}  // namespace detail

struct Smooth1Result {
  FunctionOnGrid fn;
  SmootherDiagnostics diag;
};

// Local-linear smoother on the line evaluated over eval_grid.
inline Smooth1Result local_linear_1d(std::vector<Point1> points, double h,
                                     const Kernel1D& kernel, Eigen::VectorXd eval_grid) {
  if (!(h > 0.0) || !std::isfinite(h))
    throw Error(ErrorKind::ConfigInvalid, "bandwidth must be positive and finite", "h");
  std::sort(points.begin(), points.end(), detail::point1_less);
  Smooth1Result out;
  out.fn.grid = std::move(eval_grid);
  out.fn.values.resize(out.fn.grid.size());
  for (Eigen::Index i = 0; i < out.fn.grid.size(); ++i) {
    detail::EvalStatus st;
    out.fn.values[i] = detail::eval_point_1d(points, kernel, h, out.fn.grid[i], &st);
    if (st.widened) ++out.diag.widened;
    if (st.degenerate) ++out.diag.degenerate;
  }
  return out;
}

struct Smooth2Result {
  Eigen::VectorXd values;
  SmootherDiagnostics diag;
};

// Local-linear plane smoother at arbitrary eval points, using spec.h_t/h_y.
inline Smooth2Result local_linear_2d(std::vector<Point2> points, const SmootherSpec& spec,
                                     const std::vector<std::pair<double, double>>& eval_points) {
  if (!(spec.h_t > 0.0) || !(spec.h_y > 0.0))
    throw Error(ErrorKind::ConfigInvalid, "bandwidths must be positive", "h_t/h_y");
  std::sort(points.begin(), points.end(), detail::point2_less);
  const Kernel2D k2 = spec.kernel2();
  Smooth2Result out;
  out.values.resize(static_cast<Eigen::Index>(eval_points.size()));
  for (std::size_t i = 0; i < eval_points.size(); ++i) {
    detail::EvalStatus st;
    out.values[static_cast<Eigen::Index>(i)] = detail::eval_point_2d(
        points, k2, spec.h_t, spec.h_y, eval_points[i].first, eval_points[i].second, &st);
    if (st.widened) ++out.diag.widened;
    if (st.degenerate) ++out.diag.degenerate;
  }
  return out;
}

namespace detail {

// Cartesian-product evaluation of the plane smoother: rows follow t_evals,
// columns follow y_evals. Data are swept once per eval time through a
// y-sorted window so cost is O(sum of joint window sizes). Eval points whose
// base window cannot support a plane fit are redone through the widening
// scalar path.
inline Eigen::MatrixXd local_linear_2d_grid(std::vector<Point2> pts, const Kernel2D& k2,
                                            double h_t, double h_y,
                                            const Eigen::VectorXd& t_evals,
                                            const Eigen::VectorXd& y_evals,
                                            SmootherDiagnostics* diag,
                                            bool symmetric_square = false) {
  std::sort(pts.begin(), pts.end(), point2_less);
  const double rt = k2.kt.support_radius();
  const double ry = k2.ky.support_radius();
  const Eigen::Index nt = t_evals.size();
  const Eigen::Index ny = y_evals.size();
  Eigen::MatrixXd out(nt, ny);

  std::vector<WindowPoint> window;
  for (Eigen::Index i = 0; i < nt; ++i) {
    const double t = t_evals[i];
    const double half_t = h_t * rt;
    auto lo = std::lower_bound(pts.begin(), pts.end(), t - half_t,
                               [](const Point2& p, double v) { return p.t < v; });
    auto hi = std::upper_bound(pts.begin(), pts.end(), t + half_t,
                               [](double v, const Point2& p) { return v < p.t; });
    window.clear();
    for (auto it = lo; it != hi; ++it) {
      const double dt = it->t - t;
      const double kw = k2.kt(dt / h_t) * it->w;
      if (!(kw > 0.0)) continue;
      window.push_back(WindowPoint{it->y, dt, it->x, kw});
    }
    // stable sort keeps the canonical global order within y-ties so sums are
    // reproducible under input permutation
    std::stable_sort(window.begin(), window.end(),
                     [](const WindowPoint& a, const WindowPoint& b) { return a.y < b.y; });

    const Eigen::Index j_begin = symmetric_square ? i : 0;
    for (Eigen::Index j = j_begin; j < ny; ++j) {
      const double y = y_evals[j];
      const double half_y = h_y * ry;
      auto wlo = std::lower_bound(window.begin(), window.end(), y - half_y,
                                  [](const WindowPoint& p, double v) { return p.y < v; });
      auto whi = std::upper_bound(window.begin(), window.end(), y + half_y,
                                  [](double v, const WindowPoint& p) { return v < p.y; });
      PlaneSums sums;
      for (auto it = wlo; it != whi; ++it) {
        const double dy = it->y - y;
        const double kwy = k2.ky(dy / h_y);
        if (!(kwy > 0.0)) continue;
        sums.add(it->dt, dy, it->x, it->kw * kwy);
      }
      double moments[8];
      const PlaneFit kind = classify_plane(sums, h_t, h_y, moments);
      if (kind == PlaneFit::full) {
        out(i, j) = solve_plane(kind, moments, h_t, h_y);
      } else {
        EvalStatus st;
        out(i, j) = eval_point_2d(pts, k2, h_t, h_y, t, y, &st);
        if (diag) {
          if (st.widened) ++diag->widened;
          if (st.degenerate) ++diag->degenerate;
        }
      }
      if (symmetric_square) out(j, i) = out(i, j);
    }
  }
  return out;
}

inline std::vector<Point1> pooled_mean_points(const LongitudinalDataset& data) {
  std::vector<Point1> pts;
  pts.reserve(static_cast<std::size_t>(data.total_observations()));
  for (const auto& s : data.subjects)
    for (Eigen::Index j = 0; j < s.times.size(); ++j)
      pts.push_back(Point1{s.times[j], s.values[j], 1.0});
  return pts;
}

inline std::vector<Point2> pooled_surface_points(const LongitudinalDataset& data) {
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(data.total_observations()));
  for (const auto& s : data.subjects)
    for (Eigen::Index j = 0; j < s.times.size(); ++j)
      pts.push_back(Point2{s.times[j], s.response, s.values[j], 1.0});
  return pts;
}

inline std::vector<Point2> pooled_pair_points(const LongitudinalDataset& data,
                                              bool include_diagonal) {
  std::vector<Point2> pts;
  std::size_t total = 0;
  for (const auto& s : data.subjects) {
    const std::size_t ni = static_cast<std::size_t>(s.times.size());
    total += ni * ni;
  }
  pts.reserve(total);
  for (const auto& s : data.subjects) {
    const Eigen::Index ni = s.times.size();
    for (Eigen::Index j = 0; j < ni; ++j)
      for (Eigen::Index k = 0; k < ni; ++k) {
        if (!include_diagonal && j == k) continue;
        pts.push_back(Point2{s.times[j], s.times[k], s.values[j] * s.values[k], 1.0});
      }
  }
  return pts;
}

}  // namespace detail

// Pooled cross-sectional mean curve, smoothed with h_mu on the given grid.
inline Smooth1Result smooth_mean(const LongitudinalDataset& data, const SmootherSpec& spec,
                                 const Eigen::VectorXd& grid) {
  auto pts = detail::pooled_mean_points(data);
  detail::compress_points(pts);
  return local_linear_1d(std::move(pts), spec.h_mu, spec.kernel, grid);
}

struct SurfaceResult {
  Eigen::MatrixXd values;  // grid points x subjects
  SmootherDiagnostics diag;
};

// Inverse-regression surface evaluated at every (grid point, subject
// response): entry (l, i) approximates E[X(t_l) | Y = Y_i].
inline SurfaceResult inverse_regression_surface(const LongitudinalDataset& data,
                                                const SmootherSpec& spec,
                                                const Eigen::VectorXd& grid) {
  auto pts = detail::pooled_surface_points(data);
  Eigen::VectorXd responses(data.n());
  for (int i = 0; i < data.n(); ++i) responses[i] = data.subjects[i].response;
  SurfaceResult out;
  out.values = detail::local_linear_2d_grid(std::move(pts), spec.kernel2(), spec.h_t, spec.h_y,
                                            grid, responses, &out.diag, false);
  return out;
}

// Raw second-moment surface: plane smoother over all within-subject cross
// products X_ij X_ik with the h_phi bandwidth on both axes, evaluated on
// grid x grid and symmetrized.
struct CrossProductResult {
  Eigen::MatrixXd values;  // p x p
  SmootherDiagnostics diag;
};

inline CrossProductResult cross_product_smoother(const LongitudinalDataset& data,
                                                 const SmootherSpec& spec,
                                                 const Eigen::VectorXd& grid,
                                                 bool include_diagonal = true) {
  auto pts = detail::pooled_pair_points(data, include_diagonal);
  if (pts.empty())
    throw Error(ErrorKind::ConfigInvalid,
                "no usable observation pairs; subjects need at least " +
                    std::string(include_diagonal ? "1 observation" : "2 observations"),
                "data");
  detail::compress_points(pts);
  CrossProductResult out;
  Kernel2D k2{spec.kernel, spec.kernel};
  out.values = detail::local_linear_2d_grid(std::move(pts), k2, spec.h_phi, spec.h_phi, grid,
                                            grid, &out.diag, true);
  out.values = 0.5 * (out.values + out.values.transpose()).eval();
  return out;
}

// Grid-search cross-validation over candidate bandwidths, with folds cut by
// subject index. Returns candidates with their mean held-out squared errors.
struct CvResult {
  double best = 0.0;
  std::vector<double> candidates;
  std::vector<double> scores;
};

inline CvResult cv_bandwidth_mu(const LongitudinalDataset& data, const Kernel1D& kernel,
                                const std::vector<double>& candidates, int n_folds = 5) {
  if (candidates.empty())
    throw Error(ErrorKind::ConfigInvalid, "no bandwidth candidates", "candidates");
  n_folds = std::max(2, std::min(n_folds, data.n()));
  CvResult out;
  out.candidates = candidates;
  out.scores.assign(candidates.size(), std::numeric_limits<double>::infinity());
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const double h = candidates[c];
    if (!(h > 0.0)) throw Error(ErrorKind::ConfigInvalid, "bandwidth must be positive", "candidates");
    double sse = 0.0;
    long used = 0;
    for (int fold = 0; fold < n_folds; ++fold) {
      std::vector<Point1> train;
      for (int i = 0; i < data.n(); ++i) {
        if (i % n_folds == fold) continue;
        const auto& s = data.subjects[i];
        for (Eigen::Index j = 0; j < s.times.size(); ++j)
          train.push_back(Point1{s.times[j], s.values[j], 1.0});
      }
      if (train.empty()) continue;
      detail::compress_points(train);
      for (int i = fold; i < data.n(); i += n_folds) {
        const auto& s = data.subjects[i];
        for (Eigen::Index j = 0; j < s.times.size(); ++j) {
          try {
            detail::EvalStatus st;
            const double pred = detail::eval_point_1d(train, kernel, h, s.times[j], &st);
            const double r = pred - s.values[j];
            sse += r * r;
            ++used;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyWindow) throw;
          }
        }
      }
    }
    if (used > 0) out.scores[c] = sse / static_cast<double>(used);
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < candidates.size(); ++c)
    if (out.scores[c] < out.scores[best]) best = c;
  out.best = candidates[best];
  return out;
}

// Joint scale search for (h_t, h_y) of the inverse-regression surface.
inline CvResult cv_bandwidth_surface(const LongitudinalDataset& data, const SmootherSpec& base,
                                     const std::vector<double>& scales, int n_folds = 5) {
  if (scales.empty())
    throw Error(ErrorKind::ConfigInvalid, "no scale candidates", "candidates");
  n_folds = std::max(2, std::min(n_folds, data.n()));
  CvResult out;
  out.candidates = scales;
  out.scores.assign(scales.size(), std::numeric_limits<double>::infinity());
  const Kernel2D k2 = base.kernel2();
  for (std::size_t c = 0; c < scales.size(); ++c) {
    const double scale = scales[c];
    if (!(scale > 0.0)) throw Error(ErrorKind::ConfigInvalid, "scale must be positive", "candidates");
    double sse = 0.0;
    long used = 0;
    for (int fold = 0; fold < n_folds; ++fold) {
      std::vector<Point2> train;
      for (int i = 0; i < data.n(); ++i) {
        if (i % n_folds == fold) continue;
        const auto& s = data.subjects[i];
        for (Eigen::Index j = 0; j < s.times.size(); ++j)
          train.push_back(Point2{s.times[j], s.response, s.values[j], 1.0});
      }
      if (train.empty()) continue;
      std::sort(train.begin(), train.end(), detail::point2_less);
      for (int i = fold; i < data.n(); i += n_folds) {
        const auto& s = data.subjects[i];
        for (Eigen::Index j = 0; j < s.times.size(); ++j) {
          try {
            detail::EvalStatus st;
            const double pred = detail::eval_point_2d(train, k2, base.h_t * scale,
                                                      base.h_y * scale, s.times[j],
                                                      s.response, &st);
            const double r = pred - s.values[j];
            sse += r * r;
            ++used;
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::EmptyWindow) throw;
          }
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
