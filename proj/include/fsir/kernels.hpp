#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "fsir/errors.hpp"

namespace fsir {

// Symmetric univariate smoothing kernels of order (0, 2): unit mass, zero
// first moment, nonzero second moment. All shapes have compact support
// [-radius, radius]; the polynomial shapes fix radius = 1.
class Kernel1D {
 public:
  enum class Shape { epanechnikov, quartic, gaussian_truncated };

  static Kernel1D epanechnikov() { return Kernel1D(Shape::epanechnikov, 1.0); }
  static Kernel1D quartic() { return Kernel1D(Shape::quartic, 1.0); }
  static Kernel1D gaussian_truncated(double radius = 3.0) {
    if (!(radius > 0.0))
      throw Error(ErrorKind::ConfigInvalid, "kernel support radius must be positive",
                  "support_radius");
    return Kernel1D(Shape::gaussian_truncated, radius);
  }

  double operator()(double u) const {
    const double a = std::abs(u);
    switch (shape_) {
      case Shape::epanechnikov:
        return a < 1.0 ? 0.75 * (1.0 - u * u) : 0.0;
      case Shape::quartic: {
        if (a >= 1.0) return 0.0;
        const double q = 1.0 - u * u;
        return 0.9375 * q * q;  // 15/16 (1-u^2)^2
      }
      case Shape::gaussian_truncated:
        if (a > radius_) return 0.0;
        return gauss_norm_ * 0.3989422804014326779399461 * std::exp(-0.5 * u * u);
    }
    return 0.0;
  }

  double support_radius() const { return radius_; }
  Shape shape() const { return shape_; }

  std::string name() const {
    switch (shape_) {
      case Shape::epanechnikov: return "epanechnikov";
      case Shape::quartic: return "quartic";
      case Shape::gaussian_truncated: return "gaussian-truncated";
    }
    return "unknown";
  }

  static Kernel1D from_name(const std::string& name) {
    if (name == "epanechnikov") return epanechnikov();
    if (name == "quartic") return quartic();
    if (name == "gaussian-truncated") return gaussian_truncated();
    throw Error(ErrorKind::ConfigInvalid, "unknown kernel '" + name + "'", "kernel");
  }

 private:
  Kernel1D(Shape s, double r) : shape_(s), radius_(r) {
    if (shape_ == Shape::gaussian_truncated)
      gauss_norm_ = 1.0 / std::erf(radius_ / 1.4142135623730950488);
  }

  Shape shape_;
  double radius_;
  double gauss_norm_ = 1.0;  // renormalizes the truncated Gaussian to unit mass
};

// Product kernel on the plane; inherits the order-(0,2) marginal conditions.
struct Kernel2D {
  Kernel1D kt;
  Kernel1D ky;
  double operator()(double u, double v) const { return kt(u) * ky(v); }
};

// Composite Simpson quadrature (panels must be even).
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int panels = 4000) {
  if (panels % 2 != 0) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Numeric moment int u^order K(u) du over the support.
inline double kernel_moment(const Kernel1D& k, int order, int panels = 4000) {
  const double r = k.support_radius();
  return simpson([&](double u) { return std::pow(u, order) * k(u); }, -r, r, panels);
}

// Roughness int K(u)^2 du.
inline double kernel_roughness(const Kernel1D& k, int panels = 4000) {
  const double r = k.support_radius();
  return simpson([&](double u) { const double v = k(u); return v * v; }, -r, r, panels);
}

}  // namespace fsir
