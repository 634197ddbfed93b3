#pragma once

// Gaussian scale-space derivatives, gradient and Hessian fields, and the
// per-pixel principal eigenpair of the Hessian.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tfae/error.hpp"
#include "tfae/image.hpp"

namespace tfae {

/// Sampled derivative of a 2D Gaussian on [-radius, radius]^2.
///
/// The kernel is separable; `factor_x` / `factor_y` hold the 1D taps and
/// `weights` their outer product. Taps are moment-normalized so that the
/// kernel reproduces the exact derivative of any polynomial of degree <= 2:
/// order 0 sums to 1, order 1 has unit first moment, order 2 sums to 0 with
/// unit half second moment.
struct Kernel {
  int radius = 0;
  double sigma = 0.0;
  int order_x = 0;
  int order_y = 0;
  std::vector<double> factor_x;
  std::vector<double> factor_y;
  Grid<double> weights;

  /// Weight at offset (ox, oy), |ox|, |oy| <= radius.
  double at(int ox, int oy) const {
    return weights(static_cast<std::size_t>(oy + radius), static_cast<std::size_t>(ox + radius));
  }
};

namespace detail {

inline std::vector<double> gaussian_derivative_1d(int order, double sigma, int radius) {
  const std::size_t n = static_cast<std::size_t>(2 * radius + 1);
  std::vector<double> taps(n);
  const double s2 = sigma * sigma;
  for (int t = -radius; t <= radius; ++t) {
    const double g = std::exp(-0.5 * t * t / s2);
    double v = g;
    if (order == 1) v = -t / s2 * g;
    if (order == 2) v = (t * t / (s2 * s2) - 1.0 / s2) * g;
    taps[static_cast<std::size_t>(t + radius)] = v;
  }
  auto moment = [&](int power) {
    double m = 0.0;
    for (int t = -radius; t <= radius; ++t) {
      m += std::pow(static_cast<double>(-t), power) * taps[static_cast<std::size_t>(t + radius)];
    }
    return m;
  };
  if (order == 0) {
    const double sum = moment(0);
    for (double& v : taps) v /= sum;
  } else if (order == 1) {
    const double m1 = moment(1);
    for (double& v : taps) v /= m1;
  } else {
    const double mean = moment(0) / static_cast<double>(n);
    for (double& v : taps) v -= mean;
    const double half_m2 = 0.5 * moment(2);
    for (double& v : taps) v /= half_m2;
  }
  return taps;
}

/// Whole-sample mirror: ... c b | a b c ... | b a ...; valid for overhang < n.
inline std::size_t mirror_index(std::ptrdiff_t i, std::size_t n) {
  const auto last = static_cast<std::ptrdiff_t>(n) - 1;
  if (i < 0) i = -i;
  if (i > last) i = 2 * last - i;
  return static_cast<std::size_t>(i);
}

}  // namespace detail

/// Kernel for d^(dx+dy) G / dx^dx dy^dy at scale `sigma`, truncated at ceil(4 sigma).
inline Kernel gaussian_derivative_kernel(int dx, int dy, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ParameterError("sigma must be positive, got " + std::to_string(sigma));
  }
  if (dx < 0 || dy < 0 || dx > 2 || dy > 2 || dx + dy > 2) {
    throw ParameterError("derivative order (" + std::to_string(dx) + "," + std::to_string(dy) +
                         ") not supported");
  }
  Kernel k;
  k.sigma = sigma;
  k.order_x = dx;
  k.order_y = dy;
  k.radius = static_cast<int>(std::ceil(4.0 * sigma));
  k.factor_x = detail::gaussian_derivative_1d(dx, sigma, k.radius);
  k.factor_y = detail::gaussian_derivative_1d(dy, sigma, k.radius);
  const std::size_t n = k.factor_x.size();
  k.weights = Grid<double>(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) k.weights(r, c) = k.factor_y[r] * k.factor_x[c];
  }
  return k;
}

/// Dense 2D convolution, out(p) = sum_o img(p - o) k(o), mirror boundary.
inline RealField convolve(const Image& img, const Kernel& k) {
  const auto radius = static_cast<std::size_t>(k.radius);
  if (radius >= std::min(img.width(), img.height())) {
    throw DimensionError("kernel radius " + std::to_string(k.radius) + " too large for " +
                         std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                         " image");
  }
  const int rad = k.radius;
  const auto w = img.width();
  const auto h = img.height();
  RealField out(w, h);
  std::vector<std::size_t> col_index(static_cast<std::size_t>(2 * rad + 1));
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      for (int ox = -rad; ox <= rad; ++ox) {
        col_index[static_cast<std::size_t>(ox + rad)] =
            detail::mirror_index(static_cast<std::ptrdiff_t>(c) - ox, w);
      }
      double acc = 0.0;
      for (int oy = -rad; oy <= rad; ++oy) {
        const std::size_t rr = detail::mirror_index(static_cast<std::ptrdiff_t>(r) - oy, h);
        const double* wrow = &k.weights(static_cast<std::size_t>(oy + rad), 0);
        for (std::size_t t = 0; t < col_index.size(); ++t) acc += img(rr, col_index[t]) * wrow[t];
      }
      out(r, c) = acc;
    }
  }
  return out;
}

/// Intensity gradient (gx along columns, gy along rows) with cached magnitude.
struct VectorField {
  RealField gx;
  RealField gy;
  RealField magnitude;

  std::size_t width() const { return gx.width(); }
  std::size_t height() const { return gx.height(); }
};

inline VectorField make_vector_field(RealField gx, RealField gy) {
  require_same_shape(gx, gy, "VectorField");
  RealField mag(gx.width(), gx.height());
  for (std::size_t i = 0; i < mag.size(); ++i) {
    mag.values()[i] = std::hypot(gx.values()[i], gy.values()[i]);
  }
  return VectorField{std::move(gx), std::move(gy), std::move(mag)};
}

inline VectorField gradient_field(const Image& img, double sigma) {
  return make_vector_field(convolve(img, gaussian_derivative_kernel(1, 0, sigma)),
                           convolve(img, gaussian_derivative_kernel(0, 1, sigma)));
}

/// Symmetric second-derivative field; fyx is fxy.
struct HessianField {
  RealField fxx;
  RealField fxy;
  RealField fyy;
};

inline HessianField hessian_field(const Image& img, double sigma) {
  return HessianField{convolve(img, gaussian_derivative_kernel(2, 0, sigma)),
                      convolve(img, gaussian_derivative_kernel(1, 1, sigma)),
                      convolve(img, gaussian_derivative_kernel(0, 2, sigma))};
}

/// Eigenpair of largest |lambda| with unit, sign-canonical eigenvector.
struct Eigenpair {
  double lambda = 0.0;
  double vx = 1.0;
  double vy = 0.0;
};

/// Closed-form principal eigenpair of [[a, b], [b, c]].
///
/// Ties in |lambda| (within 1e-12) go to the larger signed eigenvalue. The
/// first nonzero component of v is made nonnegative.
inline Eigenpair principal_eigenpair(double a, double b, double c) {
  const double mean = 0.5 * (a + c);
  const double radius = std::hypot(0.5 * (a - c), b);
  const double l1 = mean + radius;
  const double l2 = mean - radius;
  Eigenpair e;
  e.lambda = std::abs(std::abs(l1) - std::abs(l2)) <= 1e-12 ? l1
             : std::abs(l1) > std::abs(l2)                  ? l1
                                                            : l2;
  // (H - lambda I) v = 0: both rows give a candidate; keep the better conditioned one.
  double ux = b, uy = e.lambda - a;
  double wx = e.lambda - c, wy = b;
  const double nu = std::hypot(ux, uy);
  const double nw = std::hypot(wx, wy);
  if (nu >= nw && nu > 0.0) {
    e.vx = ux / nu;
    e.vy = uy / nu;
  } else if (nw > 0.0) {
    e.vx = wx / nw;
    e.vy = wy / nw;
  } else {
    e.vx = 1.0;  // H = lambda I: every direction is an eigenvector
    e.vy = 0.0;
  }
  if (e.vx < 0.0 || (e.vx == 0.0 && e.vy < 0.0)) {
    e.vx = -e.vx;
    e.vy = -e.vy;
  }
  if (e.vx == 0.0) e.vx = 0.0;  // drop negative zero
  if (e.vy == 0.0) e.vy = 0.0;
  return e;
}

/// Per-pixel principal eigenpair of the Hessian.
struct EigenField {
  RealField lambda;
  RealField vx;
  RealField vy;

  std::size_t width() const { return lambda.width(); }
  std::size_t height() const { return lambda.height(); }
};

inline EigenField eigen_field(const HessianField& h) {
  const auto w = h.fxx.width();
  const auto ht = h.fxx.height();
  EigenField e{RealField(w, ht), RealField(w, ht), RealField(w, ht)};
  for (std::size_t i = 0; i < h.fxx.size(); ++i) {
    const Eigenpair p =
        principal_eigenpair(h.fxx.values()[i], h.fxy.values()[i], h.fyy.values()[i]);
    e.lambda.values()[i] = p.lambda;
    e.vx.values()[i] = p.vx;
    e.vy.values()[i] = p.vy;
  }
  return e;
}

inline EigenField hessian_eigen(const Image& img, double sigma) {
  return eigen_field(hessian_field(img, sigma));
}

/// |v(p) . v(q)|, in [0,1].
inline double orientation_coherence(const EigenField& e, Pixel p, Pixel q) {
  const double dot = e.vx[p] * e.vx[q] + e.vy[p] * e.vy[q];
  return std::min(1.0, std::abs(dot));
}

}  // namespace tfae
