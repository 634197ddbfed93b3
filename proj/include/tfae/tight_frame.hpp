#pragma once

// Tight-frame analysis / synthesis with unit frame bound, and hard
// thresholding of the detail bands.
//
// Two families are provided:
//  * framelet: undecimated piecewise-linear B-spline framelet, periodic
//    boundary, 8 detail bands per level plus the final low-pass band;
//  * curvelet: FFT-domain dyadic (square) annuli split into angular wedges.
//    Squared windows sum to one at every frequency and are even in the
//    frequency, so each band pairs the wedges at theta and theta + pi and the
//    coefficients are real.
//
// Band layout (both families): the coarse band first, then detail scales
// 1 (coarsest detail) .. scales - 1 (finest), orientations ascending.

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "tfae/error.hpp"
#include "tfae/image.hpp"

namespace tfae {

enum class TransformFamily { framelet, curvelet };

inline std::string_view to_string(TransformFamily f) {
  return f == TransformFamily::framelet ? "framelet" : "curvelet";
}

inline TransformFamily parse_transform_family(std::string_view s) {
  if (s == "framelet") return TransformFamily::framelet;
  if (s == "curvelet") return TransformFamily::curvelet;
  throw ParameterError("unknown transform '" + std::string(s) + "'");
}

/// Transform family plus its scale/orientation layout.
///
/// `scales` counts the coarse band as one scale, so a framelet with
/// `scales` = 3 runs two decomposition levels. `orientations[s - 1]` is the
/// wedge count of curvelet detail scale s.
struct TransformKind {
  TransformFamily family = TransformFamily::framelet;
  int scales = 3;
  std::vector<int> orientations;

  static TransformKind framelet(int scales) {
    return TransformKind{TransformFamily::framelet, scales, {}};
  }

  /// 8 wedges at the coarsest detail scale, doubling every other scale.
  static TransformKind curvelet(int scales) {
    TransformKind k{TransformFamily::curvelet, scales, {}};
    for (int s = 1; s < scales; ++s) k.orientations.push_back(8 << ((s - 1) / 2));
    return k;
  }

  /// 3 scales when both sides are at least 64 pixels, 2 otherwise.
  static TransformKind default_for(TransformFamily family, std::size_t width, std::size_t height) {
    const int scales = std::min(width, height) >= 64 ? 3 : 2;
    return family == TransformFamily::framelet ? framelet(scales) : curvelet(scales);
  }

  int orientation_count(int scale) const {
    if (family == TransformFamily::framelet) return 8;
    return orientations.at(static_cast<std::size_t>(scale - 1));
  }

  friend bool operator==(const TransformKind&, const TransformKind&) = default;
};

struct Band {
  int scale = 0;
  int orientation = 0;
  bool coarse = false;
  RealField data;
};

struct FrameCoefficients {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Band> bands;

  /// Sum of squared coefficients over all bands.
  double energy() const {
    double e = 0.0;
    for (const Band& b : bands) {
      for (double v : b.data.values()) e += v * v;
    }
    return e;
  }

  /// Concatenation of all detail-band coefficients in band order.
  std::vector<double> detail_values() const {
    std::vector<double> out;
    for (const Band& b : bands) {
      if (!b.coarse) out.insert(out.end(), b.data.values().begin(), b.data.values().end());
    }
    return out;
  }
};

namespace detail {

inline void validate_kind(const TransformKind& kind, std::size_t width, std::size_t height) {
  if (kind.scales < 2) {
    throw ParameterError("transform needs at least 2 scales, got " + std::to_string(kind.scales));
  }
  if (kind.scales > 12) throw ParameterError("too many scales: " + std::to_string(kind.scales));
  // Coarsest effective grid must stay at least 4x4.
  const std::size_t needed = std::size_t{4} << (kind.scales - 1);
  if (std::min(width, height) < needed) {
    throw ParameterError("image " + std::to_string(width) + "x" + std::to_string(height) +
                         " too small for " + std::to_string(kind.scales) + " scales (need " +
                         std::to_string(needed) + ")");
  }
  if (kind.family == TransformFamily::curvelet) {
    if (kind.orientations.size() != static_cast<std::size_t>(kind.scales - 1)) {
      throw ParameterError("curvelet needs one orientation count per detail scale");
    }
    for (int n : kind.orientations) {
      if (n < 2) throw ParameterError("curvelet orientation count must be >= 2");
    }
  }
}

/// Expected (scale, orientation) layout; validates coefficient geometry.
inline void validate_layout(const FrameCoefficients& c, const TransformKind& kind) {
  validate_kind(kind, c.width, c.height);
  std::size_t expected = 1;
  for (int s = 1; s < kind.scales; ++s) expected += static_cast<std::size_t>(kind.orientation_count(s));
  if (c.bands.size() != expected) {
    throw DimensionError("coefficient set has " + std::to_string(c.bands.size()) +
                         " bands, transform expects " + std::to_string(expected));
  }
  std::size_t i = 0;
  auto check = [&](int scale, int orientation, bool coarse) {
    const Band& b = c.bands[i++];
    if (b.scale != scale || b.orientation != orientation || b.coarse != coarse ||
        b.data.width() != c.width || b.data.height() != c.height) {
      throw DimensionError("band " + std::to_string(i - 1) + " does not match the transform layout");
    }
  };
  check(0, 0, true);
  for (int s = 1; s < kind.scales; ++s) {
    for (int o = 0; o < kind.orientation_count(s); ++o) check(s, o, false);
  }
}

// ---- framelet -------------------------------------------------------------

using Taps3 = std::array<double, 3>;

inline const std::array<Taps3, 3>& framelet_filters() {
  static const std::array<Taps3, 3> filters = [] {
    const double q = std::numbers::sqrt2 / 4.0;
    return std::array<Taps3, 3>{Taps3{0.25, 0.5, 0.25}, Taps3{q, 0.0, -q},
                                Taps3{-0.25, 0.5, -0.25}};
  }();
  return filters;
}

inline std::size_t wrap(std::ptrdiff_t i, std::size_t n) {
  const auto m = static_cast<std::ptrdiff_t>(n);
  i %= m;
  return static_cast<std::size_t>(i < 0 ? i + m : i);
}

/// Periodic 3-tap filter with dilation `step` along x (cols) or y (rows).
/// Analysis: out(p) = sum_k t[k] in(p + (k-1) step); the adjoint flips the sign.
inline RealField filter_axis(const RealField& in, const Taps3& t, std::size_t step, bool along_x,
                             bool adjoint) {
  const auto w = in.width();
  const auto h = in.height();
  RealField out(w, h);
  const auto s = static_cast<std::ptrdiff_t>(step) * (adjoint ? -1 : 1);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        if (t[static_cast<std::size_t>(k)] == 0.0) continue;
        const std::ptrdiff_t off = (k - 1) * s;
        const double v = along_x ? in(r, wrap(static_cast<std::ptrdiff_t>(c) + off, w))
                                 : in(wrap(static_cast<std::ptrdiff_t>(r) + off, h), c);
        acc += t[static_cast<std::size_t>(k)] * v;
      }
      out(r, c) = acc;
    }
  }
  return out;
}

inline void add_into(RealField& acc, const RealField& x) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc.values()[i] += x.values()[i];
}

inline FrameCoefficients framelet_decompose(const Image& img, const TransformKind& kind) {
  const auto& filters = framelet_filters();
  const int levels = kind.scales - 1;
  // details[level-1][orientation]
  std::vector<std::vector<RealField>> details(static_cast<std::size_t>(levels));
  RealField low = img;
  for (int level = 1; level <= levels; ++level) {
    const std::size_t step = std::size_t{1} << (level - 1);
    std::array<RealField, 3> by_x;
    for (std::size_t a = 0; a < 3; ++a) by_x[a] = filter_axis(low, filters[a], step, true, false);
    auto& out = details[static_cast<std::size_t>(level - 1)];
    RealField next_low;
    for (std::size_t b = 0; b < 3; ++b) {
      for (std::size_t a = 0; a < 3; ++a) {
        RealField band = filter_axis(by_x[a], filters[b], step, false, false);
        if (a == 0 && b == 0) {
          next_low = std::move(band);
        } else {
          out.push_back(std::move(band));
        }
      }
    }
    low = std::move(next_low);
  }
  FrameCoefficients c{img.width(), img.height(), {}};
  c.bands.push_back(Band{0, 0, true, std::move(low)});
  for (int s = 1; s < kind.scales; ++s) {
    const int level = kind.scales - s;
    auto& ds = details[static_cast<std::size_t>(level - 1)];
    for (std::size_t o = 0; o < ds.size(); ++o) {
      c.bands.push_back(Band{s, static_cast<int>(o), false, std::move(ds[o])});
    }
  }
  return c;
}

inline Image framelet_reconstruct(const FrameCoefficients& c, const TransformKind& kind) {
  const auto& filters = framelet_filters();
  RealField low = c.bands.front().data;
  for (int level = kind.scales - 1; level >= 1; --level) {
    const std::size_t step = std::size_t{1} << (level - 1);
    const int s = kind.scales - level;
    const std::size_t first = 1 + 8 * static_cast<std::size_t>(s - 1);
    RealField acc(c.width, c.height, 0.0);
    for (std::size_t b = 0; b < 3; ++b) {
      // Sum over a of the y-adjoint first, so the x-adjoint runs once per a.
      for (std::size_t a = 0; a < 3; ++a) {
        const RealField& band =
            (a == 0 && b == 0) ? low : c.bands[first + 3 * b + a - 1].data;
        RealField y = filter_axis(band, filters[b], step, false, true);
        add_into(acc, filter_axis(y, filters[a], step, true, true));
      }
    }
    low = std::move(acc);
  }
  return low;
}

// ---- curvelet ---------------------------------------------------------------

/// Smooth step on [0,1] with nu(t) + nu(1 - t) = 1.
inline double meyer_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * t * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t * t * t);
}

/// Signed frequency of DFT index k in cycles per sample; exactly odd in k.
inline double frequency(std::size_t k, std::size_t n) {
  const auto ki = static_cast<std::ptrdiff_t>(k);
  const auto ni = static_cast<std::ptrdiff_t>(n);
  const std::ptrdiff_t s = 2 * ki < ni ? ki : ki - ni;
  return static_cast<double>(s) / static_cast<double>(n);
}

/// Squared low-pass profile: 1 below rho/2, 0 above rho.
inline double lowpass_sq(double r, double rho) {
  return 1.0 - meyer_step((r - 0.5 * rho) / (0.5 * rho));
}

/// One real window per band in band order, each of size width x height
/// (row-major over ky, kx).
inline std::vector<RealField> curvelet_windows(std::size_t width, std::size_t height,
                                               const TransformKind& kind) {
  const int J = kind.scales;
  std::vector<RealField> windows;
  windows.emplace_back(width, height);
  for (int s = 1; s < J; ++s) {
    for (int o = 0; o < kind.orientation_count(s); ++o) windows.emplace_back(width, height);
  }
  // rho_j for low-pass j = 1 .. J-1: transition band [rho_j/2, rho_j].
  auto rho = [&](int j) { return 0.5 * std::ldexp(1.0, j - (J - 1)); };
  for (std::size_t ky = 0; ky < height; ++ky) {
    const double wy = frequency(ky, height);
    for (std::size_t kx = 0; kx < width; ++kx) {
      const double wx = frequency(kx, width);
      const double r = std::max(std::abs(wx), std::abs(wy));
      double theta = std::atan2(wy, wx);
      if (theta < 0.0) theta += std::numbers::pi;
      if (theta >= std::numbers::pi) theta -= std::numbers::pi;
      windows[0](ky, kx) = std::sqrt(std::max(0.0, lowpass_sq(r, rho(1))));
      std::size_t idx = 1;
      for (int s = 1; s < J; ++s) {
        const double outer = s + 1 < J ? lowpass_sq(r, rho(s + 1)) : 1.0;
        const double radial_sq = std::max(0.0, outer - lowpass_sq(r, rho(s)));
        const int n = kind.orientation_count(s);
        const double t = theta * n / std::numbers::pi;
        for (int o = 0; o < n; ++o) {
          double u = t - o;
          if (u >= 0.5 * n) u -= n;
          if (u < -0.5 * n) u += n;
          const double angular_sq = 1.0 - meyer_step(std::abs(u));
          windows[idx++](ky, kx) = std::sqrt(radial_sq * angular_sq);
        }
      }
    }
  }
  // The Nyquist index is its own mirror, so the angle above is not odd there.
  // Averaging squared windows over k and -k keeps the partition of unity and
  // makes every window even, hence every band real.
  for (RealField& win : windows) {
    RealField sym(width, height);
    for (std::size_t ky = 0; ky < height; ++ky) {
      for (std::size_t kx = 0; kx < width; ++kx) {
        const double a = win(ky, kx);
        const double b = win((height - ky) % height, (width - kx) % width);
        sym(ky, kx) = std::sqrt(0.5 * (a * a + b * b));
      }
    }
    win = std::move(sym);
  }
  return windows;
}

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

/// 2D complex DFT buffer with forward/backward plans. Planning is serialized;
/// execution is not shared between instances.
class FftBuffer {
 public:
  FftBuffer(std::size_t width, std::size_t height) : width_(width), height_(height) {
    data_ = fftw_alloc_complex(width * height);
    std::lock_guard lock(fftw_planner_mutex());
    forward_ = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), data_, data_,
                                FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), data_, data_,
                                 FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  ~FftBuffer() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
    fftw_free(data_);
  }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  std::complex<double>* data() { return reinterpret_cast<std::complex<double>*>(data_); }
  std::size_t size() const { return width_ * height_; }

  void load_real(const RealField& f) {
    for (std::size_t i = 0; i < size(); ++i) data()[i] = {f.values()[i], 0.0};
  }
  /// Real part scaled by 1/N.
  RealField real_part_scaled() {
    RealField out(width_, height_);
    const double inv = 1.0 / static_cast<double>(size());
    for (std::size_t i = 0; i < size(); ++i) out.values()[i] = data()[i].real() * inv;
    return out;
  }
  void forward() { fftw_execute(forward_); }
  void backward() { fftw_execute(backward_); }

 private:
  std::size_t width_;
  std::size_t height_;
  fftw_complex* data_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

inline FrameCoefficients curvelet_decompose(const Image& img, const TransformKind& kind) {
  const auto w = img.width();
  const auto h = img.height();
  const std::vector<RealField> windows = curvelet_windows(w, h, kind);
  FftBuffer spectrum(w, h);
  spectrum.load_real(img);
  spectrum.forward();
  FftBuffer work(w, h);
  FrameCoefficients c{w, h, {}};
  std::size_t idx = 0;
  auto emit = [&](int scale, int orientation, bool coarse) {
    const RealField& win = windows[idx++];
    for (std::size_t i = 0; i < work.size(); ++i) work.data()[i] = spectrum.data()[i] * win.values()[i];
    work.backward();
    c.bands.push_back(Band{scale, orientation, coarse, work.real_part_scaled()});
  };
  emit(0, 0, true);
  for (int s = 1; s < kind.scales; ++s) {
    for (int o = 0; o < kind.orientation_count(s); ++o) emit(s, o, false);
  }
  return c;
}

inline Image curvelet_reconstruct(const FrameCoefficients& c, const TransformKind& kind) {
  const std::vector<RealField> windows = curvelet_windows(c.width, c.height, kind);
  FftBuffer work(c.width, c.height);
  std::vector<std::complex<double>> acc(c.width * c.height);
  for (std::size_t b = 0; b < c.bands.size(); ++b) {
    work.load_real(c.bands[b].data);
    work.forward();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += work.data()[i] * windows[b].values()[i];
  }
  std::copy(acc.begin(), acc.end(), work.data());
  work.backward();
  return work.real_part_scaled();
}

}  // namespace detail

/// Analysis operator: image -> coefficient bands (unit frame bound).
inline FrameCoefficients decompose(const Image& img, const TransformKind& kind) {
  detail::validate_kind(kind, img.width(), img.height());
  return kind.family == TransformFamily::framelet ? detail::framelet_decompose(img, kind)
                                                  : detail::curvelet_decompose(img, kind);
}

/// Synthesis operator, the adjoint of decompose; reconstruct(decompose(f)) = f.
inline Image reconstruct(const FrameCoefficients& coeffs, const TransformKind& kind) {
  detail::validate_layout(coeffs, kind);
  return kind.family == TransformFamily::framelet ? detail::framelet_reconstruct(coeffs, kind)
                                                  : detail::curvelet_reconstruct(coeffs, kind);
}

/// Zeroes detail coefficients with |value| <= lambda. The coarse band is kept.
inline FrameCoefficients hard_threshold(FrameCoefficients coeffs, double lambda) {
  if (!(lambda >= 0.0)) {
    throw ParameterError("threshold must be nonnegative, got " + std::to_string(lambda));
  }
  for (Band& b : coeffs.bands) {
    if (b.coarse) continue;
    for (double& v : b.data.values()) {
      if (std::abs(v) <= lambda) v = 0.0;
    }
  }
  return coeffs;
}

}  // namespace tfae
