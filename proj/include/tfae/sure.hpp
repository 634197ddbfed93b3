#pragma once

// Hard-threshold selection by minimizing Stein's unbiased risk estimate.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "tfae/error.hpp"
#include "tfae/image.hpp"
#include "tfae/tight_frame.hpp"

namespace tfae {

/// Risk bookkeeping over candidates j = 1..N, stored 0-based (entry k is j = k + 1).
///
///   a      ascending squared magnitudes
///   b[j]   a[1] + ... + a[j]
///   c[j]   N - j
///   s[j]   b[j] + c[j] a[j]
///   risk   (N - 2j + s[j]) / N
struct RiskCurve {
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;
  std::vector<double> s;
  std::vector<double> risk;
  std::size_t i_best = 0;  // 1-based
  double lambda = 0.0;

  std::size_t size() const { return a.size(); }
};

struct SureResult {
  double lambda = 0.0;
  RiskCurve curve;
};

/// Threshold sqrt(a[i_best]) minimizing the risk; ties go to the smallest j.
inline SureResult sure_threshold(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) throw ParameterError("sure_threshold: empty input");
  RiskCurve rc;
  rc.a.reserve(n);
  for (double v : values) {
    if (!std::isfinite(v)) throw DataError("sure_threshold: non-finite value");
    rc.a.push_back(v * v);
  }
  std::sort(rc.a.begin(), rc.a.end());
  rc.b.resize(n);
  rc.c.resize(n);
  rc.s.resize(n);
  rc.risk.resize(n);
  const auto nd = static_cast<double>(n);
  double prefix = 0.0;
  std::size_t best = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto j = static_cast<double>(k + 1);
    prefix += rc.a[k];
    rc.b[k] = prefix;
    rc.c[k] = nd - j;
    rc.s[k] = rc.b[k] + rc.c[k] * rc.a[k];
    rc.risk[k] = (nd - 2.0 * j + rc.s[k]) / nd;
    if (rc.risk[k] < rc.risk[best]) best = k;
  }
  rc.i_best = best + 1;
  rc.lambda = std::sqrt(rc.a[best]);
  return SureResult{rc.lambda, std::move(rc)};
}

/// What the risk is minimized over.
enum class SureMode {
  coefficients,  ///< all detail-band coefficients of the decomposition
  image,         ///< the image itself, in vec order
};

inline std::string_view to_string(SureMode m) {
  return m == SureMode::coefficients ? "coefficients" : "image";
}

inline SureMode parse_sure_mode(std::string_view s) {
  if (s == "coefficients") return SureMode::coefficients;
  if (s == "image") return SureMode::image;
  throw ParameterError("unknown sure mode '" + std::string(s) + "'");
}

inline std::vector<double> threshold_source(const FrameCoefficients& coeffs, const Image& img,
                                            SureMode mode) {
  if (mode == SureMode::image) return vec(img);
  return coeffs.detail_values();
}

/// Median absolute value of the finest-scale detail bands over 0.6745.
inline double mad_noise_estimate(const FrameCoefficients& coeffs) {
  int finest = 0;
  for (const Band& b : coeffs.bands) finest = std::max(finest, b.scale);
  std::vector<double> mags;
  for (const Band& b : coeffs.bands) {
    if (b.coarse || b.scale != finest) continue;
    for (double v : b.data.values()) mags.push_back(std::abs(v));
  }
  if (mags.empty()) return 0.0;
  auto mid = mags.begin() + static_cast<std::ptrdiff_t>(mags.size() / 2);
  std::nth_element(mags.begin(), mid, mags.end());
  return *mid / 0.6745;
}

/// SURE threshold for one denoising pass. With `mad_rescale`, values are
/// divided by the MAD noise estimate before the search and lambda is scaled back.
inline SureResult select_threshold(const FrameCoefficients& coeffs, const Image& img,
                                   SureMode mode, bool mad_rescale = false) {
  std::vector<double> values = threshold_source(coeffs, img, mode);
  double scale = 1.0;
  if (mad_rescale) {
    const double sigma = mad_noise_estimate(coeffs);
    if (sigma > 0.0) scale = sigma;
  }
  if (scale != 1.0) {
    for (double& v : values) v /= scale;
  }
  SureResult r = sure_threshold(values);
  r.lambda *= scale;
  return r;
}

/// CSV with columns j, a, risk.
inline void write_risk_csv(std::ostream& out, const RiskCurve& curve) {
  out << "j,a,risk\n";
  out.precision(17);
  for (std::size_t k = 0; k < curve.size(); ++k) {
    out << (k + 1) << ',' << curve.a[k] << ',' << curve.risk[k] << '\n';
  }
}

}  // namespace tfae
