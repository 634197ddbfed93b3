#pragma once

// Iterative classify / stretch / denoise segmentation of tubular structures.
//
// Each iteration works on the active set of still-unclassified pixels:
//   1. locate the active pixel of largest gradient magnitude;
//   2. compute the active-set intensity means M, M_p, M_n, the interval
//      [alpha, beta], and the mean orientation coherence with that pixel;
//   3. send active pixels to 0 (f <= alpha), 1 (f >= beta, or in tfae mode
//      f >= M with coherence >= the mean coherence), and linearly stretch the
//      rest; the stretched pixels strictly inside (0,1) form the next active set;
//   4. denoise the stretched image with a SURE-thresholded tight frame and
//      copy the result back on the next active set only.
// The loop ends when the active set is empty; the image is then binary.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "tfae/error.hpp"
#include "tfae/image.hpp"
#include "tfae/scale_space.hpp"
#include "tfae/sure.hpp"
#include "tfae/tight_frame.hpp"

namespace tfae {

/// tfa: baseline rule. tfae: adds the eigenvector-coherence vessel clause.
enum class Mode { tfa, tfae };

inline std::string_view to_string(Mode m) { return m == Mode::tfa ? "tfa" : "tfae"; }

inline Mode parse_mode(std::string_view s) {
  if (s == "tfa") return Mode::tfa;
  if (s == "tfae") return Mode::tfae;
  throw ParameterError("unknown mode '" + std::string(s) + "'");
}

struct SegmenterConfig {
  double sigma = 2.0;
  double epsilon = 0.02;
  Mode mode = Mode::tfae;
  TransformFamily transform = TransformFamily::curvelet;
  int scales = 0;  ///< 0 picks the size-dependent default
  SureMode sure_mode = SureMode::coefficients;
  bool mad_rescale = false;
  int max_iterations = 50;
  int stall_patience = 3;

  void validate() const {
    if (!(sigma > 0.0)) throw ParameterError("sigma must be > 0");
    if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
    if (max_iterations < 1) throw ParameterError("max_iterations must be >= 1");
    if (stall_patience < 1) throw ParameterError("stall_patience must be >= 1");
    if (scales < 0) throw ParameterError("scales must be >= 0");
  }

  TransformKind transform_kind(std::size_t width, std::size_t height) const {
    if (scales == 0) return TransformKind::default_for(transform, width, height);
    return transform == TransformFamily::framelet ? TransformKind::framelet(scales)
                                                  : TransformKind::curvelet(scales);
  }
};

struct DecisionParams {
  double mean_coherence = 0.0;
  double M = 0.0;
  double M_p = 0.0;
  double M_n = 0.0;
  double alpha = 0.0;
  double beta = 1.0;
  Pixel max_p;
  double max_g = 0.0;
};

enum class Termination { empty_set, stall_fallback, max_iterations };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::empty_set: return "empty_set";
    case Termination::stall_fallback: return "stall_fallback";
    case Termination::max_iterations: return "max_iterations";
  }
  return "?";
}

struct IterationRecord {
  int iter = 0;
  std::size_t active_count = 0;
  std::size_t next_active_count = 0;
  DecisionParams params;
  double lambda = std::numeric_limits<double>::quiet_NaN();  ///< NaN when no denoising ran
  double wall_seconds = 0.0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;
  int iterations = 0;
  Termination reason = Termination::empty_set;
};

/// Pixels with gradient magnitude >= epsilon.
inline PixelSet initial_active_set(const VectorField& grad, double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be > 0");
  return PixelSet::from_predicate(grad.width(), grad.height(),
                                  [&](Pixel p) { return grad.magnitude[p] >= epsilon; });
}

/// Active pixel of largest gradient magnitude; ties go to the smallest row, then column.
inline std::pair<Pixel, double> max_gradient_pixel(const VectorField& grad, const PixelSet& active) {
  if (active.empty()) throw std::logic_error("max_gradient_pixel: empty active set");
  require_same_shape(grad.magnitude, active.grid(), "max_gradient_pixel");
  Pixel best;
  double best_mag = -1.0;
  for (std::size_t r = 0; r < active.height(); ++r) {
    for (std::size_t c = 0; c < active.width(); ++c) {
      if (!active.contains(r, c)) continue;
      const double m = grad.magnitude(r, c);
      if (m > best_mag) {
        best_mag = m;
        best = Pixel{r, c};
      }
    }
  }
  return {best, best_mag};
}

inline DecisionParams decision_params(const Image& f, const PixelSet& active,
                                      const EigenField& eigen, const VectorField& grad) {
  if (active.empty()) throw std::logic_error("decision_params: empty active set");
  require_same_shape(f, active.grid(), "decision_params");
  DecisionParams p;
  std::tie(p.max_p, p.max_g) = max_gradient_pixel(grad, active);

  double sum = 0.0;
  double coherence = 0.0;
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (!active.contains(r, c)) continue;
      sum += f(r, c);
      coherence += orientation_coherence(eigen, p.max_p, Pixel{r, c});
    }
  }
  const auto n = static_cast<double>(active.count());
  p.M = sum / n;
  p.mean_coherence = coherence / n;

  // Pixels equal to M count toward both sides.
  double sum_p = 0.0, sum_n = 0.0;
  std::size_t n_p = 0, n_n = 0;
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (!active.contains(r, c)) continue;
      const double v = f(r, c);
      if (v >= p.M) {
        sum_p += v;
        ++n_p;
      }
      if (v <= p.M) {
        sum_n += v;
        ++n_n;
      }
    }
  }
  // Both sides are nonempty: the extremes of a finite set bracket its mean.
  p.M_p = n_p ? sum_p / static_cast<double>(n_p) : p.M;
  p.M_n = n_n ? sum_n / static_cast<double>(n_n) : p.M;
  p.alpha = std::max(0.5 * (p.M + p.M_n), 0.0);
  p.beta = std::min(0.5 * (p.M + p.M_p), 1.0);
  return p;
}

namespace detail {

/// Vessel test shared by the active and complement rules.
inline bool vessel_clause(double v, Pixel px, const DecisionParams& params, const EigenField& eigen,
                          Mode mode) {
  if (v >= params.beta) return true;
  return mode == Mode::tfae && v >= params.M &&
         orientation_coherence(eigen, params.max_p, px) >= params.mean_coherence;
}

}  // namespace detail

struct ThresholdResult {
  Image f_t;
  PixelSet next_active;
};

/// Three-way classification of the active pixels; inactive pixels are copied.
///
/// Stretching uses the extrema of f over {alpha <= f <= beta} within the
/// active set. If that band is empty or flat, the remaining pixels are
/// binarized at M instead.
inline ThresholdResult threshold_step(const Image& f, const PixelSet& active,
                                      const DecisionParams& params, const EigenField& eigen,
                                      Mode mode) {
  require_same_shape(f, active.grid(), "threshold_step");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (!active.contains(r, c)) continue;
      const double v = f(r, c);
      if (v >= params.alpha && v <= params.beta) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  const bool degenerate = !(hi > lo);

  ThresholdResult out{f, PixelSet(f.width(), f.height())};
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (!active.contains(r, c)) continue;
      const Pixel px{r, c};
      const double v = f[px];
      double t;
      if (v <= params.alpha) {
        t = 0.0;
      } else if (detail::vessel_clause(v, px, params, eigen, mode)) {
        t = 1.0;
      } else if (degenerate) {
        t = v >= params.M ? 1.0 : 0.0;
      } else {
        t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
      }
      out.f_t[px] = t;
      if (t > 0.0 && t < 1.0) out.next_active.insert(px);
    }
  }
  return out;
}

/// Binarizes every pixel outside `active`, deciding on `smoothed` (the
/// image at the scale-space sigma) with the same rule as the active pixels
/// except that the stretch case is resolved against M. Those pixels have a
/// small gradient, so their smoothed value stands for their neighbourhood.
/// Used once, on the first iteration, so that the whole grid is two-valued
/// at termination.
inline Image classify_complement(const Image& f, const Image& smoothed, const PixelSet& active,
                                 const DecisionParams& params, const EigenField& eigen, Mode mode) {
  require_same_shape(f, active.grid(), "classify_complement");
  require_same_shape(f, smoothed, "classify_complement");
  Image out = f;
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (active.contains(r, c)) continue;
      const Pixel px{r, c};
      const double v = smoothed[px];
      double t;
      if (v <= params.alpha) {
        t = 0.0;
      } else if (detail::vessel_clause(v, px, params, eigen, mode)) {
        t = 1.0;
      } else {
        t = v >= params.M ? 1.0 : 0.0;
      }
      out[px] = t;
    }
  }
  return out;
}

struct DenoiseResult {
  Image image;
  double lambda = std::numeric_limits<double>::quiet_NaN();
  RiskCurve curve;
};

/// Tight-frame denoising of f_t, written back on `next_active` only, then
/// clamped to [0,1]. An empty set returns f_t unchanged without transforming.
inline DenoiseResult denoise_step(const Image& f_t, const PixelSet& next_active,
                                  const SegmenterConfig& cfg) {
  require_same_shape(f_t, next_active.grid(), "denoise_step");
  if (next_active.empty()) return DenoiseResult{f_t, std::numeric_limits<double>::quiet_NaN(), {}};
  const TransformKind kind = cfg.transform_kind(f_t.width(), f_t.height());
  const FrameCoefficients coeffs = decompose(f_t, kind);
  SureResult sure = select_threshold(coeffs, f_t, cfg.sure_mode, cfg.mad_rescale);
  const Image denoised = reconstruct(hard_threshold(coeffs, sure.lambda), kind);
  const std::vector<double> blended = blend_on_set(vec(f_t), vec(denoised), next_active);
  Image out = clamp_unit(unvec<double>(blended, f_t.width(), f_t.height()));
  return DenoiseResult{std::move(out), sure.lambda, std::move(sure.curve)};
}

struct SegmentationResult {
  BinaryMask mask;
  IterationTrace trace;
};

/// State handed to the per-iteration observer after each step.
struct IterationState {
  const IterationRecord& record;
  const Image& image;            ///< f after the step (binary when the run ends)
  const PixelSet& active;        ///< active set for the next step
  const DenoiseResult* denoise;  ///< null when no denoising ran
};

using IterationObserver = std::function<void(const IterationState&)>;

namespace detail {

inline void binarize_on(Image& f, const PixelSet& set, double threshold) {
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (set.contains(r, c)) f(r, c) = f(r, c) >= threshold ? 1.0 : 0.0;
    }
  }
}

}  // namespace detail

/// Runs the full iteration on `img` (intensities in [0,1]).
///
/// Gradient and Hessian eigen fields are computed once from `img`. Never
/// throws for convergence reasons; see `trace.reason`.
inline SegmentationResult run(const Image& img, const SegmenterConfig& cfg,
                              const IterationObserver& observer = {}) {
  cfg.validate();
  if (img.width() < 3 || img.height() < 3) throw DimensionError("image must be at least 3x3");
  const VectorField grad = gradient_field(img, cfg.sigma);
  const EigenField eigen = hessian_eigen(img, cfg.sigma);
  const Image smoothed = convolve(img, gaussian_derivative_kernel(0, 0, cfg.sigma));
  // Fail early rather than after the first threshold step.
  detail::validate_kind(cfg.transform_kind(img.width(), img.height()), img.width(), img.height());

  SegmentationResult result;
  IterationTrace& trace = result.trace;
  PixelSet active = initial_active_set(grad, cfg.epsilon);
  Image f = img;

  if (active.empty()) {
    detail::binarize_on(f, PixelSet::full(f.width(), f.height()), 0.5);
    trace.reason = Termination::empty_set;
    result.mask = BinaryMask::from_two_valued(f);
    return result;
  }

  int stalled = 0;
  for (int i = 0; i < cfg.max_iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const DecisionParams params = decision_params(f, active, eigen, grad);
    if (i == 0) f = classify_complement(f, smoothed, active, params, eigen, cfg.mode);
    ThresholdResult step = threshold_step(f, active, params, eigen, cfg.mode);
    if (!step.next_active.subset_of(active)) {
      throw std::logic_error("active set grew");  // unreachable by construction
    }

    IterationRecord rec;
    rec.iter = i;
    rec.active_count = active.count();
    rec.next_active_count = step.next_active.count();
    rec.params = params;
    trace.iterations = i + 1;

    auto finish = [&](Termination reason) {
      rec.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      trace.records.push_back(rec);
      trace.reason = reason;
      const PixelSet none(f.width(), f.height());
      if (observer) observer(IterationState{trace.records.back(), f, none, nullptr});
    };

    if (step.next_active.empty()) {
      f = std::move(step.f_t);
      finish(Termination::empty_set);
      break;
    }
    stalled = step.next_active.count() == active.count() ? stalled + 1 : 0;
    if (stalled >= cfg.stall_patience) {
      f = std::move(step.f_t);
      detail::binarize_on(f, step.next_active, params.M);
      finish(Termination::stall_fallback);
      break;
    }

    DenoiseResult den = denoise_step(step.f_t, step.next_active, cfg);
    rec.lambda = den.lambda;
    f = std::move(den.image);
    active = std::move(step.next_active);

    if (i + 1 == cfg.max_iterations) {
      detail::binarize_on(f, active, params.M);
      active = PixelSet(f.width(), f.height());
      finish(Termination::max_iterations);
      break;
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.records.push_back(rec);
    if (observer) observer(IterationState{trace.records.back(), f, active, &den});
  }
  result.mask = BinaryMask::from_two_valued(f);
  return result;
}

}  // namespace tfae
