#pragma once

// Synthetic tube phantoms with exact ground truth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "tfae/error.hpp"
#include "tfae/image.hpp"

namespace tfae {

struct Point2 {
  double x = 0.0;  // column
  double y = 0.0;  // row
};

struct Tube {
  std::vector<Point2> centerline;  ///< polyline, at least one point
  double radius = 2.0;
  double peak = 0.8;
  bool faint_branch = false;
};

/// Multiplies tube contrast by `factor` inside a disk; models dark junctions and gaps.
struct Shade {
  Point2 center;
  double radius = 4.0;
  double factor = 0.5;
};

struct PhantomSpec {
  std::size_t width = 128;
  std::size_t height = 128;
  double background = 0.1;
  double edge_width = 0.6;  ///< std of the Gaussian that softens each tube wall
  std::vector<Tube> tubes;
  std::vector<Shade> shades;
  double noise_sigma = 0.05;
  std::uint64_t rng_seed = 0;
};

struct Phantom {
  Image image;
  BinaryMask truth;        ///< within radius of any centerline
  BinaryMask faint_truth;  ///< the part of `truth` belonging to faint branches
};

/// Exact Euclidean distance from p to the segment [a, b].
inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) t = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

inline double distance_to_polyline(Point2 p, const std::vector<Point2>& line) {
  if (line.size() == 1) return std::hypot(p.x - line[0].x, p.y - line[0].y);
  double d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    d = std::min(d, point_segment_distance(p, line[i], line[i + 1]));
  }
  return d;
}

inline void validate(const PhantomSpec& spec) {
  if (spec.width < 32 || spec.height < 32) throw ParameterError("phantom must be at least 32x32");
  if (!(spec.noise_sigma >= 0.0)) throw ParameterError("noise sigma must be >= 0");
  if (spec.background < 0.0 || spec.background > 1.0) throw ParameterError("background outside [0,1]");
  if (!(spec.edge_width > 0.0)) throw ParameterError("edge width must be > 0");
  for (const Tube& t : spec.tubes) {
    if (t.centerline.empty()) throw ParameterError("tube without centerline");
    if (!(t.radius > 0.0)) throw ParameterError("tube radius must be > 0");
    if (t.peak < 0.0 || t.peak > 1.0) throw ParameterError("tube peak outside [0,1]");
  }
}

/// Renders tubes with soft walls over a flat background, adds seeded
/// Gaussian noise and clamps to [0,1]. Deterministic in (spec, seed).
inline Phantom render_phantom(const PhantomSpec& spec) {
  validate(spec);
  Phantom ph{Image(spec.width, spec.height, spec.background), BinaryMask(spec.width, spec.height),
             BinaryMask(spec.width, spec.height)};
  for (std::size_t r = 0; r < spec.height; ++r) {
    for (std::size_t c = 0; c < spec.width; ++c) {
      const Point2 p{static_cast<double>(c), static_cast<double>(r)};
      double shade = 1.0;
      for (const Shade& s : spec.shades) {
        if (std::hypot(p.x - s.center.x, p.y - s.center.y) <= s.radius) shade = std::min(shade, s.factor);
      }
      double contrast = 0.0;
      bool inside = false;
      bool faint = false;
      for (const Tube& t : spec.tubes) {
        const double d = distance_to_polyline(p, t.centerline);
        const double profile = 0.5 * std::erfc((d - t.radius) / (std::numbers::sqrt2 * spec.edge_width));
        contrast = std::max(contrast, (t.peak - spec.background) * profile);
        if (d <= t.radius) {
          inside = true;
          faint = faint || t.faint_branch;
        }
      }
      ph.image(r, c) = spec.background + shade * contrast;
      ph.truth.set(Pixel{r, c}, inside);
      ph.faint_truth.set(Pixel{r, c}, faint);
    }
  }
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.rng_seed);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (double& v : ph.image.values()) v += noise(rng);
  }
  ph.image = clamp_unit(std::move(ph.image));
  return ph;
}

/// Named phantom families; geometry is jittered by the seed.
inline const std::vector<std::string>& phantom_families() {
  static const std::vector<std::string> names{"straight", "curved",        "crossing", "tree",
                                              "faint_branch", "dark_junction", "gap"};
  return names;
}

inline PhantomSpec make_phantom_spec(const std::string& family, std::size_t width, std::size_t height,
                                     double noise_sigma, std::uint64_t seed) {
  PhantomSpec spec;
  spec.width = width;
  spec.height = height;
  spec.noise_sigma = noise_sigma;
  spec.rng_seed = seed;
  std::mt19937_64 geo(seed ^ 0x9E3779B97F4A7C15ULL);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const double W = static_cast<double>(width);
  const double H = static_cast<double>(height);
  auto pt = [&](double fx, double fy, double amount = 0.04) {
    return Point2{(fx + amount * jitter(geo)) * W, (fy + amount * jitter(geo)) * H};
  };

  if (family == "straight") {
    spec.tubes.push_back(Tube{{pt(0.2, -0.1), pt(0.8, 1.1)}, 3.0, 0.8});
  } else if (family == "curved") {
    std::vector<Point2> line;
    const double phase = jitter(geo);
    for (int i = 0; i <= 24; ++i) {
      const double t = i / 24.0;
      line.push_back(Point2{(0.5 + 0.22 * std::sin(2.0 * std::numbers::pi * t + phase)) * W,
                            (-0.05 + 1.1 * t) * H});
    }
    spec.tubes.push_back(Tube{line, 2.5, 0.8});
  } else if (family == "crossing") {
    spec.tubes.push_back(Tube{{pt(0.1, 0.2), pt(0.9, 0.8)}, 3.0, 0.8});
    spec.tubes.push_back(Tube{{pt(0.15, 0.85), pt(0.85, 0.1)}, 2.5, 0.75});
  } else if (family == "tree") {
    const Point2 fork = pt(0.5, 0.5);
    spec.tubes.push_back(Tube{{pt(0.5, -0.05, 0.02), fork}, 3.5, 0.8});
    spec.tubes.push_back(Tube{{fork, pt(0.2, 1.05)}, 2.5, 0.8});
    spec.tubes.push_back(Tube{{fork, pt(0.8, 1.05)}, 2.5, 0.8});
  } else if (family == "faint_branch") {
    const Point2 a = pt(0.5, 0.35, 0.03);
    const Point2 b = pt(0.5, 0.65, 0.03);
    spec.tubes.push_back(Tube{{pt(0.5, -0.05, 0.02), a, b, pt(0.5, 1.05, 0.02)}, 3.0, 0.85});
    spec.tubes.push_back(Tube{{a, pt(0.15, 0.2)}, 1.5, 0.35, true});
    spec.tubes.push_back(Tube{{b, pt(0.85, 0.85)}, 1.5, 0.35, true});
  } else if (family == "dark_junction") {
    const Point2 j = pt(0.5, 0.45);
    spec.tubes.push_back(Tube{{pt(0.5, -0.05, 0.02), j}, 3.0, 0.8});
    spec.tubes.push_back(Tube{{j, pt(0.15, 1.05)}, 2.5, 0.8});
    spec.tubes.push_back(Tube{{j, pt(0.85, 1.05)}, 2.5, 0.8});
    spec.shades.push_back(Shade{j, 0.08 * std::min(W, H), 0.55});
  } else if (family == "gap") {
    const Point2 a = pt(0.1, 0.3);
    const Point2 b = pt(0.9, 0.7);
    spec.tubes.push_back(Tube{{a, b}, 1.5, 0.7});
    spec.shades.push_back(Shade{Point2{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}, 4.0, 0.45});
  } else {
    throw ParameterError("unknown phantom family '" + family + "'");
  }
  return spec;
}

}  // namespace tfae
