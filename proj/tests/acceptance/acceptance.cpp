// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Runs without GoogleTest so the output stays one line per check.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "test_util.hpp"
#include "tfae/metrics.hpp"
#include "tfae/phantom.hpp"
#include "tfae/scale_space.hpp"
#include "tfae/segmenter.hpp"
#include "tfae/sure.hpp"
#include "tfae/tight_frame.hpp"

using namespace tfae;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

const std::vector<std::pair<std::size_t, std::size_t>> kFrameSizes{
    {32, 32}, {64, 64}, {128, 96}, {256, 256}};
const std::vector<TransformFamily> kFamilies{TransformFamily::framelet, TransformFamily::curvelet};

// 1 and 2 share the corpus: 20 images per size, both families.
struct FrameErrors {
  double identity = 0.0;
  double parseval = 0.0;
};

FrameErrors frame_errors() {
  FrameErrors e;
  std::mt19937_64 rng(101);
  for (auto [w, h] : kFrameSizes) {
    for (int i = 0; i < 20; ++i) {
      const Image f = testutil::random_image(rng, w, h);
      const double nf = testutil::l2_norm(f);
      for (TransformFamily fam : kFamilies) {
        const TransformKind k = TransformKind::default_for(fam, w, h);
        const FrameCoefficients c = decompose(f, k);
        e.identity = std::max(e.identity, testutil::max_abs_diff(reconstruct(c, k), f));
        e.parseval = std::max(e.parseval, std::abs(std::sqrt(c.energy()) - nf) / nf);
      }
    }
  }
  return e;
}

Outcome tight_frame_identity(const FrameErrors& e) {
  return {e.identity <= 1e-6, "max |IC(C f) - f| = " + fmt(e.identity)};
}

Outcome parseval(const FrameErrors& e) {
  return {e.parseval <= 1e-6, "max relative norm gap = " + fmt(e.parseval)};
}

std::size_t oracle_sure_index(const std::vector<double>& v) {
  std::vector<double> mags;
  for (double x : v) mags.push_back(std::abs(x));
  std::sort(mags.begin(), mags.end());
  const auto n = static_cast<double>(v.size());
  std::size_t best = 0;
  double best_risk = std::numeric_limits<double>::infinity();
  for (std::size_t j = 1; j <= mags.size(); ++j) {
    const double t = mags[j - 1];
    double s = 0.0;
    for (double x : v) s += std::min(x * x, t * t);
    const double risk = (n - 2.0 * static_cast<double>(j) + s) / n;
    if (risk < best_risk) {
      best_risk = risk;
      best = j;
    }
  }
  return best;
}

Outcome sure_oracle() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<std::size_t> len(1, 512);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = trial == 0 ? 1 : (trial == 1 ? 512 : len(rng));
    std::vector<double> v(n);
    switch (trial % 4) {
      case 0:  // dense
        for (double& x : v) x = gauss(rng);
        break;
      case 1:  // sparse: mostly zero, a few spikes
        for (double& x : v) x = unit(rng) < 0.1 ? 5.0 * gauss(rng) : 0.0;
        break;
      case 2:  // dense noise plus sparse signal
        for (double& x : v) x = 0.3 * gauss(rng) + (unit(rng) < 0.05 ? 4.0 * gauss(rng) : 0.0);
        break;
      default:  // small integers, many ties
        for (double& x : v) x = std::round(3.0 * gauss(rng));
        break;
    }
    if (sure_threshold(v).curve.i_best != oracle_sure_index(v)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " of 200 index mismatches"};
}

template <typename F>
Image sample(std::size_t w, std::size_t h, F fn) {
  Image img(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) img(r, c) = fn(static_cast<double>(c), static_cast<double>(r));
  }
  return img;
}

Outcome derivative_fidelity() {
  const double sigma = 2.0;
  const std::size_t n = 64;
  const auto margin = static_cast<std::size_t>(gaussian_derivative_kernel(2, 0, sigma).radius) + 1;
  const Image ramp = sample(n, n, [](double x, double y) { return 0.2 + 0.004 * x - 0.003 * y; });
  // f = p x^2 + q xy + s y^2 + linear terms
  const double p = 2e-4, q = -1.5e-4, s = 1e-4;
  const Image quad = sample(n, n, [&](double x, double y) {
    return 0.1 + 0.001 * x + 0.002 * y + p * x * x + q * x * y + s * y * y;
  });
  const VectorField gr = gradient_field(ramp, sigma);
  const VectorField gq = gradient_field(quad, sigma);
  const HessianField hq = hessian_field(quad, sigma);
  double ramp_err = 0.0, quad_err = 0.0;
  for (std::size_t r = margin; r + margin < n; ++r) {
    for (std::size_t c = margin; c + margin < n; ++c) {
      const double x = static_cast<double>(c), y = static_cast<double>(r);
      ramp_err = std::max({ramp_err, std::abs(gr.gx(r, c) - 0.004), std::abs(gr.gy(r, c) + 0.003)});
      quad_err = std::max({quad_err, std::abs(gq.gx(r, c) - (0.001 + 2 * p * x + q * y)),
                           std::abs(gq.gy(r, c) - (0.002 + q * x + 2 * s * y)),
                           std::abs(hq.fxx(r, c) - 2 * p), std::abs(hq.fxy(r, c) - q),
                           std::abs(hq.fyy(r, c) - 2 * s)});
    }
  }
  return {ramp_err <= 1e-6 && quad_err <= 1e-3,
          "ramp err " + fmt(ramp_err) + ", quadratic err " + fmt(quad_err)};
}

Outcome eigen_contract() {
  double residual = 0.0, norm_err = 0.0;
  std::mt19937_64 rng(303);
  for (int i = 0; i < 5; ++i) {
    const Image f = testutil::random_image(rng, 64, 64);
    const HessianField hf = hessian_field(f, 2.0);
    const EigenField e = eigen_field(hf);
    for (std::size_t k = 0; k < f.size(); ++k) {
      const double a = hf.fxx.values()[k], b = hf.fxy.values()[k], c = hf.fyy.values()[k];
      const double vx = e.vx.values()[k], vy = e.vy.values()[k], l = e.lambda.values()[k];
      const double scale = std::max(std::sqrt(a * a + 2 * b * b + c * c), 1e-300);
      residual = std::max(residual, std::hypot(a * vx + b * vy - l * vx, b * vx + c * vy - l * vy) / scale);
      norm_err = std::max(norm_err, std::abs(std::hypot(vx, vy) - 1.0));
    }
  }

  // Oblique straight tube; the cross-section direction is the line normal.
  PhantomSpec spec;
  spec.width = spec.height = 128;
  spec.noise_sigma = 0.0;
  const Point2 a{20.0, 8.0}, b{100.0, 120.0};
  spec.tubes.push_back(Tube{{a, b}, 3.0, 0.8});
  const Image tube = render_phantom(spec).image;
  const EigenField e = hessian_eigen(tube, 2.0);
  const double len = std::hypot(b.x - a.x, b.y - a.y);
  const double nx = -(b.y - a.y) / len, ny = (b.x - a.x) / len;
  std::size_t total = 0, aligned = 0;
  for (std::size_t r = 16; r + 16 < 128; ++r) {
    for (std::size_t c = 16; c + 16 < 128; ++c) {
      const Point2 pt{static_cast<double>(c), static_cast<double>(r)};
      if (point_segment_distance(pt, a, b) >= 0.5) continue;
      ++total;
      if (std::abs(e.vx(r, c) * nx + e.vy(r, c) * ny) >= 0.95) ++aligned;
    }
  }
  const double frac = total ? static_cast<double>(aligned) / static_cast<double>(total) : 0.0;
  return {residual <= 1e-8 && norm_err <= 1e-10 && total > 50 && frac >= 0.9,
          "residual " + fmt(residual) + ", norm err " + fmt(norm_err) + ", centerline aligned " +
              std::to_string(aligned) + "/" + std::to_string(total)};
}

Outcome termination_and_binarity() {
  int runs = 0, bad = 0;
  std::string first_bad;
  for (const std::string& family : phantom_families()) {
    for (double noise : {0.05, 0.15}) {
      for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const Image img = render_phantom(make_phantom_spec(family, 128, 128, noise, seed)).image;
        for (Mode mode : {Mode::tfae, Mode::tfa}) {
          SegmenterConfig cfg;
          cfg.mode = mode;
          bool two_valued = true;
          std::vector<std::size_t> counts;
          const SegmentationResult res = run(img, cfg, [&](const IterationState& s) {
            counts.push_back(s.record.active_count);
            if (s.active.empty()) {
              for (double v : s.image.values()) two_valued = two_valued && (v == 0.0 || v == 1.0);
            }
          });
          ++runs;
          const bool ok = (res.trace.reason == Termination::empty_set ||
                           res.trace.reason == Termination::stall_fallback) &&
                          res.trace.iterations <= 50 && two_valued &&
                          std::is_sorted(counts.rbegin(), counts.rend());
          if (!ok) {
            ++bad;
            if (first_bad.empty()) {
              first_bad = "; first failure " + family + " noise " + fmt(noise) + " seed " +
                          std::to_string(seed) + " " + std::string(to_string(mode));
            }
          }
        }
      }
    }
  }
  return {bad == 0, std::to_string(runs - bad) + "/" + std::to_string(runs) + " runs" + first_bad};
}

// High-contrast tube families; faint_branch and gap are excluded because
// their low-contrast parts are the point of criterion 8.
const std::vector<std::string> kTubeFamilies{"straight", "curved", "crossing", "tree",
                                             "dark_junction"};

Outcome segmentation_quality() {
  double worst_clean = 1.0, worst_noisy = 1.0;
  for (const std::string& family : kTubeFamilies) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      for (double noise : {0.05, 0.15}) {
        const Phantom ph = render_phantom(make_phantom_spec(family, 128, 128, noise, seed));
        const double d = score(run(ph.image, SegmenterConfig{}).mask, ph.truth).dice;
        (noise < 0.1 ? worst_clean : worst_noisy) = std::min(noise < 0.1 ? worst_clean : worst_noisy, d);
      }
    }
  }
  return {worst_clean >= 0.9 && worst_noisy >= 0.75,
          "min Dice clean " + fmt(worst_clean) + ", noisy " + fmt(worst_noisy)};
}

struct ModeComparison {
  int instances = 0;
  int not_more_iterations = 0;
  int fewer_iterations = 0;
  int faint_superset = 0;
  int containment = 0;
  std::string iteration_failures;
};

ModeComparison compare_modes() {
  ModeComparison m;
  for (double noise : {0.05, 0.10, 0.15}) {
    for (std::uint64_t seed = 1; seed <= 8; ++seed) {
      const Phantom ph = render_phantom(make_phantom_spec("faint_branch", 128, 128, noise, seed));
      SegmenterConfig tfa_cfg, tfae_cfg;
      tfa_cfg.mode = Mode::tfa;
      tfae_cfg.mode = Mode::tfae;
      const SegmentationResult tfa = run(ph.image, tfa_cfg);
      const SegmentationResult tfae = run(ph.image, tfae_cfg);
      ++m.instances;
      if (tfae.trace.iterations <= tfa.trace.iterations) {
        ++m.not_more_iterations;
      } else {
        m.iteration_failures += " noise " + fmt(noise) + " seed " + std::to_string(seed) + " (tfa " +
                                std::to_string(tfa.trace.iterations) + ", tfae " +
                                std::to_string(tfae.trace.iterations) + ")";
      }
      if (tfae.trace.iterations < tfa.trace.iterations) ++m.fewer_iterations;

      bool superset = true;
      for (std::size_t i = 0; i < ph.truth.size(); ++i) {
        const Pixel p{i / 128, i % 128};
        if (ph.faint_truth[p] && tfa.mask[p] && !tfae.mask[p]) superset = false;
      }
      m.faint_superset += superset;

      // Iteration 0 of both modes from identical inputs.
      const SegmenterConfig cfg;
      const VectorField g = gradient_field(ph.image, cfg.sigma);
      const EigenField e = hessian_eigen(ph.image, cfg.sigma);
      const Image smoothed = convolve(ph.image, gaussian_derivative_kernel(0, 0, cfg.sigma));
      const PixelSet a0 = initial_active_set(g, cfg.epsilon);
      const DecisionParams params = decision_params(ph.image, a0, e, g);
      const ThresholdResult s_tfa = threshold_step(ph.image, a0, params, e, Mode::tfa);
      const ThresholdResult s_tfae = threshold_step(ph.image, a0, params, e, Mode::tfae);
      const Image c_tfa = classify_complement(s_tfa.f_t, smoothed, a0, params, e, Mode::tfa);
      const Image c_tfae = classify_complement(s_tfae.f_t, smoothed, a0, params, e, Mode::tfae);
      bool contained = true;
      for (std::size_t i = 0; i < c_tfa.size(); ++i) {
        if (c_tfa.values()[i] == 1.0 && c_tfae.values()[i] != 1.0) contained = false;
      }
      m.containment += contained;
    }
  }
  return m;
}

std::string run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  if (status == -1 || !WIFEXITED(status)) return "could not run";
  return WEXITSTATUS(status) == 0 ? "" : "exit " + std::to_string(WEXITSTATUS(status));
}

// Improvement count over 100 noisy phantoms for one transform family.
int mse_improvements(TransformFamily fam, bool mad_rescale) {
  auto mse = [](const Image& a, const Image& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a.values()[i] - b.values()[i];
      s += d * d;
    }
    return s / static_cast<double>(a.size());
  };
  int improved = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto seed = static_cast<std::uint64_t>(trial + 1);
    const std::string& family = phantom_families()[static_cast<std::size_t>(trial) % 7];
    const Image clean = render_phantom(make_phantom_spec(family, 128, 128, 0.0, seed)).image;
    const double sigma_n = 0.05 + 0.05 * (trial % 3);
    std::mt19937_64 rng(seed * 7919);
    std::normal_distribution<double> noise(0.0, sigma_n);
    Image noisy = clean;
    for (double& v : noisy.values()) v += noise(rng);
    const TransformKind k = TransformKind::default_for(fam, 128, 128);
    const FrameCoefficients c = decompose(noisy, k);
    const double lambda = select_threshold(c, noisy, SureMode::coefficients, mad_rescale).lambda;
    const Image denoised = reconstruct(hard_threshold(c, lambda), k);
    improved += mse(denoised, clean) < mse(noisy, clean);
  }
  return improved;
}

// Gated on the curvelet transform, which is the denoiser of the iteration.
// The framelet counts are informational.
Outcome denoising_improves_mse() {
  const int curvelet = mse_improvements(TransformFamily::curvelet, false);
  const int framelet = mse_improvements(TransformFamily::framelet, false);
  const int framelet_mad = mse_improvements(TransformFamily::framelet, true);
  return {curvelet >= 95, "curvelet " + std::to_string(curvelet) + "/100 (framelet " +
                              std::to_string(framelet) + "/100, with MAD rescale " +
                              std::to_string(framelet_mad) + "/100)"};
}

Outcome determinism() {
  testutil::TempDir dir;
  const std::string cli = TFAE_CLI_PATH;
  const std::string quiet = " >/dev/null 2>&1";
  std::string err = run_command(cli + " phantom --family faint_branch --noise 0.1 --seed 3 --output " +
                                dir.file("in.png") + quiet);
  if (!err.empty()) return {false, "phantom generation failed: " + err};
  for (const char* tag : {"a", "b"}) {
    err = run_command(cli + " segment --input " + dir.file("in.png") + " --output " +
                      dir.file(std::string("mask_") + tag + ".png") + " --trace " +
                      dir.file(std::string("trace_") + tag + ".jsonl") + quiet);
    if (!err.empty()) return {false, std::string("segment run ") + tag + " failed: " + err};
  }
  const auto mask_a = testutil::read_bytes(dir.file("mask_a.png"));
  const auto mask_b = testutil::read_bytes(dir.file("mask_b.png"));
  const auto trace_a = testutil::read_bytes(dir.file("trace_a.jsonl"));
  const auto trace_b = testutil::read_bytes(dir.file("trace_b.jsonl"));
  const bool masks = !mask_a.empty() && mask_a == mask_b;
  const bool traces = !trace_a.empty() && trace_a == trace_b;
  return {masks && traces, std::string("mask ") + (masks ? "identical" : "differs") + ", trace " +
                               (traces ? "identical" : "differs")};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](const std::string& id, const std::string& name, const std::function<Outcome()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << ' ' << name << ": " << o.detail << " ["
              << fmt(secs) << " s]" << std::endl;
  };

  FrameErrors frame;
  report("1", "tight-frame identity", [&] {
    frame = frame_errors();
    return tight_frame_identity(frame);
  });
  report("2", "Parseval", [&] { return parseval(frame); });
  report("3", "SURE oracle index", sure_oracle);
  report("4", "derivative fidelity", derivative_fidelity);
  report("5", "eigen contract", eigen_contract);
  report("6", "termination and binarity", termination_and_binarity);
  report("7", "segmentation quality", segmentation_quality);

  ModeComparison modes;
  report("8a", "tfae iterations <= tfa", [&] {
    modes = compare_modes();
    const bool pass = modes.not_more_iterations == modes.instances && modes.fewer_iterations >= 1;
    return Outcome{pass, std::to_string(modes.not_more_iterations) + "/" + std::to_string(modes.instances) +
                             " not more, " + std::to_string(modes.fewer_iterations) + " strictly fewer" +
                             (modes.iteration_failures.empty() ? "" : "; exceeded on" + modes.iteration_failures)};
  });
  report("8b", "faint-branch superset", [&] {
    return Outcome{modes.faint_superset * 10 >= modes.instances * 8,
                   std::to_string(modes.faint_superset) + "/" + std::to_string(modes.instances) + " instances"};
  });
  report("8c", "iteration-0 mode containment", [&] {
    return Outcome{modes.instances > 0 && modes.containment == modes.instances,
                   std::to_string(modes.containment) + "/" + std::to_string(modes.instances) + " instances"};
  });
  report("9", "denoising improves MSE", denoising_improves_mse);
  report("10", "CLI determinism", determinism);

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
