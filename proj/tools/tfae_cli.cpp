// tfae: segment, phantom, metrics, compare.
//
// Exit codes: 0 success, 1 I/O failure, 2 bad flags or invalid parameters.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "tfae/error.hpp"
#include "tfae/image.hpp"
#include "tfae/image_io.hpp"
#include "tfae/metrics.hpp"
#include "tfae/phantom.hpp"
#include "tfae/scale_space.hpp"
#include "tfae/segmenter.hpp"
#include "tfae/sure.hpp"
#include "tfae/trace_io.hpp"

namespace {

using nlohmann::ordered_json;

struct SegmentFlags {
  std::string input;
  std::string output;
  std::string mode = "tfae";
  std::string transform = "curvelet";
  double sigma = 2.0;
  double epsilon = 0.02;
  int max_iters = 50;
  int scales = 0;
  int stall_patience = 3;
  std::string channel;
  std::string sure_mode = "coefficients";
  bool mad_rescale = false;
  std::string trace;
  std::string debug_dir;
};

void add_segment_flags(CLI::App* app, SegmentFlags& f, bool with_mode) {
  if (with_mode) {
    app->add_option("--mode", f.mode, "tfa | tfae")->check(CLI::IsMember({"tfa", "tfae"}));
  }
  app->add_option("--transform", f.transform, "framelet | curvelet")
      ->check(CLI::IsMember({"framelet", "curvelet"}));
  app->add_option("--sigma", f.sigma, "scale-space sigma")->check(CLI::PositiveNumber);
  app->add_option("--epsilon", f.epsilon, "initial gradient threshold")->check(CLI::PositiveNumber);
  app->add_option("--max-iters", f.max_iters, "iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--scales", f.scales, "transform scales (0 = size default)")
      ->check(CLI::NonNegativeNumber);
  app->add_option("--stall-patience", f.stall_patience, "iterations without shrink before fallback")
      ->check(CLI::PositiveNumber);
  app->add_option("--channel", f.channel, "gray | red | green | blue")
      ->check(CLI::IsMember({"gray", "red", "green", "blue"}));
  app->add_option("--sure-mode", f.sure_mode, "coefficients | image")
      ->check(CLI::IsMember({"coefficients", "image"}));
  app->add_flag("--mad-rescale", f.mad_rescale, "normalize SURE input by the MAD noise estimate");
  app->add_option("--trace", f.trace, "JSON-lines iteration trace");
}

tfae::SegmenterConfig to_config(const SegmentFlags& f) {
  tfae::SegmenterConfig cfg;
  cfg.sigma = f.sigma;
  cfg.epsilon = f.epsilon;
  cfg.mode = tfae::parse_mode(f.mode);
  cfg.transform = tfae::parse_transform_family(f.transform);
  cfg.max_iterations = f.max_iters;
  cfg.scales = f.scales;
  cfg.stall_patience = f.stall_patience;
  cfg.sure_mode = tfae::parse_sure_mode(f.sure_mode);
  cfg.mad_rescale = f.mad_rescale;
  cfg.validate();
  return cfg;
}

std::optional<tfae::Channel> to_channel(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return tfae::parse_channel(s);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw tfae::IoError("cannot write '" + path + "'");
  return out;
}

void write_trace(const std::string& path, const tfae::IterationTrace& trace) {
  std::ofstream out = open_out(path);
  tfae::write_trace_jsonl(out, trace);
  if (!out) throw tfae::IoError("cannot write '" + path + "'");
}

// Maps [min, max] of a field onto 0..1 for viewing.
tfae::Image normalized(const tfae::RealField& f) {
  const double lo = tfae::min_value(f);
  const double hi = tfae::max_value(f);
  tfae::Image out(f.width(), f.height(), 0.0);
  if (hi > lo) {
    for (std::size_t i = 0; i < f.size(); ++i) out.values()[i] = (f.values()[i] - lo) / (hi - lo);
  }
  return out;
}

// Gradient magnitude, eigenvector orientation and per-iteration risk curves.
void write_debug_maps(const std::string& dir, const tfae::Image& img, const tfae::SegmenterConfig& cfg) {
  std::filesystem::create_directories(dir);
  const tfae::VectorField grad = tfae::gradient_field(img, cfg.sigma);
  tfae::save_image_png(dir + "/gradient_magnitude.png", normalized(grad.magnitude));
  const tfae::EigenField eigen = tfae::hessian_eigen(img, cfg.sigma);
  tfae::Image angle(img.width(), img.height());
  for (std::size_t i = 0; i < angle.size(); ++i) {
    // Orientation modulo pi mapped onto [0,1].
    double a = std::atan2(eigen.vy.values()[i], eigen.vx.values()[i]);
    if (a < 0.0) a += std::numbers::pi;
    angle.values()[i] = a / std::numbers::pi;
  }
  tfae::save_image_png(dir + "/eigen_orientation.png", angle);
}

tfae::IterationObserver risk_dumper(const std::string& dir) {
  if (dir.empty()) return {};
  return [dir](const tfae::IterationState& s) {
    if (!s.denoise) return;
    std::ofstream out = open_out(dir + "/risk_iter" + std::to_string(s.record.iter) + ".csv");
    tfae::write_risk_csv(out, s.denoise->curve);
  };
}

int cmd_segment(const SegmentFlags& f) {
  const tfae::SegmenterConfig cfg = to_config(f);
  const std::optional<tfae::Channel> channel = to_channel(f.channel);
  const tfae::Image img = tfae::load_image(f.input, channel);
  if (!f.debug_dir.empty()) write_debug_maps(f.debug_dir, img, cfg);
  const tfae::SegmentationResult res = tfae::run(img, cfg, risk_dumper(f.debug_dir));
  tfae::save_mask_png(f.output, res.mask);
  if (!f.trace.empty()) write_trace(f.trace, res.trace);
  return 0;
}

struct PhantomFlags {
  std::string output;
  std::string truth;
  std::string family = "straight";
  std::string spec;
  std::size_t width = 128;
  std::size_t height = 128;
  double noise = 0.05;
  std::uint64_t seed = 1;
};

tfae::Point2 read_point(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw tfae::ParameterError("point must be [x, y]");
  return tfae::Point2{j[0].get<double>(), j[1].get<double>()};
}

// JSON description of a custom phantom; width, height, noise and seed come from flags.
tfae::PhantomSpec read_phantom_spec(const std::string& path, const PhantomFlags& f) {
  std::ifstream in(path);
  if (!in) throw tfae::IoError("cannot read '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw tfae::ParameterError("invalid phantom spec: " + std::string(e.what()));
  }
  tfae::PhantomSpec spec;
  spec.width = f.width;
  spec.height = f.height;
  spec.noise_sigma = f.noise;
  spec.rng_seed = f.seed;
  try {
    spec.background = j.value("background", spec.background);
    spec.edge_width = j.value("edge_width", spec.edge_width);
    for (const auto& t : j.value("tubes", nlohmann::json::array())) {
      tfae::Tube tube;
      for (const auto& p : t.at("points")) tube.centerline.push_back(read_point(p));
      tube.radius = t.value("radius", tube.radius);
      tube.peak = t.value("peak", tube.peak);
      tube.faint_branch = t.value("faint_branch", false);
      spec.tubes.push_back(std::move(tube));
    }
    for (const auto& s : j.value("shades", nlohmann::json::array())) {
      spec.shades.push_back(tfae::Shade{read_point(s.at("center")), s.value("radius", 4.0),
                                        s.value("factor", 0.5)});
    }
  } catch (const nlohmann::json::exception& e) {
    throw tfae::ParameterError("invalid phantom spec: " + std::string(e.what()));
  }
  return spec;
}

int cmd_phantom(const PhantomFlags& f) {
  const tfae::PhantomSpec spec = f.spec.empty()
                                     ? tfae::make_phantom_spec(f.family, f.width, f.height, f.noise, f.seed)
                                     : read_phantom_spec(f.spec, f);
  const tfae::Phantom ph = tfae::render_phantom(spec);
  tfae::save_image_png(f.output, ph.image);
  if (!f.truth.empty()) tfae::save_mask_png(f.truth, ph.truth);
  return 0;
}

int cmd_metrics(const std::string& pred_path, const std::string& truth_path) {
  const tfae::BinaryMask pred = tfae::load_mask(pred_path);
  const tfae::BinaryMask truth = tfae::load_mask(truth_path);
  std::cout << tfae::to_json(tfae::score(pred, truth)).dump(2) << '\n';
  return 0;
}

int cmd_compare(const SegmentFlags& f, const std::string& truth_path, const std::string& diff_path) {
  SegmentFlags base = f;
  const std::optional<tfae::Channel> channel = to_channel(f.channel);
  const tfae::Image img = tfae::load_image(f.input, channel);
  std::optional<tfae::BinaryMask> truth;
  if (!truth_path.empty()) {
    truth = tfae::load_mask(truth_path);
    tfae::require_same_shape(truth->grid(), img, "compare --truth");
  }

  ordered_json report;
  report["input"] = f.input;
  std::optional<tfae::BinaryMask> masks[2];
  const char* names[2] = {"tfa", "tfae"};
  for (int k = 0; k < 2; ++k) {
    base.mode = names[k];
    const tfae::SegmenterConfig cfg = to_config(base);
    const auto t0 = std::chrono::steady_clock::now();
    tfae::SegmentationResult res = tfae::run(img, cfg);
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    ordered_json j;
    j["iterations"] = res.trace.iterations;
    j["reason"] = std::string(tfae::to_string(res.trace.reason));
    j["wall_time_ms"] = ms;
    j["vessel_pixels"] = res.mask.count();
    if (truth) j["dice"] = tfae::score(res.mask, *truth).dice;
    report[names[k]] = j;
    masks[k] = std::move(res.mask);
  }

  tfae::BinaryMask diff(img.width(), img.height());
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      const tfae::Pixel p{r, c};
      diff.set(p, (*masks[1])[p] && !(*masks[0])[p]);
    }
  }
  report["tfae_only_pixels"] = diff.count();
  if (!diff_path.empty()) tfae::save_mask_png(diff_path, diff);
  std::cout << report.dump(2) << '\n';
  return 0;
}

// Reads key=value lines; blank lines and lines starting with '#' are skipped.
std::vector<std::string> config_args(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw tfae::IoError("cannot read config '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw tfae::ParameterError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || key == "config") {
      throw tfae::ParameterError(path + ":" + std::to_string(lineno) + ": invalid key");
    }
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

// Inserts the config file's entries right after the subcommand name, so that
// later command-line flags override them under the last-wins policy.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::optional<std::string> config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config || args.empty()) return args;
  std::vector<std::string> extra = config_args(*config);
  args.insert(args.begin() + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tubular-structure segmentation with tight-frame denoising"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string config_path;
  std::string truth_path;
  std::string diff_path;

  SegmentFlags seg;
  auto* segment = app.add_subcommand("segment", "segment an image into a binary vessel mask");
  segment->add_option("--input", seg.input, "input image (PNG, PGM or JPEG)")->required();
  segment->add_option("--output", seg.output, "output mask PNG")->required();
  add_segment_flags(segment, seg, true);
  segment->add_option("--debug-dir", seg.debug_dir, "write gradient/orientation maps and risk curves");
  segment->add_option("--config", config_path, "key=value file; flags win");

  PhantomFlags ph;
  auto* phantom = app.add_subcommand("phantom", "render a synthetic tube phantom");
  phantom->add_option("--output", ph.output, "phantom image PNG")->required();
  phantom->add_option("--truth", ph.truth, "ground-truth mask PNG");
  phantom->add_option("--family", ph.family, "phantom family")->check(CLI::IsMember(tfae::phantom_families()));
  phantom->add_option("--spec", ph.spec, "JSON tube description (overrides --family)");
  phantom->add_option("--width", ph.width, "width in pixels");
  phantom->add_option("--height", ph.height, "height in pixels");
  phantom->add_option("--noise", ph.noise, "Gaussian noise std");
  phantom->add_option("--seed", ph.seed, "random seed");
  phantom->add_option("--config", config_path, "key=value file; flags win");

  std::string pred_path;
  auto* metrics = app.add_subcommand("metrics", "score a predicted mask against a truth mask");
  metrics->add_option("--pred", pred_path, "predicted mask")->required();
  metrics->add_option("--truth", truth_path, "truth mask")->required();
  metrics->add_option("--config", config_path, "key=value file; flags win");

  SegmentFlags cmp;
  auto* compare = app.add_subcommand("compare", "run tfa and tfae with identical settings");
  compare->add_option("--input", cmp.input, "input image")->required();
  compare->add_option("--truth", truth_path, "truth mask for Dice");
  compare->add_option("--diff", diff_path, "PNG of pixels vessel in tfae but not tfa");
  add_segment_flags(compare, cmp, false);
  compare->add_option("--config", config_path, "key=value file; flags win");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const tfae::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const tfae::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes a reversed vector

  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*segment) return cmd_segment(seg);
    if (*phantom) return cmd_phantom(ph);
    if (*metrics) return cmd_metrics(pred_path, truth_path);
    if (*compare) return cmd_compare(cmp, truth_path, diff_path);
  } catch (const tfae::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const tfae::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const tfae::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
