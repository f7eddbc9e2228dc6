#pragma once

// Seeded random scenes: random smooth depth, random rigid motion, and normal
// flow projected from the exact motion field onto random directions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"
#include "egomo/measurements.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/random.hpp"
#include "egomo/raster.hpp"

namespace egomo {

struct SceneSpec {
  int width = 150;
  int height = 150;
  double fov_deg = 30.0;
  double max_rotation_deg = 20.0;  // per frame
  double max_translation = 3.0;    // length units per frame
  double max_depth = 10.0;
  double min_depth = 1.0;
  double density = 0.10;
  double depth_blur_sigma = 5.0;  // pixels

  void validate() const {
    if (width <= 0 || height <= 0) throw Error(Errc::InvalidArgument, "scene size must be positive");
    if (!(min_depth > 0.0 && min_depth < max_depth))
      throw Error(Errc::InvalidArgument, "need 0 < min_depth < max_depth");
    if (!(density > 0.0 && density <= 1.0))
      throw Error(Errc::InvalidArgument, "density must lie in (0, 1]");
    if (!(fov_deg > 0.0 && fov_deg < 180.0))
      throw Error(Errc::InvalidArgument, "fov must lie in (0, 180)");
    if (max_rotation_deg < 0.0 || !(max_translation > 0.0))
      throw Error(Errc::InvalidArgument, "motion caps must be non-negative / positive");
  }

  Camera camera() const { return Camera::from_fov(width, height, fov_deg); }
};

struct SyntheticSample {
  std::uint64_t seed = 0;
  Camera camera = Camera(1.0, 0.0, 0.0, 1, 1);
  RigidMotion motion;
  double speed = 1.0;     // |t|
  ImageF depth;           // per pixel Z
  NormalFlowField field;  // u_n along random directions
  std::vector<FlowVector> flow;  // full flow at each entry (baselines)
  double noise_sigma = 0.0;
};

namespace detail {

inline std::vector<double> gaussian_taps(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  for (int k = -radius; k <= radius; ++k)
    taps[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * k * k / (sigma * sigma));
  const double sum = std::accumulate(taps.begin(), taps.end(), 0.0);
  for (double& t : taps) t /= sum;
  return taps;
}

/// Separable Gaussian blur with clamped borders.
inline ImageF gaussian_blur(const ImageF& src, double sigma) {
  if (!(sigma > 0.0)) return src;
  const auto taps = gaussian_taps(sigma);
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = src.width();
  const int h = src.height();
  ImageF tmp(w, h);
  ImageF out(w, h);
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += taps[static_cast<std::size_t>(k + radius)] * src(std::clamp(col + k, 0, w - 1), row);
      tmp(col, row) = acc;
    }
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += taps[static_cast<std::size_t>(k + radius)] * tmp(col, std::clamp(row + k, 0, h - 1));
      out(col, row) = acc;
    }
  return out;
}

// Independent streams per quantity so changing one does not shift the others.
enum Stream : std::uint64_t { kDepth = 1, kMotion = 2, kPixels = 3, kDirections = 4, kNoise = 5 };

}  // namespace detail

/// Scene with a prescribed motion; depth, pixels and directions come from `seed`.
inline SyntheticSample render_scene(std::uint64_t seed, const SceneSpec& spec,
                                    const RigidMotion& motion, double speed) {
  spec.validate();
  if (!(speed > 0.0)) throw Error(Errc::InvalidArgument, "speed must be positive");
  if (!(motion.t_axis.norm() > 0.0))
    throw Error(Errc::InvalidArgument, "translation axis must be non-zero");
  SyntheticSample s;
  s.seed = seed;
  s.motion = RigidMotion{motion.t_axis.normalized(), motion.w};
  s.speed = speed;
  s.camera = spec.camera();
  const Camera& cam = s.camera;
  const int w = spec.width;
  const int h = spec.height;

  // Depth: blurred white noise rescaled onto [min_depth, max_depth].
  CounterRng depth_rng(seed, detail::kDepth);
  ImageF noise(w, h);
  for (double& v : noise.data()) v = depth_rng.uniform();
  s.depth = detail::gaussian_blur(noise, spec.depth_blur_sigma);
  const auto [lo_it, hi_it] = std::minmax_element(s.depth.data().begin(), s.depth.data().end());
  const double lo = *lo_it;
  const double span = *hi_it - lo;
  for (double& v : s.depth.data()) {
    const double unit = span > 0.0 ? (v - lo) / span : 0.5;
    v = std::clamp(spec.min_depth + unit * (spec.max_depth - spec.min_depth), spec.min_depth,
                   spec.max_depth);
  }

  // Measurement pixels: partial Fisher-Yates, then sorted in raster order.
  const std::size_t total = cam.pixel_count();
  const auto count = static_cast<std::size_t>(
      std::clamp(std::round(spec.density * static_cast<double>(total)), 1.0,
                 static_cast<double>(total)));
  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0u);
  CounterRng pixel_rng(seed, detail::kPixels);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + pixel_rng.below(total - i);
    std::swap(order[i], order[j]);
  }
  order.resize(count);
  std::sort(order.begin(), order.end());

  CounterRng dir_rng(seed, detail::kDirections);
  s.field.width = w;
  s.field.height = h;
  s.field.entries.reserve(count);
  s.flow.reserve(count);
  for (std::uint32_t idx : order) {
    const int col = static_cast<int>(idx % static_cast<std::uint32_t>(w));
    const int row = static_cast<int>(idx / static_cast<std::uint32_t>(w));
    const ImagePoint p = cam.centered(col, row);
    const FlowVector u = motion_field(p, s.depth(col, row), s.motion, s.speed, cam);
    const double theta = dir_rng.uniform(0.0, 2.0 * kPi);
    const Vec2 n(std::cos(theta), std::sin(theta));
    s.field.entries.push_back({col, row, p, n, n.dot(u), 1.0});
    s.flow.push_back(u);
  }
  return s;
}

inline SyntheticSample generate_scene(std::uint64_t seed, const SceneSpec& spec) {
  spec.validate();
  // Motion: uniform directions, magnitudes uniform within the caps.
  CounterRng motion_rng(seed, detail::kMotion);
  const Vec3 t_axis = motion_rng.unit_vector();
  double speed = motion_rng.uniform(0.1 * spec.max_translation, spec.max_translation);
  if (!(speed > 0.1 * spec.max_translation)) speed = spec.max_translation;
  const Vec3 w_axis = motion_rng.unit_vector();
  const double w_mag = deg2rad(spec.max_rotation_deg) * motion_rng.uniform();
  return render_scene(seed, spec, RigidMotion{t_axis, w_axis * w_mag}, speed);
}

/// Gaussian noise on u_n (and on both full-flow components), seeded
/// independently of the scene.
inline SyntheticSample add_noise(SyntheticSample sample, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw Error(Errc::InvalidArgument, "noise sigma must be non-negative");
  if (sigma == 0.0) return sample;
  CounterRng rng(seed, detail::kNoise);
  for (auto& e : sample.field.entries) e.speed += sigma * rng.normal();
  for (auto& u : sample.flow) {
    u.x() += sigma * rng.normal();
    u.y() += sigma * rng.normal();
  }
  sample.noise_sigma = sigma;
  return sample;
}

inline double mean_abs_speed(const NormalFlowField& nf) {
  if (nf.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : nf.entries) sum += std::abs(e.speed);
  return sum / static_cast<double>(nf.size());
}

/// Flow samples (position + full flow) of a synthetic sample.
inline std::vector<FlowSample> sample_flow(const SyntheticSample& s) {
  std::vector<FlowSample> out;
  out.reserve(s.flow.size());
  for (std::size_t i = 0; i < s.flow.size(); ++i) {
    const auto& e = s.field.entries[i];
    out.push_back({e.col, e.row, e.pos, s.flow[i]});
  }
  return out;
}

}  // namespace egomo
