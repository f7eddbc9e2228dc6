#pragma once

// Spatio-temporal gradients and the sparse normal-flow field.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"
#include "egomo/parallel.hpp"
#include "egomo/raster.hpp"

namespace egomo {

struct GradientFrame {
  ImageF ix;
  ImageF iy;
  ImageF it;
  Mask valid;  // 0 on the border where the 5-tap support leaves the image

  int width() const { return ix.width(); }
  int height() const { return ix.height(); }
};

struct NormalFlowEntry {
  int col = 0;
  int row = 0;
  ImagePoint pos;  // centered coordinates
  Vec2 n = Vec2::UnitX();
  double speed = 0.0;  // u_n, pixels/frame along n
  double gradient_magnitude = 0.0;
};

struct NormalFlowField {
  int width = 0;
  int height = 0;
  std::vector<NormalFlowEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

namespace kernels {

// Matched 5-tap prefilter / first-derivative pair (Farid & Simoncelli),
// normalized to unit DC gain and unit first moment. Correlation taps for
// offsets -2..2.
inline constexpr std::array<double, 5> kPrefilterRaw = {0.037659, 0.249153, 0.426375, 0.249153,
                                                        0.037659};
inline constexpr std::array<double, 5> kDerivativeRaw = {-0.109604, -0.276691, 0.0, 0.276691,
                                                         0.109604};

inline const std::array<double, 5>& prefilter() {
  static const std::array<double, 5> p = [] {
    double sum = 0.0;
    for (double v : kPrefilterRaw) sum += v;
    std::array<double, 5> out{};
    for (int i = 0; i < 5; ++i) out[i] = kPrefilterRaw[i] / sum;
    return out;
  }();
  return p;
}

inline const std::array<double, 5>& derivative() {
  static const std::array<double, 5> d = [] {
    double moment = 0.0;
    for (int i = 0; i < 5; ++i) moment += kDerivativeRaw[i] * (i - 2);
    std::array<double, 5> out{};
    for (int i = 0; i < 5; ++i) out[i] = kDerivativeRaw[i] / moment;
    return out;
  }();
  return d;
}

}  // namespace kernels

namespace detail {

// Separable correlation: kx along columns, ky along rows. Only the interior
// (2 px from every border) is written; the rest stays 0.
inline ImageF correlate_separable(const ImageF& src, const std::array<double, 5>& kx,
                                  const std::array<double, 5>& ky, int threads) {
  const int w = src.width();
  const int h = src.height();
  ImageF tmp(w, h, 0.0);
  ImageF out(w, h, 0.0);
  if (w < 5 || h < 5) return out;
  parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t r) {
    const int row = static_cast<int>(r);
    for (int col = 2; col < w - 2; ++col) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += kx[k] * src(col + k - 2, row);
      tmp(col, row) = acc;
    }
  });
  parallel_for(static_cast<std::size_t>(h - 4), threads, [&](std::size_t r) {
    const int row = static_cast<int>(r) + 2;
    for (int col = 2; col < w - 2; ++col) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += ky[k] * tmp(col, row + k - 2);
      out(col, row) = acc;
    }
  });
  return out;
}

}  // namespace detail

/// Gradients of a frame pair with intensities in [0, 1]. Spatial derivatives
/// come from the mean of the two frames; the temporal derivative is the frame
/// difference passed through the same spatial prefilter.
inline GradientFrame compute_gradients(const ImageF& prev, const ImageF& next, int threads = 1) {
  if (!prev.same_shape(next))
    throw Error(Errc::DimensionMismatch, "frames differ in size");
  const int w = prev.width();
  const int h = prev.height();
  ImageF mean(w, h);
  ImageF diff(w, h);
  for (std::size_t i = 0; i < prev.size(); ++i) {
    mean.data()[i] = 0.5 * (prev.data()[i] + next.data()[i]);
    diff.data()[i] = next.data()[i] - prev.data()[i];
  }
  const auto& p = kernels::prefilter();
  const auto& d = kernels::derivative();
  GradientFrame g;
  g.ix = detail::correlate_separable(mean, d, p, threads);
  g.iy = detail::correlate_separable(mean, p, d, threads);
  g.it = detail::correlate_separable(diff, p, p, threads);
  g.valid = Mask(w, h, 0);
  for (int row = 2; row < h - 2; ++row)
    for (int col = 2; col < w - 2; ++col) g.valid(col, row) = 1;
  return g;
}

/// Keeps valid pixels with |grad I| >= mag_threshold; n = grad/|grad|,
/// u_n = -I_t / |grad I|.
inline NormalFlowField extract_normal_flow(const GradientFrame& g, double mag_threshold,
                                           const Camera& cam) {
  if (!(mag_threshold > 0.0))
    throw Error(Errc::InvalidArgument, "magnitude threshold must be positive");
  if (g.width() != cam.width() || g.height() != cam.height())
    throw Error(Errc::DimensionMismatch, "gradient frame does not match camera");
  NormalFlowField nf;
  nf.width = g.width();
  nf.height = g.height();
  for (int row = 0; row < g.height(); ++row) {
    for (int col = 0; col < g.width(); ++col) {
      if (!g.valid(col, row)) continue;
      const double gx = g.ix(col, row);
      const double gy = g.iy(col, row);
      const double mag = std::hypot(gx, gy);
      if (!(mag >= mag_threshold)) continue;
      NormalFlowEntry e;
      e.col = col;
      e.row = row;
      e.pos = cam.centered(col, row);
      e.n = Vec2(gx / mag, gy / mag);
      e.speed = -g.it(col, row) / mag;
      e.gradient_magnitude = mag;
      nf.entries.push_back(e);
    }
  }
  return nf;
}

/// Magnitude threshold that keeps roughly `target_density` of all pixels.
inline double threshold_for_density(const GradientFrame& g, double target_density) {
  if (!(target_density > 0.0 && target_density <= 1.0))
    throw Error(Errc::InvalidArgument, "target density must lie in (0, 1]");
  std::vector<double> mags;
  for (int row = 0; row < g.height(); ++row)
    for (int col = 0; col < g.width(); ++col)
      if (g.valid(col, row)) mags.push_back(std::hypot(g.ix(col, row), g.iy(col, row)));
  if (mags.empty()) return 1.0;
  const double total = static_cast<double>(g.width()) * g.height();
  const auto keep = static_cast<std::size_t>(
      std::clamp(std::round(target_density * total), 1.0, static_cast<double>(mags.size())));
  std::nth_element(mags.begin(), mags.begin() + (keep - 1), mags.end(), std::greater<>());
  const double t = mags[keep - 1];
  return t > 0.0 ? t : std::numeric_limits<double>::min();
}

/// Projects a dense flow raster onto per-pixel unit directions (u_n = n . u).
/// Pixels whose direction is zero are skipped.
inline NormalFlowField project_flow(const Raster<FlowVector>& flow,
                                    const Raster<Vec2>& directions, const Camera& cam) {
  if (!flow.same_shape(directions))
    throw Error(Errc::DimensionMismatch, "flow and direction rasters differ in size");
  if (flow.width() != cam.width() || flow.height() != cam.height())
    throw Error(Errc::DimensionMismatch, "flow raster does not match camera");
  NormalFlowField nf;
  nf.width = flow.width();
  nf.height = flow.height();
  for (int row = 0; row < flow.height(); ++row) {
    for (int col = 0; col < flow.width(); ++col) {
      const Vec2& n = directions(col, row);
      if (n.squaredNorm() == 0.0) continue;
      NormalFlowEntry e;
      e.col = col;
      e.row = row;
      e.pos = cam.centered(col, row);
      e.n = n;
      e.speed = n.dot(flow(col, row));
      e.gradient_magnitude = 1.0;
      nf.entries.push_back(e);
    }
  }
  return nf;
}

}  // namespace egomo
