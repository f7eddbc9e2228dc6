#pragma once

// Float raster: u32 width, u32 height, then row-major float32, little-endian.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "egomo/io/binary.hpp"
#include "egomo/io/image.hpp"
#include "egomo/raster.hpp"

namespace egomo::io {

inline std::vector<unsigned char> encode_f32(const ImageF& r) {
  std::vector<unsigned char> out;
  out.reserve(8 + r.size() * 4);
  put_u32(out, static_cast<std::uint32_t>(r.width()));
  put_u32(out, static_cast<std::uint32_t>(r.height()));
  for (double v : r.data()) put_f32(out, static_cast<float>(v));
  return out;
}

inline ImageF decode_f32(const std::vector<unsigned char>& bytes, const std::string& what) {
  ByteReader in(bytes, what);
  const std::uint32_t w = in.u32();
  const std::uint32_t h = in.u32();
  if (w > (1u << 16) || h > (1u << 16))
    throw Error(Errc::UnsupportedFormat, what + ": implausible size");
  in.need(static_cast<std::size_t>(w) * h * 4);
  ImageF out(static_cast<int>(w), static_cast<int>(h));
  for (double& v : out.data()) v = in.f32();
  return out;
}

inline void save_f32(const std::string& path, const ImageF& r) { write_file(path, encode_f32(r)); }
inline ImageF load_f32(const std::string& path) { return decode_f32(read_file(path), path); }

/// 8-bit visualization of scaled inverse depth: depth 1/c mapped linearly
/// between its 2nd and 98th percentiles, near dark and far light.
inline Raster<unsigned char> structure_preview(const ImageF& c) {
  std::vector<double> depth;
  depth.reserve(c.size());
  for (double v : c.data())
    if (v > 0.0 && std::isfinite(v)) depth.push_back(1.0 / v);
  Raster<unsigned char> out(c.width(), c.height(), 255);
  if (depth.empty()) return out;
  std::sort(depth.begin(), depth.end());
  const double lo = depth[depth.size() * 2 / 100];
  const double hi = depth[std::min(depth.size() - 1, depth.size() * 98 / 100)];
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    const double v = c.data()[k];
    if (!(v > 0.0) || !std::isfinite(v)) continue;
    const double t = std::clamp((1.0 / v - lo) / span, 0.0, 1.0);
    out.data()[k] = static_cast<unsigned char>(std::lround(255.0 * t));
  }
  return out;
}

}  // namespace egomo::io
