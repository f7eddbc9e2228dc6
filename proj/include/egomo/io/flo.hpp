#pragma once

// Middlebury .flo: "PIEH", u32 width, u32 height, row-major (u, v) float32
// pairs, all little-endian.

#include <cmath>
#include <string>
#include <vector>

#include "egomo/geometry.hpp"
#include "egomo/io/binary.hpp"
#include "egomo/raster.hpp"

namespace egomo::io {

inline constexpr double kFloUnknown = 1e9;

struct FlowFile {
  Raster<FlowVector> flow;
  Mask known;  // 0 where either component exceeds kFloUnknown in magnitude
};

inline FlowFile decode_flo(const std::vector<unsigned char>& bytes, const std::string& what) {
  if (bytes.size() < 4 || bytes[0] != 'P' || bytes[1] != 'I' || bytes[2] != 'E' || bytes[3] != 'H')
    throw Error(Errc::BadMagic, what + ": missing PIEH tag");
  ByteReader in(bytes, what);
  in.u32();
  const std::uint32_t w = in.u32();
  const std::uint32_t h = in.u32();
  if (w > (1u << 16) || h > (1u << 16))
    throw Error(Errc::UnsupportedFormat, what + ": implausible size");
  in.need(static_cast<std::size_t>(w) * h * 8);
  FlowFile out{Raster<FlowVector>(static_cast<int>(w), static_cast<int>(h)),
               Mask(static_cast<int>(w), static_cast<int>(h), 1)};
  for (std::size_t k = 0; k < out.flow.size(); ++k) {
    const double u = in.f32();
    const double v = in.f32();
    out.flow.data()[k] = FlowVector(u, v);
    if (!(std::abs(u) <= kFloUnknown) || !(std::abs(v) <= kFloUnknown)) out.known.data()[k] = 0;
  }
  return out;
}

inline FlowFile load_flo(const std::string& path) { return decode_flo(read_file(path), path); }

inline std::vector<unsigned char> encode_flo(const Raster<FlowVector>& flow) {
  std::vector<unsigned char> out = {'P', 'I', 'E', 'H'};
  out.reserve(12 + flow.size() * 8);
  put_u32(out, static_cast<std::uint32_t>(flow.width()));
  put_u32(out, static_cast<std::uint32_t>(flow.height()));
  for (const FlowVector& u : flow.data()) {
    put_f32(out, static_cast<float>(u.x()));
    put_f32(out, static_cast<float>(u.y()));
  }
  return out;
}

inline void save_flo(const std::string& path, const Raster<FlowVector>& flow) {
  write_file(path, encode_flo(flow));
}

}  // namespace egomo::io
