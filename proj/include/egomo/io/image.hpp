#pragma once

// Grayscale PGM (P2/P5, 8 or 16 bit) and PNG (libpng) I/O. Loaded
// intensities are normalized to [0, 1].

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "egomo/io/binary.hpp"
#include "egomo/raster.hpp"

namespace egomo::io {

namespace detail {

// PGM header tokens, skipping whitespace and '#' comments.
class PgmTokens {
 public:
  explicit PgmTokens(const std::vector<unsigned char>& b) : b_(b) {}

  std::string next() {
    for (;;) {
      while (pos_ < b_.size() && std::isspace(b_[pos_])) ++pos_;
      if (pos_ < b_.size() && b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
        continue;
      }
      break;
    }
    std::string tok;
    while (pos_ < b_.size() && !std::isspace(b_[pos_])) tok.push_back(static_cast<char>(b_[pos_++]));
    if (tok.empty()) throw Error(Errc::TruncatedFile, "pgm: header ends early");
    return tok;
  }

  long number() {
    const std::string t = next();
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(t, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != t.size() || v < 0) throw Error(Errc::ParseError, "pgm: bad header field " + t);
    return v;
  }

  std::size_t position() const { return pos_; }
  void skip_one() { ++pos_; }

 private:
  const std::vector<unsigned char>& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ImageF decode_pgm(const std::vector<unsigned char>& bytes, const std::string& what) {
  detail::PgmTokens tok(bytes);
  const std::string magic = tok.next();
  if (magic != "P5" && magic != "P2") throw Error(Errc::UnsupportedFormat, what + ": not a PGM");
  const long w = tok.number();
  const long h = tok.number();
  const long maxval = tok.number();
  if (w <= 0 || h <= 0 || w > 65536 || h > 65536 || maxval <= 0 || maxval > 65535)
    throw Error(Errc::UnsupportedFormat, what + ": unsupported PGM header");
  ImageF out(static_cast<int>(w), static_cast<int>(h));
  const double scale = 1.0 / static_cast<double>(maxval);
  if (magic == "P2") {
    for (double& v : out.data()) v = static_cast<double>(tok.number()) * scale;
    return out;
  }
  tok.skip_one();  // single whitespace after maxval
  const std::size_t bpp = maxval > 255 ? 2 : 1;
  std::size_t pos = tok.position();
  if (bytes.size() < pos || bytes.size() - pos < out.size() * bpp)
    throw Error(Errc::TruncatedFile, what + ": pixel data ends early");
  for (double& v : out.data()) {
    unsigned value = bytes[pos++];
    if (bpp == 2) value = (value << 8) | bytes[pos++];
    v = static_cast<double>(value) * scale;
  }
  return out;
}

inline std::vector<unsigned char> encode_pgm(const Raster<unsigned char>& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), img.data().begin(), img.data().end());
  return out;
}

inline ImageF decode_png(const std::vector<unsigned char>& bytes, const std::string& what) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0)
    throw Error(Errc::UnsupportedFormat, what + ": not a PNG");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(Errc::UnsupportedFormat, what + ": " + image.message);
  const bool sixteen = (image.format & PNG_FORMAT_FLAG_LINEAR) != 0;
  // Keep the stored sample values; color images are reduced to gray by libpng.
  image.format = sixteen ? PNG_FORMAT_LINEAR_Y : PNG_FORMAT_GRAY;
  const std::size_t n = static_cast<std::size_t>(image.width) * image.height;
  ImageF out(static_cast<int>(image.width), static_cast<int>(image.height));
  if (sixteen) {
    std::vector<png_uint_16> buf(n);
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
      throw Error(Errc::UnsupportedFormat, what + ": " + image.message);
    for (std::size_t k = 0; k < n; ++k) out.data()[k] = buf[k] / 65535.0;
  } else {
    std::vector<png_byte> buf(n);
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr))
      throw Error(Errc::UnsupportedFormat, what + ": " + image.message);
    for (std::size_t k = 0; k < n; ++k) out.data()[k] = buf[k] / 255.0;
  }
  return out;
}

inline std::vector<unsigned char> encode_png(const Raster<unsigned char>& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, img.data().data(), 0, nullptr))
    throw Error(Errc::UnsupportedFormat, std::string("png encode: ") + image.message);
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), 0, nullptr))
    throw Error(Errc::UnsupportedFormat, std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

/// 16-bit grayscale PNG (tests and fixtures).
inline std::vector<unsigned char> encode_png16(const Raster<std::uint16_t>& img) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_LINEAR_Y;
  png_alloc_size_t size = 0;
  if (!png_image_write_get_memory_size(image, size, 0, img.data().data(), 0, nullptr))
    throw Error(Errc::UnsupportedFormat, std::string("png encode: ") + image.message);
  std::vector<unsigned char> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.data().data(), 0, nullptr))
    throw Error(Errc::UnsupportedFormat, std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

inline ImageF load_image(const std::string& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '5' || bytes[1] == '2'))
    return decode_pgm(bytes, path);
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) return decode_png(bytes, path);
  throw Error(Errc::UnsupportedFormat, path + ": neither PGM nor PNG");
}

inline void save_png(const std::string& path, const Raster<unsigned char>& img) {
  write_file(path, encode_png(img));
}

inline void save_pgm(const std::string& path, const Raster<unsigned char>& img) {
  write_file(path, encode_pgm(img));
}

inline Raster<unsigned char> to_u8(const ImageF& img) {
  Raster<unsigned char> out(img.width(), img.height());
  for (std::size_t k = 0; k < img.size(); ++k) {
    const double v = std::clamp(img.data()[k], 0.0, 1.0);
    out.data()[k] = static_cast<unsigned char>(std::lround(255.0 * v));
  }
  return out;
}

}  // namespace egomo::io
