#pragma once

// Frame sequences, intrinsics sidecars and frame interpolation.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"
#include "egomo/io/image.hpp"
#include "egomo/raster.hpp"

namespace egomo::io {

struct FrameSequence {
  std::vector<ImageF> frames;
  std::vector<double> indices;   // original frame index, fractional for inserted frames
  std::vector<bool> synthetic;   // true for interpolated frames
  std::optional<Camera> camera;

  std::size_t size() const { return frames.size(); }
};

inline nlohmann::json intrinsics_json(const Camera& cam) {
  return {{"focal_px", cam.focal()}, {"cx", cam.cx()},         {"cy", cam.cy()},
          {"width", cam.width()},    {"height", cam.height()}, {"schema_version", 1}};
}

inline Camera parse_intrinsics(const nlohmann::json& j, const std::string& what) {
  try {
    return Camera(j.at("focal_px").get<double>(), j.at("cx").get<double>(),
                  j.at("cy").get<double>(), j.at("width").get<int>(), j.at("height").get<int>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, what + ": " + e.what());
  }
}

inline nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, path + ": " + e.what());
  }
}

inline void save_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::FileNotFound, "cannot write " + path);
  out << j.dump(2) << '\n';
}

inline Camera load_intrinsics(const std::string& path) {
  return parse_intrinsics(load_json(path), path);
}

/// Frames from an explicit file list, or from every .png/.pgm in a directory
/// (sorted by name). Reads `intrinsics.json` next to the frames if present.
inline FrameSequence load_sequence(const std::vector<std::string>& paths) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  std::optional<fs::path> dir;
  if (paths.size() == 1 && fs::is_directory(paths[0])) {
    dir = fs::path(paths[0]);
    for (const auto& entry : fs::directory_iterator(*dir)) {
      const std::string ext = entry.path().extension().string();
      if (entry.is_regular_file() && (ext == ".png" || ext == ".pgm" || ext == ".PNG"))
        files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
  } else {
    files = paths;
    if (!files.empty()) dir = fs::path(files[0]).parent_path();
  }
  if (files.empty()) throw Error(Errc::FileNotFound, "no frames found");
  FrameSequence seq;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw Error(Errc::FileNotFound, "missing frame " + f);
    ImageF img = load_image(f);
    if (!seq.frames.empty() && !img.same_shape(seq.frames.front()))
      throw Error(Errc::InconsistentDimensions, f + ": frame size differs from the first frame");
    seq.indices.push_back(static_cast<double>(seq.frames.size()));
    seq.synthetic.push_back(false);
    seq.frames.push_back(std::move(img));
  }
  if (dir) {
    const fs::path sidecar = *dir / "intrinsics.json";
    if (fs::exists(sidecar)) seq.camera = load_intrinsics(sidecar.string());
  }
  return seq;
}

/// Inserts ceil(hint / target) - 1 linearly blended frames in every gap.
inline FrameSequence interpolate_frames(const FrameSequence& seq, double target_max_disp,
                                        double disp_hint) {
  if (!(target_max_disp >= 1.0))
    throw Error(Errc::InvalidArgument, "target displacement must be >= 1 px");
  if (target_max_disp >= disp_hint || seq.size() < 2) return seq;
  const int inserted = static_cast<int>(std::ceil(disp_hint / target_max_disp)) - 1;
  FrameSequence out;
  out.camera = seq.camera;
  for (std::size_t k = 0; k + 1 < seq.size(); ++k) {
    out.frames.push_back(seq.frames[k]);
    out.indices.push_back(seq.indices[k]);
    out.synthetic.push_back(seq.synthetic[k]);
    const ImageF& a = seq.frames[k];
    const ImageF& b = seq.frames[k + 1];
    for (int j = 1; j <= inserted; ++j) {
      const double alpha = static_cast<double>(j) / (inserted + 1);
      ImageF mid(a.width(), a.height());
      for (std::size_t i = 0; i < a.size(); ++i)
        mid.data()[i] = (1.0 - alpha) * a.data()[i] + alpha * b.data()[i];
      out.frames.push_back(std::move(mid));
      out.indices.push_back(seq.indices[k] + alpha * (seq.indices[k + 1] - seq.indices[k]));
      out.synthetic.push_back(true);
    }
  }
  out.frames.push_back(seq.frames.back());
  out.indices.push_back(seq.indices.back());
  out.synthetic.push_back(seq.synthetic.back());
  return out;
}

}  // namespace egomo::io
