#pragma once

// Sample directory layout:
//   motion.json      {schema_version, t_axis, w, speed}
//   intrinsics.json  {focal_px, cx, cy, width, height}
//   depth.f32        per-pixel depth raster
//   normal_flow.csv  x,y,nx,ny,un (pixel column/row, unit direction, speed)
//   flow.csv         x,y,u,v (optional full flow at the same pixels)

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "egomo/geometry.hpp"
#include "egomo/measurements.hpp"
#include "egomo/io/sequence.hpp"
#include "egomo/io/structure_io.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/synthetic.hpp"

namespace egomo::io {

inline nlohmann::json motion_json(const RigidMotion& m, double speed) {
  return {{"schema_version", 1},
          {"t_axis", {m.t_axis.x(), m.t_axis.y(), m.t_axis.z()}},
          {"w", {m.w.x(), m.w.y(), m.w.z()}},
          {"speed", speed}};
}

inline Vec3 json_vec3(const nlohmann::json& j, const char* key, const std::string& what) {
  try {
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 3) throw Error(Errc::ParseError, what + ": " + key + " needs 3 values");
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, what + ": " + e.what());
  }
}

struct StoredMotion {
  RigidMotion motion;
  double speed = 1.0;
};

inline StoredMotion load_motion(const std::string& path) {
  const auto j = load_json(path);
  StoredMotion m;
  m.motion = RigidMotion::make(json_vec3(j, "t_axis", path), json_vec3(j, "w", path));
  m.speed = j.value("speed", 1.0);
  return m;
}

inline void write_normal_flow_csv(std::ostream& os, const NormalFlowField& nf) {
  os << "# schema_version: 1\n";
  os << "# width: " << nf.width << "\n# height: " << nf.height << "\n";
  os << "x,y,nx,ny,un\n";
  os.precision(17);
  for (const auto& e : nf.entries)
    os << e.col << ',' << e.row << ',' << e.n.x() << ',' << e.n.y() << ',' << e.speed << '\n';
}

/// Reads `x,y,nx,ny,un` rows; the raster size comes from the camera.
inline NormalFlowField read_normal_flow_csv(std::istream& in, const Camera& cam,
                                            const std::string& what) {
  NormalFlowField nf;
  nf.width = cam.width();
  nf.height = cam.height();
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      if (line.rfind("x,", 0) == 0) continue;
    }
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, what + ":" + std::to_string(lineno) + ": bad number");
      }
    }
    if (v.size() != 5)
      throw Error(Errc::ParseError, what + ":" + std::to_string(lineno) + ": expected 5 columns");
    const int col = static_cast<int>(std::lround(v[0]));
    const int row = static_cast<int>(std::lround(v[1]));
    if (col < 0 || row < 0 || col >= cam.width() || row >= cam.height())
      throw Error(Errc::InconsistentDimensions,
                  what + ":" + std::to_string(lineno) + ": pixel outside the image");
    Vec2 n(v[2], v[3]);
    const double norm = n.norm();
    if (!(norm > 0.0))
      throw Error(Errc::ParseError, what + ":" + std::to_string(lineno) + ": zero direction");
    n /= norm;
    nf.entries.push_back({col, row, cam.centered(v[0], v[1]), n, v[4], 1.0});
  }
  return nf;
}

inline NormalFlowField load_normal_flow_csv(const std::string& path, const Camera& cam) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open " + path);
  return read_normal_flow_csv(in, cam, path);
}

/// Reads `x,y,u,v` rows of full flow.
inline std::vector<FlowSample> load_flow_csv(const std::string& path, const Camera& cam) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open " + path);
  std::vector<FlowSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line.rfind("x,", 0) == 0) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<double> v;
    while (std::getline(ls, cell, ',')) {
      try {
        v.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, path + ":" + std::to_string(lineno) + ": bad number");
      }
    }
    if (v.size() != 4)
      throw Error(Errc::ParseError, path + ":" + std::to_string(lineno) + ": expected 4 columns");
    const int col = static_cast<int>(std::lround(v[0]));
    const int row = static_cast<int>(std::lround(v[1]));
    if (col < 0 || row < 0 || col >= cam.width() || row >= cam.height())
      throw Error(Errc::InconsistentDimensions,
                  path + ":" + std::to_string(lineno) + ": pixel outside the image");
    out.push_back({col, row, cam.centered(v[0], v[1]), FlowVector(v[2], v[3])});
  }
  return out;
}

/// Raster size from the `# width:` / `# height:` comments of a normal flow
/// file, if present.
inline std::optional<std::pair<int, int>> normal_flow_csv_size(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open " + path);
  int w = 0, h = 0;
  std::string line;
  while (std::getline(in, line) && !line.empty() && line[0] == '#') {
    std::istringstream ls(line.substr(1));
    std::string key;
    int v = 0;
    if (ls >> key >> v) {
      if (key == "width:") w = v;
      if (key == "height:") h = v;
    }
  }
  if (w > 0 && h > 0) return std::make_pair(w, h);
  return std::nullopt;
}

inline void save_sample(const std::string& dir, const SyntheticSample& s) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  save_json((d / "motion.json").string(), motion_json(s.motion, s.speed));
  save_json((d / "intrinsics.json").string(), intrinsics_json(s.camera));
  save_f32((d / "depth.f32").string(), s.depth);
  {
    std::ofstream os(d / "normal_flow.csv");
    if (!os) throw Error(Errc::FileNotFound, "cannot write normal_flow.csv in " + dir);
    write_normal_flow_csv(os, s.field);
  }
  std::ofstream os(d / "flow.csv");
  if (!os) throw Error(Errc::FileNotFound, "cannot write flow.csv in " + dir);
  os << "# schema_version: 1\nx,y,u,v\n";
  os.precision(17);
  for (std::size_t i = 0; i < s.flow.size(); ++i)
    os << s.field.entries[i].col << ',' << s.field.entries[i].row << ',' << s.flow[i].x() << ','
       << s.flow[i].y() << '\n';
}

}  // namespace egomo::io
