#pragma once

// Pose files (12 floats per line, row-major 3x4 world-from-camera), motion
// differencing, trajectory integration and export.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"

namespace egomo::io {

struct Pose {
  Mat3 r = Mat3::Identity();
  Vec3 p = Vec3::Zero();
};

struct PoseGroundTruth {
  std::vector<Pose> poses;
  std::vector<std::string> warnings;  // e.g. rotations that are not orthonormal

  /// ||p_{k+1} - p_k|| for each consecutive pair.
  std::vector<double> speeds() const {
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < poses.size(); ++k)
      out.push_back((poses[k + 1].p - poses[k].p).norm());
    return out;
  }
};

inline PoseGroundTruth parse_poses(std::istream& in, const std::string& what) {
  PoseGroundTruth gt;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::vector<double> v;
    std::string tok;
    while (ls >> tok) {
      try {
        std::size_t used = 0;
        v.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw Error(Errc::ParseError, what + ":" + std::to_string(lineno) + ": bad number " + tok);
      }
    }
    if (v.size() != 12)
      throw Error(Errc::ParseError, what + ":" + std::to_string(lineno) + ": expected 12 values, got " +
                                        std::to_string(v.size()));
    Pose p;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) p.r(r, c) = v[static_cast<std::size_t>(4 * r + c)];
      p.p(r) = v[static_cast<std::size_t>(4 * r + 3)];
    }
    const double dev = (p.r.transpose() * p.r - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (dev > 1e-6)
      gt.warnings.push_back(what + ":" + std::to_string(lineno) + ": rotation not orthonormal (" +
                            std::to_string(dev) + ")");
    gt.poses.push_back(p);
  }
  return gt;
}

inline PoseGroundTruth load_poses(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, "cannot open " + path);
  return parse_poses(in, path);
}

/// Per-frame motion from consecutive poses: w = log(R_k^T R_{k+1}),
/// t = R_k^T (p_{k+1} - p_k) normalized. A zero displacement keeps +z.
struct FrameMotion {
  RigidMotion motion;
  double speed = 0.0;
};

inline std::vector<FrameMotion> motions_from_poses(const PoseGroundTruth& gt) {
  std::vector<FrameMotion> out;
  for (std::size_t k = 0; k + 1 < gt.poses.size(); ++k) {
    const Pose& a = gt.poses[k];
    const Pose& b = gt.poses[k + 1];
    const Vec3 d = a.r.transpose() * (b.p - a.p);
    FrameMotion m;
    m.speed = d.norm();
    m.motion.t_axis = m.speed > 0.0 ? Vec3(d / m.speed) : Vec3::UnitZ();
    m.motion.w = so3_log(a.r.transpose() * b.r);
    out.push_back(m);
  }
  return out;
}

struct Trajectory {
  std::vector<Vec3> positions;  // frame 0 at the origin
  std::vector<Mat3> orientations;
};

/// R_{k+1} = R_k exp([w_k]x), p_{k+1} = p_k + speed_k R_k t_k.
inline Trajectory integrate_trajectory(const std::vector<RigidMotion>& motions,
                                       const std::vector<double>& speeds) {
  if (motions.size() != speeds.size())
    throw Error(Errc::LengthMismatch, "motions and speeds differ in length");
  Trajectory tr;
  Mat3 r = Mat3::Identity();
  Vec3 p = Vec3::Zero();
  tr.positions.push_back(p);
  tr.orientations.push_back(r);
  for (std::size_t k = 0; k < motions.size(); ++k) {
    p += speeds[k] * (r * motions[k].t_axis);
    r = r * so3_exp(motions[k].w);
    tr.positions.push_back(p);
    tr.orientations.push_back(r);
  }
  return tr;
}

/// Collapses consecutive sub-frame motions into one: rotations composed,
/// displacements summed in the first sub-frame's camera frame.
inline FrameMotion aggregate_subframes(const std::vector<RigidMotion>& motions,
                                       const std::vector<double>& speeds) {
  if (motions.size() != speeds.size())
    throw Error(Errc::LengthMismatch, "motions and speeds differ in length");
  Mat3 r = Mat3::Identity();
  Vec3 d = Vec3::Zero();
  for (std::size_t k = 0; k < motions.size(); ++k) {
    d += speeds[k] * (r * motions[k].t_axis);
    r = r * so3_exp(motions[k].w);
  }
  FrameMotion out;
  out.speed = d.norm();
  out.motion.t_axis = out.speed > 0.0 ? Vec3(d / out.speed) : Vec3::UnitZ();
  out.motion.w = so3_log(r);
  return out;
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  os << "# schema_version: 1\n";
  os << "frame,x,y,z\n";
  os.precision(17);
  for (std::size_t k = 0; k < tr.positions.size(); ++k) {
    const Vec3& p = tr.positions[k];
    os << k << ',' << p.x() << ',' << p.y() << ',' << p.z() << '\n';
  }
}

/// X-Z projection of one or more paths as a standalone SVG.
inline void write_trajectory_svg(std::ostream& os, const std::vector<const Trajectory*>& paths,
                                 const std::vector<std::string>& labels) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  double xmin = 0.0, xmax = 0.0, zmin = 0.0, zmax = 0.0;
  for (const Trajectory* t : paths)
    for (const Vec3& p : t->positions) {
      xmin = std::min(xmin, p.x());
      xmax = std::max(xmax, p.x());
      zmin = std::min(zmin, p.z());
      zmax = std::max(zmax, p.z());
    }
  const double span = std::max({xmax - xmin, zmax - zmin, 1e-9});
  const double size = 480.0;
  const double pad = 20.0;
  auto px = [&](double x) { return pad + (x - xmin) / span * size; };
  auto pz = [&](double z) { return pad + size - (z - zmin) / span * size; };
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\""
     << size + 2 * pad << "\">\n";
  for (std::size_t i = 0; i < paths.size(); ++i) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[i % 4] << "\" stroke-width=\"1.5\" points=\"";
    for (const Vec3& p : paths[i]->positions) os << px(p.x()) << ',' << pz(p.z()) << ' ';
    os << "\"/>\n";
    if (i < labels.size())
      os << "<text x=\"" << pad << "\" y=\"" << pad + 14.0 * static_cast<double>(i + 1)
         << "\" fill=\"" << colors[i % 4] << "\" font-size=\"12\">" << labels[i] << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace egomo::io
