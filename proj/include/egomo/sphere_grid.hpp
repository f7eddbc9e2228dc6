#pragma once

// Candidate translation axes: a geodesic lattice on an icosahedron with one
// vertex at +z. Level L subdivides every face edge into 20 * 2^L segments,
// giving a nearest-neighbour spacing of at most 4 deg / 2^L.

#include <array>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"

namespace egomo {

inline constexpr int kMaxGridLevel = 6;
inline constexpr int kBaseFrequency = 20;

/// Nominal angular spacing (radians) of a grid level.
inline double grid_spacing(int level) { return deg2rad(4.0) / std::ldexp(1.0, level); }

namespace detail {

struct Icosahedron {
  std::array<Vec3, 12> vertices;
  std::array<std::array<int, 3>, 20> faces;
  // Owning face per vertex and per edge, so shared lattice points are emitted once.
  std::array<int, 12> vertex_owner;
  std::map<std::pair<int, int>, int> edge_owner;
};

inline const Icosahedron& icosahedron() {
  static const Icosahedron ico = [] {
    Icosahedron s;
    const double z = 1.0 / std::sqrt(5.0);
    const double r = 2.0 / std::sqrt(5.0);
    s.vertices[0] = Vec3(0.0, 0.0, 1.0);
    s.vertices[11] = Vec3(0.0, 0.0, -1.0);
    for (int k = 0; k < 5; ++k) {
      const double up = 2.0 * kPi * k / 5.0;
      const double lo = up + kPi / 5.0;
      s.vertices[1 + k] = Vec3(r * std::cos(up), r * std::sin(up), z);
      s.vertices[6 + k] = Vec3(r * std::cos(lo), r * std::sin(lo), -z);
    }
    int f = 0;
    for (int k = 0; k < 5; ++k) {
      const int u0 = 1 + k, u1 = 1 + (k + 1) % 5;
      const int l0 = 6 + k, l1 = 6 + (k + 1) % 5;
      s.faces[f++] = {0, u0, u1};
      s.faces[f++] = {u0, l0, u1};
      s.faces[f++] = {l0, l1, u1};
      s.faces[f++] = {11, l1, l0};
    }
    s.vertex_owner.fill(-1);
    for (int fi = 0; fi < 20; ++fi) {
      for (int e = 0; e < 3; ++e) {
        const int a = s.faces[fi][e];
        const int b = s.faces[fi][(e + 1) % 3];
        if (s.vertex_owner[a] < 0) s.vertex_owner[a] = fi;
        s.edge_owner.try_emplace(std::minmax(a, b), fi);
      }
    }
    return s;
  }();
  return ico;
}

/// Visits every lattice point of the given frequency exactly once, in a fixed
/// order. `face_filter(face_index)` may skip whole faces.
template <typename FaceFilter, typename Visit>
void for_each_lattice_point(int frequency, FaceFilter&& face_filter, Visit&& visit) {
  const Icosahedron& ico = icosahedron();
  const int n = frequency;
  for (int fi = 0; fi < 20; ++fi) {
    if (!face_filter(fi)) continue;
    const auto [i0, i1, i2] = ico.faces[fi];
    const Vec3& v0 = ico.vertices[i0];
    const Vec3& v1 = ico.vertices[i1];
    const Vec3& v2 = ico.vertices[i2];
    const bool own01 = ico.edge_owner.at(std::minmax(i0, i1)) == fi;
    const bool own02 = ico.edge_owner.at(std::minmax(i0, i2)) == fi;
    const bool own12 = ico.edge_owner.at(std::minmax(i1, i2)) == fi;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        const int k = n - i - j;
        // Weights (k, i, j) on (v0, v1, v2).
        const int zeros = (i == 0) + (j == 0) + (k == 0);
        if (zeros == 2) {
          const int vid = (k == n) ? i0 : (i == n) ? i1 : i2;
          if (ico.vertex_owner[vid] != fi) continue;
        } else if (zeros == 1) {
          if (j == 0 && !own01) continue;
          if (i == 0 && !own02) continue;
          if (k == 0 && !own12) continue;
        }
        const Vec3 p = (k * v0 + i * v1 + j * v2).normalized();
        visit(p);
      }
    }
  }
}

inline int frequency_for_level(int level) {
  if (level < 0) throw Error(Errc::InvalidArgument, "grid level must be non-negative");
  if (level > kMaxGridLevel)
    throw Error(Errc::GridTooLarge, "grid level " + std::to_string(level) +
                                        " exceeds cap " + std::to_string(kMaxGridLevel));
  return kBaseFrequency << level;
}

/// Canonical hemisphere: z > 0, or on the equator with y > 0, or +x.
inline bool in_canonical_hemisphere(const Vec3& p) {
  constexpr double tol = 1e-12;
  if (p.z() > tol) return true;
  if (p.z() < -tol) return false;
  if (p.y() > tol) return true;
  if (p.y() < -tol) return false;
  return p.x() > 0.0;
}

inline void append_axes(std::vector<Vec3>& pts, bool hemisphere) {
  std::vector<Vec3> axes = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  if (!hemisphere) {
    axes.push_back(-Vec3::UnitX());
    axes.push_back(-Vec3::UnitY());
    axes.push_back(-Vec3::UnitZ());
  }
  for (const Vec3& axis : axes) {
    bool present = false;
    for (const Vec3& p : pts) {
      if ((p - axis).squaredNorm() < 1e-24) {
        present = true;
        break;
      }
    }
    if (!present) pts.push_back(axis);
  }
}

}  // namespace detail

/// Hemisphere of candidate axes (one representative of each +-t pair), with
/// the coordinate axes included.
inline std::vector<Vec3> sphere_grid(int level) {
  const int n = detail::frequency_for_level(level);
  std::vector<Vec3> pts;
  pts.reserve(5 * n * n + 2 * n + 4);
  detail::for_each_lattice_point(n, [](int) { return true; }, [&](const Vec3& p) {
    if (detail::in_canonical_hemisphere(p)) pts.push_back(p);
  });
  detail::append_axes(pts, true);
  return pts;
}

/// Full sphere lattice (both orientations of every axis).
inline std::vector<Vec3> sphere_grid_full(int level) {
  const int n = detail::frequency_for_level(level);
  std::vector<Vec3> pts;
  pts.reserve(10 * n * n + 8);
  detail::for_each_lattice_point(n, [](int) { return true; }, [&](const Vec3& p) {
    pts.push_back(p);
  });
  detail::append_axes(pts, false);
  return pts;
}

/// Lattice points of `level` (full sphere) within `radius` radians of `center`.
inline std::vector<Vec3> sphere_cap(int level, const Vec3& center, double radius) {
  const int n = detail::frequency_for_level(level);
  const Vec3 c = center.normalized();
  const double cos_radius = std::cos(radius);
  const auto& ico = detail::icosahedron();
  // Angular circumradius of a face seen from its centroid direction.
  const double face_radius = std::acos(std::sqrt((5.0 + 2.0 * std::sqrt(5.0)) / 15.0)) + 1e-9;
  std::vector<Vec3> pts;
  detail::for_each_lattice_point(
      n,
      [&](int fi) {
        const auto [a, b, d] = ico.faces[fi];
        const Vec3 centroid = (ico.vertices[a] + ico.vertices[b] + ico.vertices[d]).normalized();
        return angle_between(centroid, c) <= radius + face_radius;
      },
      [&](const Vec3& p) {
        if (p.dot(c) >= cos_radius) pts.push_back(p);
      });
  std::vector<Vec3> axes;
  detail::append_axes(axes, false);
  for (const Vec3& axis : axes) {
    if (axis.dot(c) < cos_radius) continue;
    bool present = false;
    for (const Vec3& p : pts) present = present || (p - axis).squaredNorm() < 1e-24;
    if (!present) pts.push_back(axis);
  }
  if (pts.empty()) pts.push_back(c);
  return pts;
}

}  // namespace egomo
