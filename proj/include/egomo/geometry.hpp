#pragma once

// Camera model and the instantaneous (differential) motion-field equations.
//
// Image coordinates are in pixels, measured from the principal point. With
// translation t, rotation rate w and depth Z the image motion is
//
//   u(x) = (1/Z) A(x) t + B(x) w
//
//   A(x) = [ -f  0  x ]      B(x) = [ xy/f        -(x^2/f) - f   y ]
//          [  0 -f  y ]             [ (y^2/f) + f  -xy/f         -x ]

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <numbers>

#include "egomo/error.hpp"

namespace egomo {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat23 = Eigen::Matrix<double, 2, 3>;
using FlowVector = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;

inline constexpr double deg2rad(double deg) { return deg * kPi / 180.0; }
inline constexpr double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Pixel position relative to the principal point.
struct ImagePoint {
  double x = 0.0;
  double y = 0.0;
};

class Camera {
 public:
  Camera(double focal_px, double cx, double cy, int width, int height)
      : focal_(focal_px), cx_(cx), cy_(cy), width_(width), height_(height) {
    if (!(focal_px > 0.0) || !std::isfinite(focal_px))
      throw Error(Errc::InvalidArgument, "focal length must be positive");
    if (width <= 0 || height <= 0)
      throw Error(Errc::InvalidArgument, "image dimensions must be positive");
    if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height))
      throw Error(Errc::InvalidArgument, "principal point outside the image");
  }

  /// Principal point at the image center and f = (width/2) / tan(fov/2).
  static Camera from_fov(int width, int height, double fov_deg) {
    if (!(fov_deg > 0.0 && fov_deg < 180.0))
      throw Error(Errc::InvalidArgument, "field of view must lie in (0, 180) degrees");
    const double focal = (width / 2.0) / std::tan(deg2rad(fov_deg) / 2.0);
    return Camera(focal, (width - 1) / 2.0, (height - 1) / 2.0, width, height);
  }

  double focal() const { return focal_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  ImagePoint centered(double col, double row) const { return {col - cx_, row - cy_}; }

  bool operator==(const Camera&) const = default;

 private:
  double focal_;
  double cx_;
  double cy_;
  int width_;
  int height_;
};

/// Unit translation axis plus rotation rate (radians/frame).
struct RigidMotion {
  Vec3 t_axis = Vec3::UnitZ();
  Vec3 w = Vec3::Zero();

  /// Normalizes the translation; throws on a zero axis.
  static RigidMotion make(const Vec3& translation, const Vec3& w) {
    const double norm = translation.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw Error(Errc::InvalidArgument, "translation axis must be nonzero and finite");
    return RigidMotion{translation / norm, w};
  }
};

inline Mat23 translation_matrix(const ImagePoint& p, const Camera& cam) {
  const double f = cam.focal();
  Mat23 a;
  a << -f, 0.0, p.x,
       0.0, -f, p.y;
  return a;
}

inline Mat23 rotation_matrix(const ImagePoint& p, const Camera& cam) {
  const double f = cam.focal();
  const double x = p.x;
  const double y = p.y;
  Mat23 b;
  b << x * y / f, -(x * x / f) - f, y,
       (y * y / f) + f, -x * y / f, -x;
  return b;
}

/// n^T A(x): the translational normal component is this row times t.
inline Vec3 translation_row(const ImagePoint& p, const Vec2& n, const Camera& cam) {
  const double f = cam.focal();
  return {-f * n.x(), -f * n.y(), n.x() * p.x + n.y() * p.y};
}

/// n^T B(x): the rotational normal component is this row times w.
inline Vec3 rotation_row(const ImagePoint& p, const Vec2& n, const Camera& cam) {
  const double f = cam.focal();
  const double x = p.x;
  const double y = p.y;
  return {n.x() * (x * y / f) + n.y() * ((y * y / f) + f),
          n.x() * (-(x * x / f) - f) - n.y() * (x * y / f),
          n.x() * y - n.y() * x};
}

/// Image motion of a scene point at depth Z; `speed` is |t|.
inline FlowVector motion_field(const ImagePoint& p, double depth, const RigidMotion& motion,
                               double speed, const Camera& cam) {
  if (!(depth > 0.0)) throw Error(Errc::NonPositiveDepth, "depth must be positive");
  const Vec3 t = motion.t_axis * speed;
  return (translation_matrix(p, cam) * t) / depth + rotation_matrix(p, cam) * motion.w;
}

inline Mat3 skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return s;
}

/// Rotation exponential exp([w]x).
inline Mat3 so3_exp(const Vec3& w) {
  const double angle = w.norm();
  if (angle < 1e-300) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

/// Inverse of so3_exp for rotations with angle < pi.
inline Vec3 so3_log(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.axis() * aa.angle();
}

/// Angle in radians between two nonzero vectors, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

}  // namespace egomo
