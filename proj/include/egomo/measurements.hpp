#pragma once

// Precomputed per-entry rows n^T A(x) and n^T B(x) for fast objective
// evaluation over many candidate motions, plus full-flow sample sets.

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <vector>

#include "egomo/geometry.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/raster.hpp"

namespace egomo {

struct PackedField {
  Eigen::MatrixX3d trans;  // row i: n_i^T A(x_i)
  Eigen::MatrixX3d rot;    // row i: n_i^T B(x_i)
  Eigen::VectorXd speed;   // u_n

  Eigen::Index size() const { return speed.size(); }

  static PackedField from(const NormalFlowField& nf, const Camera& cam) {
    PackedField p;
    const auto n = static_cast<Eigen::Index>(nf.entries.size());
    p.trans.resize(n, 3);
    p.rot.resize(n, 3);
    p.speed.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const NormalFlowEntry& e = nf.entries[static_cast<std::size_t>(i)];
      p.trans.row(i) = translation_row(e.pos, e.n, cam).transpose();
      p.rot.row(i) = rotation_row(e.pos, e.n, cam).transpose();
      p.speed(i) = e.speed;
    }
    return p;
  }
};

/// A full optical-flow measurement at one image point.
struct FlowSample {
  int col = 0;
  int row = 0;
  ImagePoint pos;
  FlowVector u = FlowVector::Zero();
};

/// Every pixel of a dense flow raster whose value is finite.
inline std::vector<FlowSample> flow_samples(const Raster<FlowVector>& flow, const Camera& cam) {
  std::vector<FlowSample> out;
  for (int row = 0; row < flow.height(); ++row) {
    for (int col = 0; col < flow.width(); ++col) {
      const FlowVector& u = flow(col, row);
      if (!u.allFinite()) continue;
      out.push_back({col, row, cam.centered(col, row), u});
    }
  }
  return out;
}

/// Splits each flow sample into two normal-flow entries along x and y.
inline NormalFlowField flow_as_normal_flow(const std::vector<FlowSample>& samples,
                                           const Camera& cam) {
  NormalFlowField nf;
  nf.width = cam.width();
  nf.height = cam.height();
  nf.entries.reserve(samples.size() * 2);
  for (const FlowSample& s : samples) {
    nf.entries.push_back({s.col, s.row, s.pos, Vec2::UnitX(), s.u.x(), 1.0});
    nf.entries.push_back({s.col, s.row, s.pos, Vec2::UnitY(), s.u.y(), 1.0});
  }
  return nf;
}

/// Least-squares solve of a symmetric 3x3 normal system. Near-singular
/// directions (eigenvalue below rel_tol * largest) are dropped, giving the
/// minimum-norm solution. Returns false if the system is rank-deficient.
inline bool solve_normal3(const Mat3& m, const Vec3& rhs, Vec3& out, double rel_tol = 1e-12) {
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(m);
  const Vec3& lambda = eig.eigenvalues();
  const double top = lambda.cwiseAbs().maxCoeff();
  out.setZero();
  if (!(top > 0.0) || !std::isfinite(top)) return false;
  bool full_rank = true;
  for (int k = 0; k < 3; ++k) {
    if (lambda(k) <= rel_tol * top) {
      full_rank = false;
      continue;
    }
    const Vec3 v = eig.eigenvectors().col(k);
    out += v * (v.dot(rhs) / lambda(k));
  }
  return full_rank;
}

}  // namespace egomo
