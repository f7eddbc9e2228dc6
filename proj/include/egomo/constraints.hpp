#pragma once

// Baseline motion constraints: squared distance, epipolar (biased and
// unbiased), planar patches, positive-depth and sign-only votes, and the
// rotation solve from flows orthogonal to the translational component.

#include <algorithm>
#include <cmath>
#include <vector>

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"
#include "egomo/grid_search.hpp"
#include "egomo/measurements.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/sphere_grid.hpp"

namespace egomo {

// ---------------------------------------------------------------------------
// Squared distance (known depth)

/// Sum over points of |u - (speed/Z) A t - B w|. Diagnostic only.
inline double squared_distance_residual(const std::vector<FlowSample>& flow,
                                        const RigidMotion& motion,
                                        const std::vector<double>& depths, const Camera& cam,
                                        double speed = 1.0) {
  if (flow.size() != depths.size())
    throw Error(Errc::LengthMismatch, "one depth per flow sample required");
  double sum = 0.0;
  for (std::size_t i = 0; i < flow.size(); ++i) {
    if (!(depths[i] > 0.0)) throw Error(Errc::NonPositiveDepth, "depth must be positive");
    const FlowVector model = motion_field(flow[i].pos, depths[i], motion, speed, cam);
    sum += (flow[i].u - model).norm();
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Epipolar constraint

namespace detail {

// Accumulates the linear system of the epipolar residual in w for fixed t:
// r_i = c_i - q_i . w with c_i = u_i . p_i, q_i = B_i^T p_i, p_i = (A_i t)^perp.
struct EpipolarSystem {
  Mat3 normal = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
};

inline Vec2 perpendicular(const Vec2& v) { return {-v.y(), v.x()}; }

template <typename Visit>
void for_each_epipolar_row(const std::vector<FlowSample>& flow, const Vec3& t, const Camera& cam,
                           bool unbiased, Visit&& visit) {
  const double f = cam.focal();
  for (const FlowSample& s : flow) {
    const Vec2 at(-f * t.x() + s.pos.x * t.z(), -f * t.y() + s.pos.y * t.z());
    Vec2 p = perpendicular(at);
    if (unbiased) {
      const double len = at.norm();
      if (len < 1e-9) continue;
      p /= len;
    }
    const Mat23 b = rotation_matrix(s.pos, cam);
    const Vec3 q = b.transpose() * p;
    visit(s.u.dot(p), q);
  }
}

}  // namespace detail

/// Sum over points of |(u - B w) . (A t)^perp|, with (A t)^perp normalized
/// in the unbiased variant (points with |A t| < 1e-9 skipped).
inline double epipolar_residual(const std::vector<FlowSample>& flow, const RigidMotion& motion,
                                const Camera& cam, bool unbiased) {
  if (flow.size() < 5) throw Error(Errc::TooFewMeasurements, "need at least 5 flow vectors");
  double sum = 0.0;
  detail::for_each_epipolar_row(flow, motion.t_axis, cam, unbiased,
                                [&](double c, const Vec3& q) { sum += std::abs(c - q.dot(motion.w)); });
  return sum;
}

struct EpipolarSolution {
  RigidMotion motion;
  ResidualSurface surface;
  bool degenerate_translation = false;  // residual is nearly flat over the sphere
};

/// Residual at t and the least-squares rotation for it.
inline SurfaceSample epipolar_candidate(const std::vector<FlowSample>& flow, const Vec3& t,
                                        const Camera& cam, bool unbiased, bool* full_rank) {
  detail::EpipolarSystem sys;
  detail::for_each_epipolar_row(flow, t, cam, unbiased, [&](double c, const Vec3& q) {
    sys.normal += q * q.transpose();
    sys.rhs += q * c;
  });
  SurfaceSample s;
  s.t = t;
  const bool ok = solve_normal3(sys.normal, sys.rhs, s.w);
  if (full_rank) *full_rank = ok;
  s.residual = 0.0;
  detail::for_each_epipolar_row(flow, t, cam, unbiased,
                                [&](double c, const Vec3& q) { s.residual += std::abs(c - q.dot(s.w)); });
  return s;
}

/// Grid search over `sphere_grid(grid_level)`. If `refine_level` exceeds the
/// grid level, the minimizer is refined coarse-to-fine up to that level.
inline EpipolarSolution solve_epipolar(const std::vector<FlowSample>& flow, const Camera& cam,
                                       int grid_level, bool unbiased, int threads = 1,
                                       int refine_level = -1) {
  if (flow.size() < 5) throw Error(Errc::TooFewMeasurements, "need at least 5 flow vectors");
  const auto grid = sphere_grid(grid_level);
  std::vector<char> rank_ok(grid.size(), 0);
  EpipolarSolution out;
  out.surface.level = grid_level;
  out.surface.samples.resize(grid.size());
  parallel_for(grid.size(), threads, [&](std::size_t i) {
    bool ok = false;
    out.surface.samples[i] = epipolar_candidate(flow, grid[i], cam, unbiased, &ok);
    rank_ok[i] = ok;
  });
  if (std::none_of(rank_ok.begin(), rank_ok.end(), [](char c) { return c != 0; }))
    throw Error(Errc::DegenerateSystem, "rotation normal equations rank-deficient everywhere");

  SurfaceSample best = out.surface.best();
  if (refine_level > grid_level) {
    best = cascade_refine(
        best, grid_level, refine_level,
        [&](const Vec3& t) { return epipolar_candidate(flow, t, cam, unbiased, nullptr); },
        threads);
  }
  out.motion = RigidMotion{best.t.normalized(), best.w};

  // Flatness: spread of the surface relative to the flow magnitude.
  std::vector<double> res;
  res.reserve(out.surface.samples.size());
  for (const auto& s : out.surface.samples) res.push_back(s.residual);
  std::nth_element(res.begin(), res.begin() + res.size() / 2, res.end());
  const double median = res[res.size() / 2];
  double flow_scale = 0.0;
  for (const auto& s : flow) flow_scale += s.u.norm();
  out.degenerate_translation = (median - out.surface.best().residual) <= 1e-3 * flow_scale + 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// Planar patches

struct PatchLayout {
  int cols = 8;
  int rows = 8;
};

struct PlanarPatch {
  int patch_id = 0;
  int col_begin = 0, col_end = 0;  // [begin, end) pixel columns
  int row_begin = 0, row_end = 0;
  Vec3 plane = Vec3::Zero();  // |t| (alpha, beta, gamma)
};

struct PlanarSolution {
  RigidMotion motion;
  std::vector<PlanarPatch> patches;  // surviving patches with recovered planes
  std::vector<int> dropped_patches;  // ids of patches with fewer than 6 measurements
  ResidualSurface surface;
  double residual = 0.0;  // sum of squared normal-flow residuals at the solution
};

namespace detail {

struct PatchedField {
  std::vector<PlanarPatch> patches;
  std::vector<int> dropped;
  // Per surviving measurement.
  std::vector<int> patch_of;
  std::vector<Vec3> trans;  // n^T A
  std::vector<Vec3> rot;    // n^T B
  std::vector<Vec3> plane_basis;  // (x/f, y/f, 1)
  std::vector<double> speed;
};

inline PatchedField partition(const NormalFlowField& nf, const PatchLayout& layout,
                              const Camera& cam) {
  if (layout.cols <= 0 || layout.rows <= 0)
    throw Error(Errc::InvalidArgument, "patch layout must be positive");
  const int w = cam.width();
  const int h = cam.height();
  const int total = layout.cols * layout.rows;
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(total));
  for (std::size_t i = 0; i < nf.entries.size(); ++i) {
    const auto& e = nf.entries[i];
    const int pc = std::clamp(e.col * layout.cols / w, 0, layout.cols - 1);
    const int pr = std::clamp(e.row * layout.rows / h, 0, layout.rows - 1);
    members[static_cast<std::size_t>(pr * layout.cols + pc)].push_back(i);
  }
  PatchedField out;
  const double f = cam.focal();
  for (int id = 0; id < total; ++id) {
    const auto& m = members[static_cast<std::size_t>(id)];
    if (m.size() < 6) {
      out.dropped.push_back(id);
      continue;
    }
    const int pc = id % layout.cols;
    const int pr = id / layout.cols;
    PlanarPatch patch;
    patch.patch_id = id;
    patch.col_begin = (pc * w + layout.cols - 1) / layout.cols;
    patch.col_end = ((pc + 1) * w + layout.cols - 1) / layout.cols;
    patch.row_begin = (pr * h + layout.rows - 1) / layout.rows;
    patch.row_end = ((pr + 1) * h + layout.rows - 1) / layout.rows;
    const int slot = static_cast<int>(out.patches.size());
    out.patches.push_back(patch);
    for (std::size_t idx : m) {
      const auto& e = nf.entries[idx];
      out.patch_of.push_back(slot);
      out.trans.push_back(translation_row(e.pos, e.n, cam));
      out.rot.push_back(rotation_row(e.pos, e.n, cam));
      out.plane_basis.push_back(Vec3(e.pos.x / f, e.pos.y / f, 1.0));
      out.speed.push_back(e.speed);
    }
  }
  return out;
}

struct PlanarFit {
  double residual = 0.0;
  Vec3 w = Vec3::Zero();
  std::vector<Vec3> planes;
  std::vector<double> history;  // residual after every half-step
};

// Alternates closed-form least squares in the per-patch planes (w fixed) and
// in w (planes fixed).
inline PlanarFit fit_planar(const PatchedField& pf, const Vec3& t, int max_iters = 50,
                            double tol = 1e-10, bool keep_history = false) {
  const std::size_t n = pf.speed.size();
  const std::size_t np = pf.patches.size();
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = pf.trans[i].dot(t);

  PlanarFit fit;
  fit.planes.assign(np, Vec3::Zero());
  auto residual = [&] {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double gamma = fit.planes[pf.patch_of[i]].dot(pf.plane_basis[i]);
      const double e = pf.speed[i] - gamma * a[i] - pf.rot[i].dot(fit.w);
      r += e * e;
    }
    return r;
  };
  double prev = residual();
  if (keep_history) fit.history.push_back(prev);
  for (int iter = 0; iter < max_iters; ++iter) {
    std::vector<Mat3> m(np, Mat3::Zero());
    std::vector<Vec3> rhs(np, Vec3::Zero());
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 row = a[i] * pf.plane_basis[i];
      const int p = pf.patch_of[i];
      m[p] += row * row.transpose();
      rhs[p] += row * (pf.speed[i] - pf.rot[i].dot(fit.w));
    }
    for (std::size_t p = 0; p < np; ++p) solve_normal3(m[p], rhs[p], fit.planes[p]);
    if (keep_history) fit.history.push_back(residual());

    Mat3 mw = Mat3::Zero();
    Vec3 rw = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
      const double gamma = fit.planes[pf.patch_of[i]].dot(pf.plane_basis[i]);
      mw += pf.rot[i] * pf.rot[i].transpose();
      rw += pf.rot[i] * (pf.speed[i] - gamma * a[i]);
    }
    solve_normal3(mw, rw, fit.w);
    const double cur = residual();
    if (keep_history) fit.history.push_back(cur);
    const bool converged = std::abs(prev - cur) < tol * std::max(1.0, prev);
    prev = cur;
    if (converged) break;
  }
  fit.residual = prev;
  return fit;
}

}  // namespace detail

/// Piecewise-planar scene model on a regular patch grid; see PlanarSolution.
inline PlanarSolution solve_planar_patches(const NormalFlowField& nf, const PatchLayout& layout,
                                           const Camera& cam, int grid_level, int threads = 1,
                                           int refine_level = -1) {
  const detail::PatchedField pf = detail::partition(nf, layout, cam);
  if (pf.patches.empty())
    throw Error(Errc::PatchUnderdetermined, "every patch holds fewer than 6 measurements");
  const std::size_t unknowns = 3 * pf.patches.size() + 5;
  if (pf.speed.size() < unknowns)
    throw Error(Errc::TooFewMeasurements,
                std::to_string(pf.speed.size()) + " measurements for " +
                    std::to_string(unknowns) + " unknowns");

  auto eval = [&](const Vec3& t) {
    const detail::PlanarFit fit = detail::fit_planar(pf, t);
    return SurfaceSample{t, fit.residual, fit.w};
  };
  PlanarSolution out;
  out.dropped_patches = pf.dropped;
  out.surface.level = grid_level;
  out.surface.samples = scan_candidates(sphere_grid(grid_level), eval, threads);
  SurfaceSample best = out.surface.best();
  if (refine_level > grid_level) best = cascade_refine(best, grid_level, refine_level, eval, threads);

  const detail::PlanarFit fit = detail::fit_planar(pf, best.t);
  out.motion = RigidMotion{best.t.normalized(), fit.w};
  out.residual = fit.residual;
  out.patches = pf.patches;
  for (std::size_t p = 0; p < out.patches.size(); ++p) out.patches[p].plane = fit.planes[p];
  return out;
}

/// Full-flow variant: each flow vector contributes its x and y components.
inline PlanarSolution solve_planar_patches(const std::vector<FlowSample>& flow,
                                           const PatchLayout& layout, const Camera& cam,
                                           int grid_level, int threads = 1,
                                           int refine_level = -1) {
  return solve_planar_patches(flow_as_normal_flow(flow, cam), layout, cam, grid_level, threads,
                              refine_level);
}

// ---------------------------------------------------------------------------
// Voting

/// Entries whose derotated normal flow and translational normal component
/// have strictly opposite signs.
inline int depth_positivity_votes(const NormalFlowField& nf, const RigidMotion& motion,
                                  const Camera& cam) {
  if (nf.empty()) throw Error(Errc::EmptyField, "normal flow field is empty");
  int votes = 0;
  for (const auto& e : nf.entries) {
    const double derot = e.speed - rotation_row(e.pos, e.n, cam).dot(motion.w);
    const double trans = translation_row(e.pos, e.n, cam).dot(motion.t_axis);
    if ((derot < 0.0 && trans > 0.0) || (derot > 0.0 && trans < 0.0)) ++votes;
  }
  return votes;
}

inline int depth_positivity_votes(const PackedField& p, const Vec3& t, const Vec3& w) {
  const Eigen::VectorXd derot = p.speed - p.rot * w;
  const Eigen::VectorXd trans = p.trans * t;
  int votes = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if ((derot(i) < 0.0 && trans(i) > 0.0) || (derot(i) > 0.0 && trans(i) < 0.0)) ++votes;
  return votes;
}

/// Entries matching one of the two all-sign violation patterns.
inline int robust_sign_votes(const NormalFlowField& nf, const RigidMotion& motion,
                             const Camera& cam) {
  int votes = 0;
  for (const auto& e : nf.entries) {
    const double rot = rotation_row(e.pos, e.n, cam).dot(motion.w);
    const double trans = translation_row(e.pos, e.n, cam).dot(motion.t_axis);
    if ((e.speed > 0.0 && rot < 0.0 && trans < 0.0) || (e.speed < 0.0 && rot > 0.0 && trans > 0.0))
      ++votes;
  }
  return votes;
}

// ---------------------------------------------------------------------------
// Rotation from flows orthogonal to the translational component

struct OrthogonalRotation {
  Vec3 w = Vec3::Zero();
  int count = 0;  // M, entries used
};

inline OrthogonalRotation orthogonal_flow_rotation(const NormalFlowField& nf, const Vec3& t_axis,
                                                   const Camera& cam, double ortho_tol = 0.05) {
  if (!(ortho_tol > 0.0)) throw Error(Errc::InvalidArgument, "ortho_tol must be positive");
  Mat3 m = Mat3::Zero();
  Vec3 rhs = Vec3::Zero();
  OrthogonalRotation out;
  for (const auto& e : nf.entries) {
    const double trans = translation_row(e.pos, e.n, cam).dot(t_axis);
    const double at_norm = (translation_matrix(e.pos, cam) * t_axis).norm();
    if (std::abs(trans) > ortho_tol * at_norm) continue;
    const Vec3 b = rotation_row(e.pos, e.n, cam);
    m += b * b.transpose();
    rhs += b * e.speed;
    ++out.count;
  }
  if (out.count < 3)
    throw Error(Errc::TooFewMeasurements,
                "only " + std::to_string(out.count) + " entries orthogonal to the translation");
  if (!solve_normal3(m, rhs, out.w))
    throw Error(Errc::DegenerateSystem, "orthogonal entries do not constrain the rotation");
  return out;
}

struct SignVotingSolution {
  RigidMotion motion;
  int votes = 0;
  ResidualSurface surface;  // residual = vote count
};

/// Classic voting baseline: for each candidate axis, rotation from the
/// orthogonal entries, then the orientation with fewer negative-depth votes.
inline SignVotingSolution solve_sign_voting(const NormalFlowField& nf, const Camera& cam,
                                            int grid_level, double ortho_tol = 0.05,
                                            int threads = 1, int refine_level = -1) {
  if (nf.empty()) throw Error(Errc::EmptyField, "normal flow field is empty");
  const PackedField packed = PackedField::from(nf, cam);
  auto eval = [&](const Vec3& t) {
    SurfaceSample s;
    s.t = t;
    try {
      s.w = orthogonal_flow_rotation(nf, t, cam, ortho_tol).w;
    } catch (const Error&) {
      return s;  // infinite residual
    }
    const int plus = depth_positivity_votes(packed, t, s.w);
    const int minus = depth_positivity_votes(packed, -t, s.w);
    if (minus < plus) s.t = -t;
    s.residual = std::min(plus, minus);
    return s;
  };
  SignVotingSolution out;
  out.surface.level = grid_level;
  out.surface.samples = scan_candidates(sphere_grid(grid_level), eval, threads);
  SurfaceSample best = out.surface.best();
  if (refine_level > grid_level && std::isfinite(best.residual))
    best = cascade_refine(best, grid_level, refine_level, eval, threads);
  if (!std::isfinite(best.residual))
    throw Error(Errc::TooFewMeasurements, "no candidate had enough orthogonal entries");
  out.motion = RigidMotion{best.t, best.w};
  out.votes = static_cast<int>(best.residual);
  return out;
}

}  // namespace egomo
