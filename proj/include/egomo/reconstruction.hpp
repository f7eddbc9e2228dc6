#pragma once

// Scaled inverse depth from an estimated motion, dense inpainting under a
// second-order smoothness prior, and the alternating motion/structure
// refinement.

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "egomo/error.hpp"
#include "egomo/geometry.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/positivity.hpp"
#include "egomo/raster.hpp"

namespace egomo {

struct StructureEntry {
  int col = 0;
  int row = 0;
  ImagePoint pos;
  double c = 0.0;           // scaled inverse depth |t| / Z
  double confidence = 0.0;  // (n.A t)^2, inverse variance of c up to the noise level
  bool valid = false;
};

struct SparseStructure {
  int width = 0;
  int height = 0;
  std::vector<StructureEntry> entries;

  std::size_t valid_count() const {
    std::size_t k = 0;
    for (const auto& e : entries) k += e.valid ? 1 : 0;
    return k;
  }
};

struct DenseStructure {
  ImageF c;     // scaled inverse depth per pixel
  Mask data;    // 1 where at least one valid entry constrained the pixel
};

/// Per entry, C = (n.A t) / (u_n - n.B w) = Z / |t|, stored as c = 1 / C.
/// Entries with a derotated speed below `min_derotated_speed` or C <= 0 are
/// kept but flagged invalid.
inline SparseStructure structure_from_normal_flow(const NormalFlowField& nf,
                                                  const RigidMotion& motion, const Camera& cam,
                                                  double min_derotated_speed = 1e-2) {
  SparseStructure out;
  out.width = nf.width;
  out.height = nf.height;
  out.entries.reserve(nf.size());
  for (const auto& e : nf.entries) {
    const double a = translation_row(e.pos, e.n, cam).dot(motion.t_axis);
    const double d = e.speed - rotation_row(e.pos, e.n, cam).dot(motion.w);
    StructureEntry s{e.col, e.row, e.pos, 0.0, a * a, false};
    if (std::abs(d) >= min_derotated_speed && a != 0.0) {
      const double big_c = a / d;
      if (big_c > 0.0 && std::isfinite(big_c)) {
        s.c = 1.0 / big_c;
        s.valid = std::isfinite(s.c);
      }
    }
    out.entries.push_back(s);
  }
  return out;
}

struct InpaintConfig {
  double lambda_data = 1e3;
  bool confidence_weighted = false;  // weight data terms by confidence / mean confidence
};

namespace detail {

inline bool all_collinear(const std::vector<Vec2>& pts) {
  if (pts.size() < 3) return true;
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) cov += (p - mean) * (p - mean).transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
  return !(eig.eigenvalues()(0) > 1e-9 * std::max(1.0, eig.eigenvalues()(1)));
}

}  // namespace detail

/// Minimizes sum of squared second differences (horizontal, vertical, both
/// diagonals) plus lambda * sum_i w_i (c(x_i) - c_i)^2 over the raster.
inline DenseStructure inpaint(const SparseStructure& sparse, int width, int height,
                              const InpaintConfig& config = {}) {
  if (width <= 0 || height <= 0)
    throw Error(Errc::InvalidArgument, "inpaint raster must be non-empty");
  if (!(config.lambda_data > 0.0))
    throw Error(Errc::InvalidArgument, "lambda_data must be positive");

  double mean_conf = 0.0;
  std::vector<Vec2> pts;
  for (const auto& e : sparse.entries) {
    if (!e.valid) continue;
    if (e.col < 0 || e.row < 0 || e.col >= width || e.row >= height)
      throw Error(Errc::InconsistentDimensions, "structure entry outside the raster");
    pts.emplace_back(e.col, e.row);
    mean_conf += e.confidence;
  }
  if (pts.size() < 3) throw Error(Errc::InsufficientData, "inpainting needs >= 3 valid entries");
  if (detail::all_collinear(pts))
    throw Error(Errc::InsufficientData, "valid entries are collinear; surface undetermined");
  mean_conf /= static_cast<double>(pts.size());

  const int n = width * height;
  auto idx = [width](int col, int row) { return row * width + col; };
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 4 * 9);
  const int offsets[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  for (const auto& o : offsets) {
    for (int row = 0; row < height; ++row) {
      for (int col = 0; col < width; ++col) {
        const int c0 = col - o[0], r0 = row - o[1];
        const int c2 = col + o[0], r2 = row + o[1];
        if (c0 < 0 || c0 >= width || r0 < 0 || r0 >= height) continue;
        if (c2 < 0 || c2 >= width || r2 < 0 || r2 >= height) continue;
        const int k[3] = {idx(c0, r0), idx(col, row), idx(c2, r2)};
        const double coef[3] = {1.0, -2.0, 1.0};
        for (int a = 0; a < 3; ++a)
          for (int b = 0; b < 3; ++b) trip.emplace_back(k[a], k[b], coef[a] * coef[b]);
      }
    }
  }
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  DenseStructure out{ImageF(width, height), Mask(width, height)};
  for (const auto& e : sparse.entries) {
    if (!e.valid) continue;
    double wgt = config.lambda_data;
    if (config.confidence_weighted && mean_conf > 0.0) wgt *= e.confidence / mean_conf;
    const int k = idx(e.col, e.row);
    trip.emplace_back(k, k, wgt);
    rhs(k) += wgt * e.c;
    out.data(e.col, e.row) = 1;
  }
  Eigen::SparseMatrix<double> m(n, n);
  m.setFromTriplets(trip.begin(), trip.end());

  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(m);
  if (solver.info() != Eigen::Success)
    throw Error(Errc::DegenerateSystem, "inpainting system factorization failed");
  Eigen::VectorXd x = solver.solve(rhs);
  // One step of iterative refinement keeps the residual at the 1e-8 level.
  x += solver.solve(rhs - m * x);
  const double rnorm = (m * x - rhs).norm();
  if (!(rnorm <= 1e-8 * std::max(1.0, rhs.norm())) || !x.allFinite())
    throw Error(Errc::DegenerateSystem, "inpainting solve did not reach tolerance");
  for (int k = 0; k < n; ++k) out.c.data()[static_cast<std::size_t>(k)] = x(k);
  return out;
}

/// Sum of squared second differences of a raster over the four stencils.
inline double smoothness_energy(const ImageF& c) {
  double e = 0.0;
  const int offsets[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  for (const auto& o : offsets)
    for (int row = 0; row < c.height(); ++row)
      for (int col = 0; col < c.width(); ++col) {
        if (!c.contains(col - o[0], row - o[1]) || !c.contains(col + o[0], row + o[1])) continue;
        const double d = c(col - o[0], row - o[1]) - 2.0 * c(col, row) + c(col + o[0], row + o[1]);
        e += d * d;
      }
  return e;
}

/// Scaled inverse depth of each entry, NaN where unknown.
using EntryStructure = std::vector<double>;

inline EntryStructure entry_structure(const SparseStructure& s) {
  EntryStructure out(s.entries.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < s.entries.size(); ++i)
    if (s.entries[i].valid) out[i] = s.entries[i].c;
  return out;
}

inline EntryStructure entry_structure(const DenseStructure& d, const NormalFlowField& nf) {
  EntryStructure out;
  out.reserve(nf.size());
  for (const auto& e : nf.entries) out.push_back(d.c(e.col, e.row));
  return out;
}

struct LsFit {
  RigidMotion motion;
  double speed_scale = 0.0;  // s in T = s * t
  double residual = 0.0;     // sum of squared normal-flow residuals
  int used = 0;
};

/// Jointly linear LS in (T, w): u_n = c_i (n.A T) + n.B w, with T = s * t.
inline LsFit refine_motion_ls_fit(const NormalFlowField& nf, const EntryStructure& c,
                                  const Camera& cam) {
  if (c.size() != nf.size())
    throw Error(Errc::LengthMismatch, "structure and field sizes differ");
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < c.size(); ++i)
    if (std::isfinite(c[i]) && c[i] > 0.0) use.push_back(i);
  if (use.size() < 20)
    throw Error(Errc::DegenerateSystem,
                "structure valid at " + std::to_string(use.size()) + " entries, need >= 20");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(use.size()), 6);
  Eigen::VectorXd b(static_cast<Eigen::Index>(use.size()));
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const std::size_t i = use[static_cast<std::size_t>(r)];
    const auto& e = nf.entries[i];
    a.row(r).head<3>() = c[i] * translation_row(e.pos, e.n, cam).transpose();
    a.row(r).tail<3>() = rotation_row(e.pos, e.n, cam).transpose();
    b(r) = e.speed;
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 6) throw Error(Errc::DegenerateSystem, "refinement system is rank-deficient");
  const Eigen::Matrix<double, 6, 1> x = qr.solve(b);
  const Vec3 big_t = x.head<3>();
  const double s = big_t.norm();
  if (!(s > 0.0) || !x.allFinite())
    throw Error(Errc::DegenerateSystem, "refined translation vanishes");
  LsFit fit;
  fit.motion = RigidMotion{big_t / s, x.tail<3>()};
  fit.speed_scale = s;
  fit.residual = (a * x - b).squaredNorm();
  fit.used = static_cast<int>(use.size());
  return fit;
}

inline RigidMotion refine_motion_ls(const NormalFlowField& nf, const SparseStructure& s,
                                    const Camera& cam) {
  return refine_motion_ls_fit(nf, entry_structure(s), cam).motion;
}

inline RigidMotion refine_motion_ls(const NormalFlowField& nf, const DenseStructure& d,
                                    const Camera& cam) {
  return refine_motion_ls_fit(nf, entry_structure(d, nf), cam).motion;
}

struct RefineConfig {
  int max_outer_iters = 10;
  double depth_convergence_tol = 1e-2;  // relative mean absolute change
  double min_derotated_speed = 1e-2;
  InpaintConfig inpaint;
  bool resolve_rotation = false;  // re-solve w by positivity after each LS step
  SolverConfig solver;            // used when resolve_rotation is set

  void validate() const {
    if (max_outer_iters < 1) throw Error(Errc::InvalidArgument, "max_outer_iters must be >= 1");
    if (!(depth_convergence_tol > 0.0) || !(min_derotated_speed > 0.0))
      throw Error(Errc::InvalidArgument, "refinement tolerances must be positive");
  }
};

struct RefineIteration {
  RigidMotion motion;        // motion fitted on this iteration's structure
  double residual = 0.0;     // LS residual of that fit
  double change = 0.0;       // relative mean absolute change of the dense structure
  int valid_entries = 0;
  std::optional<double> mae;   // against ground truth, if supplied
  std::optional<double> pobp;
};

struct RefinementReport {
  std::vector<RefineIteration> iterations;
  std::size_t best = 0;
  bool converged = false;
};

struct RefineResult {
  RigidMotion motion;
  DenseStructure structure;
  RefinementReport report;
};

/// Truth for the optional per-iteration structure error trajectory.
struct StructureTruth {
  const ImageF* c = nullptr;  // ground-truth scaled inverse depth
  double pobp_threshold = 1.0;
  double scale = 1.0;  // errors are measured on scale * c
};

inline double relative_mean_abs_change(const ImageF& prev, const ImageF& next) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 0; k < prev.data().size(); ++k) {
    num += std::abs(next.data()[k] - prev.data()[k]);
    den += std::abs(prev.data()[k]);
  }
  return den > 0.0 ? num / den : (num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
}

/// Alternates structure -> inpaint -> LS motion until the dense structure
/// stops changing. Returns the iterate with the lowest LS residual.
inline RefineResult refine_loop(const NormalFlowField& nf, const MotionEstimate& init,
                                const Camera& cam, const RefineConfig& config,
                                const StructureTruth& truth = {}) {
  config.validate();
  RefineResult best;
  double best_residual = std::numeric_limits<double>::infinity();
  RigidMotion motion = init.motion;
  std::optional<ImageF> prev;
  for (int it = 0; it < config.max_outer_iters; ++it) {
    const SparseStructure sparse =
        structure_from_normal_flow(nf, motion, cam, config.min_derotated_speed);
    DenseStructure dense = inpaint(sparse, nf.width, nf.height, config.inpaint);
    LsFit fit = refine_motion_ls_fit(nf, entry_structure(dense, nf), cam);
    if (config.resolve_rotation) fit.motion.w = solve_rotation(nf, fit.motion.t_axis, cam,
                                                                config.solver, fit.motion.w);

    RefineIteration rec;
    rec.motion = fit.motion;
    rec.residual = fit.residual;
    rec.valid_entries = static_cast<int>(sparse.valid_count());
    rec.change = prev ? relative_mean_abs_change(*prev, dense.c)
                      : std::numeric_limits<double>::infinity();
    if (truth.c != nullptr) {
      double abs_sum = 0.0;
      std::size_t bad = 0;
      const auto& gt = truth.c->data();
      for (std::size_t k = 0; k < gt.size(); ++k) {
        const double err = std::abs(truth.scale * (dense.c.data()[k] - gt[k]));
        abs_sum += err;
        bad += err > truth.pobp_threshold ? 1 : 0;
      }
      rec.mae = abs_sum / static_cast<double>(gt.size());
      rec.pobp = 100.0 * static_cast<double>(bad) / static_cast<double>(gt.size());
    }
    best.report.iterations.push_back(rec);
    if (fit.residual < best_residual) {
      best_residual = fit.residual;
      best.motion = fit.motion;
      best.structure = dense;
      best.report.best = best.report.iterations.size() - 1;
    }
    motion = fit.motion;
    if (prev && rec.change < config.depth_convergence_tol) {
      best.report.converged = true;
      break;
    }
    if (!prev && !std::isfinite(config.depth_convergence_tol)) {
      best.report.converged = true;
      break;
    }
    prev = std::move(dense.c);
  }
  return best;
}

}  // namespace egomo
