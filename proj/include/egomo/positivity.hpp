#pragma once

// Depth-positivity motion estimation from normal flow.
//
// For an entry with derotated normal speed d = u_n - n.B w and translational
// component a = n.A t, positive depth requires f = d * a > 0. The estimator
// minimizes sum_i H(f_i) with the negative ReLU H(x) = max(-x, 0): rotation by
// gradient descent for each candidate axis, translation by a coarse-to-fine
// search over the sphere.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>
#include <tuple>
#include <vector>

#include "egomo/constraints.hpp"
#include "egomo/error.hpp"
#include "egomo/geometry.hpp"
#include "egomo/grid_search.hpp"
#include "egomo/measurements.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/sphere_grid.hpp"

namespace egomo {

struct SolverConfig {
  double epsilon = 0.0;  ///< smoothing half-width of H'; <= 0 selects default_epsilon()
  int grid_level_coarse = 0;
  int grid_level_fine = 5;
  int rotation_max_iters = 100;  ///< per smoothing stage
  int coarse_max_iters = 40;  ///< per-stage cap during the coarse scan
  int smoothing_stages = 6;   ///< tenfold reductions of epsilon after a stall
  /// Entries used at the coarse level, quadrupled at each finer level; the
  /// fine level and the final steps always use the whole field. 0 = all.
  int coarse_entries = 2048;
  double rotation_step_tol = 1e-9;     ///< radians/frame
  double rotation_initial_step = 0.05;  ///< radians/frame
  /// Radius of the admissible |w| ball in radians/frame (20 deg); 0 = unbounded.
  double rotation_bound = 0.3490658503988659;
  int outer_rounds = 2;
  int threads = 1;
  bool keep_surface = false;  ///< retain the coarse residual surface

  void validate() const {
    if (grid_level_coarse < 0 || grid_level_fine < grid_level_coarse)
      throw Error(Errc::InvalidArgument, "need 0 <= grid_level_coarse <= grid_level_fine");
    if (rotation_max_iters < 1 || coarse_max_iters < 1 || outer_rounds < 1 ||
        smoothing_stages < 0 || coarse_entries < 0)
      throw Error(Errc::InvalidArgument, "iteration caps must be >= 1");
    if (!(rotation_bound >= 0.0)) throw Error(Errc::InvalidArgument, "rotation_bound must be >= 0");
    if (!(rotation_step_tol > 0.0) || !(rotation_initial_step > 0.0))
      throw Error(Errc::InvalidArgument, "step sizes must be positive");
  }
};

struct MotionEstimate {
  RigidMotion motion;
  double objective = 0.0;
  int negative_depth_count = 0;
  std::optional<ResidualSurface> surface;
};

// ---------------------------------------------------------------------------
// Objective pieces

inline double positivity_term(const NormalFlowEntry& e, const RigidMotion& motion,
                              const Camera& cam) {
  const double derotated = e.speed - rotation_row(e.pos, e.n, cam).dot(motion.w);
  return derotated * translation_row(e.pos, e.n, cam).dot(motion.t_axis);
}

inline double hinge(double x) { return x <= 0.0 ? -x : 0.0; }

inline double hinge_grad(double x, double epsilon) {
  if (x <= -epsilon) return -1.0;
  if (x < epsilon) return -0.5;
  return 0.0;
}

inline double objective(const NormalFlowField& nf, const RigidMotion& motion, const Camera& cam) {
  if (nf.empty()) throw Error(Errc::EmptyField, "normal flow field is empty");
  double sum = 0.0;
  for (const auto& e : nf.entries) sum += hinge(positivity_term(e, motion, cam));
  return sum;
}

inline Vec3 objective_gradient_w(const NormalFlowField& nf, const RigidMotion& motion,
                                 const Camera& cam, double epsilon) {
  if (nf.empty()) throw Error(Errc::EmptyField, "normal flow field is empty");
  Vec3 g = Vec3::Zero();
  for (const auto& e : nf.entries) {
    const double trans = translation_row(e.pos, e.n, cam).dot(motion.t_axis);
    const Vec3 rot = rotation_row(e.pos, e.n, cam);
    const double f = (e.speed - rot.dot(motion.w)) * trans;
    g += hinge_grad(f, epsilon) * trans * (-rot);
  }
  return g;
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// 1e-3 * median |u_n| * median |A(x)| (spectral norm sqrt(f^2 + x^2 + y^2)).
inline double default_epsilon(const NormalFlowField& nf, const Camera& cam) {
  std::vector<double> speeds;
  std::vector<double> norms;
  speeds.reserve(nf.size());
  norms.reserve(nf.size());
  const double f2 = cam.focal() * cam.focal();
  for (const auto& e : nf.entries) {
    speeds.push_back(std::abs(e.speed));
    norms.push_back(std::sqrt(f2 + e.pos.x * e.pos.x + e.pos.y * e.pos.y));
  }
  const double eps = 1e-3 * median_of(std::move(speeds)) * median_of(std::move(norms));
  return eps > 0.0 ? eps : 1e-12;
}

/// C1 surrogate of H used by the rotation descent: -x below -epsilon, 0 above
/// epsilon, (x - epsilon)^2 / (4 epsilon) in between. Its derivative ramps
/// from -1 to 0 over the band and equals hinge_grad at 0 and outside it.
inline double smoothed_hinge(double x, double epsilon) {
  if (x <= -epsilon) return -x;
  if (x < epsilon) return (x - epsilon) * (x - epsilon) / (4.0 * epsilon);
  return 0.0;
}

inline double smoothed_hinge_grad(double x, double epsilon) {
  if (x <= -epsilon) return -1.0;
  if (x < epsilon) return (x - epsilon) / (2.0 * epsilon);
  return 0.0;
}

/// Objective restricted to a fixed translation axis: f = a.*u - M w with
/// a = trans * t and M = diag(a) * rot.
class RotationObjective {
 public:
  RotationObjective(const PackedField& field, const Vec3& t_axis, double epsilon)
      : epsilon_(epsilon) {
    const auto n = static_cast<std::size_t>(field.size());
    au_.resize(n);
    m0_.resize(n);
    m1_.resize(n);
    m2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      const double a = field.trans.row(k).dot(t_axis);
      au_[i] = a * field.speed(k);
      m0_[i] = a * field.rot(k, 0);
      m1_[i] = a * field.rot(k, 1);
      m2_[i] = a * field.rot(k, 2);
    }
  }

  double epsilon() const { return epsilon_; }
  std::size_t size() const { return au_.size(); }

  double term(std::size_t i, const Vec3& w) const {
    return au_[i] - m0_[i] * w.x() - m1_[i] * w.y() - m2_[i] * w.z();
  }

  double value(const Vec3& w) const {
    double h = 0.0;
    for (std::size_t i = 0; i < au_.size(); ++i) {
      const double f = term(i, w);
      h += f < 0.0 ? -f : 0.0;
    }
    return h;
  }

  /// Sum of smoothed_hinge at half-width `eps`, and the true objective.
  std::pair<double, double> smoothed(const Vec3& w, double eps) const {
    double s = 0.0;
    double h = 0.0;
    for (std::size_t i = 0; i < au_.size(); ++i) {
      const double f = term(i, w);
      s += smoothed_hinge(f, eps);
      h += f < 0.0 ? -f : 0.0;
    }
    return {s, h};
  }

  /// Gradient of the objective with the derivative of H replaced by hinge_grad.
  Vec3 gradient(const Vec3& w) const {
    Vec3 g = Vec3::Zero();
    for (std::size_t i = 0; i < au_.size(); ++i) {
      const double d = hinge_grad(term(i, w), epsilon_);
      if (d != 0.0) g -= d * Vec3(m0_[i], m1_[i], m2_[i]);
    }
    return g;
  }

  Vec3 smoothed_gradient(const Vec3& w, double eps) const {
    Vec3 g = Vec3::Zero();
    for (std::size_t i = 0; i < au_.size(); ++i) {
      const double d = smoothed_hinge_grad(term(i, w), eps);
      if (d != 0.0) g -= d * Vec3(m0_[i], m1_[i], m2_[i]);
    }
    return g;
  }

 private:
  double epsilon_;
  std::vector<double> au_;
  std::vector<double> m0_;
  std::vector<double> m1_;
  std::vector<double> m2_;
};

struct RotationResult {
  Vec3 w = Vec3::Zero();
  double objective = 0.0;  // sum of H(f_i)
  double smoothed = 0.0;   // sum of smoothed_hinge(f_i, epsilon)
  int iterations = 0;
};

/// Quasi-Newton (BFGS) descent on the rotation rate with halving
/// backtracking (Armijo factor 1e-4). The inverse Hessian starts as a scaled
/// identity whose first step has length rotation_initial_step. Steps are
/// projected onto the ball |w| <= rotation_bound.
///
/// The descent runs on the smoothed objective and stops once the true
/// objective reaches 0. When a stage stalls with violated terms left, the
/// half-width shrinks tenfold and descent resumes, at most `stages` times.
/// `max_iters` bounds the iterations of each stage.
/// The best iterate under the true objective is returned.
inline RotationResult solve_rotation(const RotationObjective& obj, const SolverConfig& config,
                                     const Vec3& w_init, int max_iters, int stages) {
  constexpr double kArmijo = 1e-4;
  const double bound = config.rotation_bound;
  const auto project = [&](const Vec3& v) {
    const double n = v.norm();
    return bound > 0.0 && n > bound ? Vec3(v * (bound / n)) : v;
  };
  using Mat3 = Eigen::Matrix3d;
  RotationResult r;
  Vec3 w = w_init;
  double best_h = obj.value(w_init);
  r.w = w_init;
  double eps = obj.epsilon();
  for (int stage = 0; stage <= stages && best_h > 0.0; ++stage) {
    auto [cur, h] = obj.smoothed(w, eps);
    Vec3 g = obj.smoothed_gradient(w, eps);
    const auto reset = [&] { return Mat3(Mat3::Identity() * (config.rotation_initial_step / g.norm())); };
    if (!(g.norm() > 0.0)) continue;
    Mat3 hinv = reset();
    bool fresh = true;  // hinv is the scaled identity
    for (int it = 0; it < max_iters; ++it) {
      if (!(g.norm() > 0.0)) break;
      Vec3 dir = -hinv * g;
      if (!(dir.dot(g) < 0.0)) {
        hinv = reset();
        fresh = true;
        dir = -hinv * g;
      }
      double a = 1.0;
      bool accepted = false;
      Vec3 w_try;
      double v = 0.0, vh = 0.0;
      while (a * dir.norm() >= config.rotation_step_tol) {
        w_try = project(w + a * dir);
        if ((w_try - w).norm() < config.rotation_step_tol) break;
        std::tie(v, vh) = obj.smoothed(w_try, eps);
        if (v <= cur + kArmijo * g.dot(w_try - w)) {
          accepted = true;
          break;
        }
        a *= 0.5;
      }
      ++r.iterations;
      if (!accepted) {
        if (fresh) break;
        hinv = reset();
        fresh = true;
        continue;
      }
      fresh = false;
      const Vec3 g_new = obj.smoothed_gradient(w_try, eps);
      const Vec3 sk = w_try - w, yk = g_new - g;
      const double sy = sk.dot(yk);
      if (sy > 0.0) {
        const double rho = 1.0 / sy;
        const Mat3 left = Mat3::Identity() - rho * sk * yk.transpose();
        hinv = left * hinv * left.transpose() + rho * sk * sk.transpose();
      }
      w = w_try;
      g = g_new;
      cur = v;
      h = vh;
      if (h <= best_h) {
        best_h = h;
        r.w = w;
        if (h == 0.0) break;
      }
    }
    eps *= 0.1;
  }
  r.objective = best_h;
  r.smoothed = obj.smoothed(r.w, obj.epsilon()).first;
  return r;
}

inline RotationResult solve_rotation(const RotationObjective& obj, const SolverConfig& config,
                                     const Vec3& w_init) {
  return solve_rotation(obj, config, w_init, config.rotation_max_iters, config.smoothing_stages);
}

inline Vec3 solve_rotation(const NormalFlowField& nf, const Vec3& t_axis, const Camera& cam,
                           const SolverConfig& config, const Vec3& w_init) {
  config.validate();
  if (nf.empty()) throw Error(Errc::EmptyField, "normal flow field is empty");
  const double eps = config.epsilon > 0.0 ? config.epsilon : default_epsilon(nf, cam);
  const PackedField packed = PackedField::from(nf, cam);
  return solve_rotation(RotationObjective(packed, t_axis, eps), config, w_init).w;
}

// ---------------------------------------------------------------------------
// Translation search

namespace detail {

/// Every k-th entry, k chosen so that at most `count` entries are kept.
inline PackedField stride_subset(const PackedField& p, long long count) {
  const Eigen::Index n = p.size();
  const Eigen::Index stride = (n + count - 1) / count;
  const Eigen::Index m = (n + stride - 1) / stride;
  PackedField out;
  out.trans.resize(m, 3);
  out.rot.resize(m, 3);
  out.speed.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.trans.row(i) = p.trans.row(i * stride);
    out.rot.row(i) = p.rot.row(i * stride);
    out.speed(i) = p.speed(i * stride);
  }
  return out;
}

struct PositivitySearch {
  const PackedField& field;
  const SolverConfig& config;
  double epsilon;

  SurfaceSample solve_at(const Vec3& t, int max_iters, int stages,
                         const Vec3& w_init = Vec3::Zero()) const {
    const RotationResult r =
        solve_rotation(RotationObjective(field, t, epsilon), config, w_init, max_iters, stages);
    return SurfaceSample{t, r.objective, r.w, r.smoothed};
  }

  SurfaceSample solve_at(const Vec3& t, const Vec3& w_init = Vec3::Zero()) const {
    return solve_at(t, config.rotation_max_iters, config.smoothing_stages, w_init);
  }

  // Both orientations of a hemisphere axis; the lower objective wins, ties
  // keep the given orientation.
  SurfaceSample solve_either_sign(const Vec3& t, int max_iters, int stages) const {
    SurfaceSample plus = solve_at(t, max_iters, stages);
    SurfaceSample minus = solve_at(-t, max_iters, stages);
    return minus.better_than(plus) ? minus : plus;
  }

  SurfaceSample evaluate(const Vec3& t, const Vec3& w) const {
    const auto [s, h] = RotationObjective(field, t, epsilon).smoothed(w, epsilon);
    return SurfaceSample{t, h, w, s};
  }
};

}  // namespace detail

/// Coarse search over the hemisphere, coarse-to-fine refinement of the
/// incumbent, a translation rescan with the rotation fixed, and the sign
/// check by negative-depth votes. Levels coarser than the fine level run on
/// stride subsets of the entries (see SolverConfig::coarse_entries).
inline MotionEstimate estimate_motion(const NormalFlowField& nf, const Camera& cam,
                                      const SolverConfig& config) {
  config.validate();
  if (nf.size() < 20)
    throw Error(Errc::TooFewMeasurements,
                "need at least 20 normal flow entries, got " + std::to_string(nf.size()));
  const PackedField packed = PackedField::from(nf, cam);
  const double eps = config.epsilon > 0.0 ? config.epsilon : default_epsilon(nf, cam);
  const detail::PositivitySearch search{packed, config, eps};
  const int threads = config.threads;
  const int fine = config.grid_level_fine;

  // Entry subsets for the levels coarser than `fine`.
  std::vector<PackedField> subsets;
  for (int level = config.grid_level_coarse; level < fine; ++level) {
    const int shift = 2 * (level - config.grid_level_coarse);
    const long long want =
        config.coarse_entries == 0 || shift > 40 ? 0 : (static_cast<long long>(config.coarse_entries) << shift);
    subsets.push_back(want > 0 && want < packed.size() ? detail::stride_subset(packed, want) : packed);
  }
  const auto data_at = [&](int level) -> const PackedField& {
    return level < fine ? subsets[static_cast<std::size_t>(level - config.grid_level_coarse)]
                        : packed;
  };

  ResidualSurface coarse;
  coarse.level = config.grid_level_coarse;
  {
    const detail::PositivitySearch s0{data_at(config.grid_level_coarse), config, eps};
    // A coarse level that is also the fine level gets the full budget.
    const bool last = fine == config.grid_level_coarse;
    const int iters = last ? config.rotation_max_iters : config.coarse_max_iters;
    const int stages = last ? config.smoothing_stages : 0;
    coarse.samples = scan_candidates(
        sphere_grid(config.grid_level_coarse),
        [&](const Vec3& t) { return s0.solve_either_sign(t, iters, stages); },
        threads);
  }

  double worst = 0.0;
  for (const auto& s : coarse.samples) worst = std::max(worst, s.residual);
  const double scale = packed.speed.cwiseAbs().sum() * cam.focal() * cam.focal();
  if (worst <= 1e-14 * scale)
    throw Error(Errc::DegenerateField,
                "objective vanishes for every candidate axis; translation is unobservable");

  SurfaceSample best = coarse.best();
  for (int round = 0; round < config.outer_rounds; ++round) {
    if (round == 0) {
      // Coarse to fine; the incumbent is re-solved on each level's entries so
      // that residuals within a level are comparable.
      for (int level = config.grid_level_coarse + 1; level <= fine; ++level) {
        const detail::PositivitySearch s{data_at(level), config, eps};
        best = s.solve_at(best.t, best.w);
        const auto cap = sphere_cap(level, best.t, 2.0 * grid_spacing(level - 1));
        const SurfaceSample seed = best;
        const auto results = scan_candidates(
            cap, [&](const Vec3& t) { return s.solve_at(t, seed.w); }, threads);
        const SurfaceSample& cand = results[argmin_of(results)];
        if (!best.better_than(cand)) best = cand;
      }
      if (fine == config.grid_level_coarse) best = search.solve_at(best.t, best.w);
    } else if (fine > 0) {
      const auto cap = sphere_cap(fine, best.t, 2.0 * grid_spacing(fine - 1));
      const SurfaceSample seed = best;
      const auto results = scan_candidates(
          cap, [&](const Vec3& t) { return search.solve_at(t, seed.w); }, threads);
      const SurfaceSample& cand = results[argmin_of(results)];
      if (!best.better_than(cand)) best = cand;
    }

    // Translation rescan with w fixed.
    const double radius = 2.0 * grid_spacing(std::max(fine - 1, 0));
    const auto cap = sphere_cap(fine, best.t, radius);
    const Vec3 w = best.w;
    const auto rescanned =
        scan_candidates(cap, [&](const Vec3& t) { return search.evaluate(t, w); }, threads);
    const SurfaceSample& cand = rescanned[argmin_of(rescanned)];
    if (cand.better_than(best)) best = cand;

    // Sign ambiguity: keep the orientation with fewer negative-depth votes.
    const int votes_plus = depth_positivity_votes(packed, best.t, best.w);
    const int votes_minus = depth_positivity_votes(packed, -best.t, best.w);
    if (votes_minus < votes_plus) {
      best = search.evaluate(-best.t, best.w);
    }
  }

  MotionEstimate out;
  out.motion = RigidMotion{best.t.normalized(), best.w};
  out.objective = search.evaluate(out.motion.t_axis, out.motion.w).residual;
  out.negative_depth_count = depth_positivity_votes(packed, out.motion.t_axis, out.motion.w);
  if (config.keep_surface) out.surface = std::move(coarse);
  return out;
}

/// Oracle: rotation solve at every full-sphere lattice point of `level`.
inline ResidualSurface exhaustive_positivity_surface(const NormalFlowField& nf, const Camera& cam,
                                                     const SolverConfig& config, int level) {
  config.validate();
  if (nf.empty()) throw Error(Errc::EmptyField, "normal flow field is empty");
  const PackedField packed = PackedField::from(nf, cam);
  const double eps = config.epsilon > 0.0 ? config.epsilon : default_epsilon(nf, cam);
  const detail::PositivitySearch search{packed, config, eps};
  ResidualSurface surface;
  surface.level = level;
  surface.samples = scan_candidates(
      sphere_grid_full(level), [&](const Vec3& t) { return search.solve_at(t); }, config.threads);
  return surface;
}

/// Hemisphere surface with each axis evaluated in its better orientation.
inline ResidualSurface positivity_surface(const NormalFlowField& nf, const Camera& cam,
                                          const SolverConfig& config, int level) {
  config.validate();
  if (nf.empty()) throw Error(Errc::EmptyField, "normal flow field is empty");
  const PackedField packed = PackedField::from(nf, cam);
  const double eps = config.epsilon > 0.0 ? config.epsilon : default_epsilon(nf, cam);
  const detail::PositivitySearch search{packed, config, eps};
  ResidualSurface surface;
  surface.level = level;
  surface.samples = scan_candidates(
      sphere_grid(level),
      [&](const Vec3& t) {
        return search.solve_either_sign(t, config.rotation_max_iters, config.smoothing_stages);
      },
      config.threads);
  return surface;
}

}  // namespace egomo
