#pragma once

// End-to-end estimation (normal flow -> motion -> refined structure) and the
// seeded synthetic benchmark shared by the CLI and the acceptance suite.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "egomo/constraints.hpp"
#include "egomo/metrics.hpp"
#include "egomo/normal_flow.hpp"
#include "egomo/positivity.hpp"
#include "egomo/random.hpp"
#include "egomo/reconstruction.hpp"
#include "egomo/synthetic.hpp"

namespace egomo {

inline constexpr std::uint64_t kDefaultSeed = 20240917;

struct PipelineConfig {
  SolverConfig solver;
  RefineConfig refine;
  bool refine_enabled = true;
};

struct PipelineResult {
  MotionEstimate initial;
  RigidMotion motion;
  DenseStructure structure;
  std::optional<RefinementReport> report;
};

/// Normal flow of a frame pair, thresholded to keep about `density` of the pixels.
inline NormalFlowField normal_flow_from_frames(const ImageF& prev, const ImageF& next,
                                               const Camera& cam, double density,
                                               int threads = 1) {
  if (prev.width() != cam.width() || prev.height() != cam.height())
    throw Error(Errc::DimensionMismatch, "frames do not match the intrinsics");
  const GradientFrame g = compute_gradients(prev, next, threads);
  return extract_normal_flow(g, threshold_for_density(g, density), cam);
}

/// With refinement disabled the motion is the positivity estimate unchanged
/// and the structure is inpainted from it.
inline PipelineResult run_pipeline(const NormalFlowField& nf, const Camera& cam,
                                   const PipelineConfig& config,
                                   const StructureTruth& truth = {}) {
  PipelineResult out;
  out.initial = estimate_motion(nf, cam, config.solver);
  if (config.refine_enabled) {
    RefineResult r = refine_loop(nf, out.initial, cam, config.refine, truth);
    out.motion = r.motion;
    out.structure = std::move(r.structure);
    out.report = std::move(r.report);
  } else {
    out.motion = out.initial.motion;
    const SparseStructure sparse =
        structure_from_normal_flow(nf, out.motion, cam, config.refine.min_derotated_speed);
    out.structure = inpaint(sparse, nf.width, nf.height, config.refine.inpaint);
  }
  return out;
}

/// Scaled inverse depth |t| / Z of a synthetic sample.
inline ImageF true_structure(const SyntheticSample& s) {
  ImageF c(s.depth.width(), s.depth.height());
  for (std::size_t k = 0; k < c.size(); ++k) c.data()[k] = s.speed / s.depth.data()[k];
  return c;
}

// ---------------------------------------------------------------------------
// Synthetic benchmark

inline const std::vector<std::string>& bench_solver_names() {
  static const std::vector<std::string> names = {"positive-depth", "positive-depth+refined",
                                                 "epipolar", "planar", "sign-voting"};
  return names;
}

struct BenchConfig {
  int scenes = 100;
  std::vector<double> noise = {0.0};  // sigma as a fraction of mean |u_n|
  std::vector<std::string> solvers = {"positive-depth", "positive-depth+refined"};
  std::uint64_t seed = kDefaultSeed;
  SceneSpec scene;
  PipelineConfig pipeline;
  int threads = 1;

  void validate() const {
    if (scenes < 1) throw Error(Errc::InvalidArgument, "need at least one scene");
    if (noise.empty()) throw Error(Errc::InvalidArgument, "need at least one noise level");
    for (double s : noise)
      if (!(s >= 0.0)) throw Error(Errc::InvalidArgument, "noise levels must be non-negative");
    if (solvers.empty()) throw Error(Errc::InvalidArgument, "need at least one solver");
    const auto& known = bench_solver_names();
    for (const auto& s : solvers)
      if (std::find(known.begin(), known.end(), s) == known.end())
        throw Error(Errc::UnknownConstraint, "unknown solver '" + s + "'");
    scene.validate();
  }
};

struct BenchRow {
  int scene = 0;
  std::uint64_t seed = 0;
  double noise = 0.0;
  std::string solver;
  ErrorReport errors;
  std::optional<double> objective;  // positivity objective of the output motion
};

inline std::uint64_t scene_seed(std::uint64_t base, int scene) {
  return base + static_cast<std::uint64_t>(scene);
}

inline std::uint64_t noise_seed(std::uint64_t base, int scene, std::size_t level) {
  CounterRng rng(base ^ 0x6e6f697365ULL, static_cast<std::uint64_t>(scene) * 1024 + level);
  return rng.next_u64();
}

/// Runs every selected solver on one (scene, noise) pair.
inline std::vector<BenchRow> bench_scene(const BenchConfig& cfg, int scene, std::size_t level) {
  const std::uint64_t seed = scene_seed(cfg.seed, scene);
  SyntheticSample s = generate_scene(seed, cfg.scene);
  const double frac = cfg.noise[level];
  if (frac > 0.0) s = add_noise(s, frac * mean_abs_speed(s.field), noise_seed(cfg.seed, scene, level));
  const Camera& cam = s.camera;
  const int fine = cfg.pipeline.solver.grid_level_fine;
  const int coarse = cfg.pipeline.solver.grid_level_coarse;
  SolverConfig solver = cfg.pipeline.solver;
  solver.threads = cfg.threads;
  solver.keep_surface = false;

  auto wants = [&](const char* name) {
    return std::find(cfg.solvers.begin(), cfg.solvers.end(), name) != cfg.solvers.end();
  };
  std::map<std::string, RigidMotion> motion;
  std::map<std::string, double> objective;
  if (wants("positive-depth") || wants("positive-depth+refined")) {
    const MotionEstimate est = estimate_motion(s.field, cam, solver);
    motion["positive-depth"] = est.motion;
    objective["positive-depth"] = est.objective;
    if (wants("positive-depth+refined")) {
      RefineConfig rc = cfg.pipeline.refine;
      rc.solver = solver;
      motion["positive-depth+refined"] = refine_loop(s.field, est, cam, rc).motion;
    }
  }
  if (wants("epipolar"))
    motion["epipolar"] = solve_epipolar(sample_flow(s), cam, coarse, true, cfg.threads, fine).motion;
  if (wants("planar"))
    motion["planar"] =
        solve_planar_patches(s.field, PatchLayout{}, cam, coarse, cfg.threads, fine).motion;
  if (wants("sign-voting"))
    motion["sign-voting"] = solve_sign_voting(s.field, cam, coarse, 0.05, cfg.threads, fine).motion;

  std::vector<BenchRow> rows;
  for (const auto& name : cfg.solvers) {
    BenchRow r;
    r.scene = scene;
    r.seed = seed;
    r.noise = frac;
    r.solver = name;
    r.errors = motion_errors(motion.at(name), s.motion);
    r.errors.n_points = static_cast<int>(s.field.size());
    r.errors.density = density(s.field);
    if (auto it = objective.find(name); it != objective.end()) r.objective = it->second;
    rows.push_back(r);
  }
  return rows;
}

inline void write_bench_header(std::ostream& os) {
  os << "# schema_version: 1\n";
  os << "scene,seed,noise,solver,trans_aae_deg,rot_aae_deg,rot_epe_deg_per_frame,density,"
        "n_points,objective\n";
}

inline void write_bench_row(std::ostream& os, const BenchRow& r) {
  const auto old = os.precision(17);
  os << r.scene << ',' << r.seed << ',' << r.noise << ',' << r.solver << ',' << r.errors.trans_aae
     << ',' << r.errors.rot_aae << ',' << r.errors.rot_epe << ',' << r.errors.density << ','
     << r.errors.n_points << ',';
  if (r.objective) os << *r.objective;
  os << '\n';
  os.precision(old);
}

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  KahanSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

}  // namespace detail

/// Per-(noise, solver) aggregates, plus how often refinement beat the
/// unrefined estimate when both were run.
inline nlohmann::json bench_summary(const BenchConfig& cfg, const std::vector<BenchRow>& rows) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["seed"] = cfg.seed;
  j["scenes"] = cfg.scenes;
  j["rng"] = {{"algorithm", CounterRng::kAlgorithm}, {"version", CounterRng::kVersion}};
  j["groups"] = nlohmann::json::array();
  for (double noise : cfg.noise) {
    std::map<std::string, std::vector<const BenchRow*>> by;
    for (const auto& r : rows)
      if (r.noise == noise) by[r.solver].push_back(&r);
    for (const auto& name : cfg.solvers) {
      std::vector<double> t, w, a;
      for (const BenchRow* r : by[name]) {
        t.push_back(r->errors.trans_aae);
        w.push_back(r->errors.rot_epe);
        a.push_back(r->errors.rot_aae);
      }
      j["groups"].push_back({{"noise", noise},
                             {"solver", name},
                             {"n", t.size()},
                             {"trans_aae_deg_mean", detail::mean(t)},
                             {"trans_aae_deg_median", detail::median(t)},
                             {"rot_aae_deg_mean", detail::mean(a)},
                             {"rot_epe_deg_per_frame_mean", detail::mean(w)},
                             {"rot_epe_deg_per_frame_median", detail::median(w)}});
    }
    const auto& base = by["positive-depth"];
    const auto& ref = by["positive-depth+refined"];
    if (!base.empty() && base.size() == ref.size()) {
      std::size_t better = 0;
      std::vector<double> gain;
      for (std::size_t i = 0; i < base.size(); ++i) {
        const double e0 = base[i]->errors.trans_aae;
        const double e1 = ref[i]->errors.trans_aae;
        better += e1 < e0 ? 1 : 0;
        if (e0 > 0.0) gain.push_back((e0 - e1) / e0);
      }
      j["refinement"].push_back(
          {{"noise", noise},
           {"improved_fraction", static_cast<double>(better) / static_cast<double>(base.size())},
           {"mean_relative_improvement", detail::mean(gain)}});
    }
  }
  return j;
}

/// Writes the CSV (no timings, so the bytes depend only on the config) and
/// returns the rows.
inline std::vector<BenchRow> run_synth_bench(const BenchConfig& cfg, std::ostream& csv) {
  cfg.validate();
  std::vector<BenchRow> all;
  write_bench_header(csv);
  for (int scene = 0; scene < cfg.scenes; ++scene)
    for (std::size_t level = 0; level < cfg.noise.size(); ++level)
      for (auto& r : bench_scene(cfg, scene, level)) {
        write_bench_row(csv, r);
        all.push_back(std::move(r));
      }
  return all;
}

}  // namespace egomo
