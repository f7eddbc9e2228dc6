// egomo: motion and structure from normal flow.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "egomo/constraints.hpp"
#include "egomo/io/image.hpp"
#include "egomo/io/poses.hpp"
#include "egomo/io/sample_dir.hpp"
#include "egomo/io/sequence.hpp"
#include "egomo/io/structure_io.hpp"
#include "egomo/metrics.hpp"
#include "egomo/pipeline.hpp"
#include "egomo/positivity.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace egomo;

namespace {

// Usage problems exit with 2, inner errors with 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string intrinsics;
  double fov = 0.0;
  double focal_px = 0.0;
  int width = 0;
  int height = 0;
  int grid_level = 5;
  int grid_level_coarse = 0;
  double epsilon = 0.0;
  double density = 0.10;
  bool no_refine = false;
  std::uint64_t seed = kDefaultSeed;
  int threads = 1;
  std::string out = "out";
};

void add_intrinsics(CLI::App* cmd, Common& c) {
  cmd->add_option("--intrinsics", c.intrinsics, "intrinsics JSON {focal_px, cx, cy, width, height}");
  cmd->add_option("--fov", c.fov, "horizontal field of view in degrees");
  cmd->add_option("--focal-px", c.focal_px, "focal length in pixels (principal point at the center)");
  cmd->add_option("--width", c.width, "image width when the input does not carry it");
  cmd->add_option("--height", c.height, "image height when the input does not carry it");
}

void add_solver(CLI::App* cmd, Common& c) {
  cmd->add_option("--grid-level", c.grid_level, "finest translation grid level")
      ->check(CLI::Range(0, kMaxGridLevel));
  cmd->add_option("--grid-level-coarse", c.grid_level_coarse, "coarse grid level")
      ->check(CLI::Range(0, kMaxGridLevel));
  cmd->add_option("--epsilon", c.epsilon, "hinge smoothing width (0 = automatic)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--threads", c.threads, "worker threads for the translation search")
      ->check(CLI::PositiveNumber);
}

void add_out(CLI::App* cmd, Common& c) { cmd->add_option("--out", c.out, "output directory"); }

/// Flags override sidecars; `dims` and `sidecar` come from the input.
Camera resolve_camera(const Common& c, std::optional<std::pair<int, int>> dims,
                      const std::optional<Camera>& sidecar) {
  if (c.width > 0 && c.height > 0) dims = std::make_pair(c.width, c.height);
  if (!c.intrinsics.empty()) return io::load_intrinsics(c.intrinsics);
  if (!dims && sidecar) dims = std::make_pair(sidecar->width(), sidecar->height());
  if (c.focal_px > 0.0 || c.fov > 0.0) {
    if (!dims) throw UsageError("image size unknown: pass --width and --height");
    if (c.focal_px > 0.0)
      return Camera(c.focal_px, (dims->first - 1) / 2.0, (dims->second - 1) / 2.0, dims->first,
                    dims->second);
    return Camera::from_fov(dims->first, dims->second, c.fov);
  }
  if (sidecar) return *sidecar;
  throw UsageError("missing intrinsics: pass --fov, --focal-px or --intrinsics");
}

SolverConfig solver_config(const Common& c) {
  SolverConfig s;
  s.grid_level_fine = c.grid_level;
  s.grid_level_coarse = std::min(c.grid_level_coarse, c.grid_level);
  s.epsilon = c.epsilon;
  s.threads = c.threads;
  return s;
}

json motion_json(const RigidMotion& m) {
  return {{"t_axis", {m.t_axis.x(), m.t_axis.y(), m.t_axis.z()}},
          {"w", {m.w.x(), m.w.y(), m.w.z()}}};
}

ErrorReport field_errors(const RigidMotion& est, const RigidMotion& truth,
                         const NormalFlowField& nf) {
  ErrorReport r = motion_errors(est, truth);
  r.density = density(nf);
  r.n_points = static_cast<int>(nf.size());
  return r;
}

std::optional<Camera> sidecar_in(const fs::path& dir) {
  const fs::path p = dir / "intrinsics.json";
  if (fs::exists(p)) return io::load_intrinsics(p.string());
  return std::nullopt;
}

// Normal flow input shared by estimate / surface.
struct FieldInput {
  NormalFlowField field;
  Camera camera = Camera(1.0, 0.0, 0.0, 1, 1);
  std::optional<io::StoredMotion> truth;
  std::optional<ImageF> truth_depth;
  std::optional<std::vector<FlowSample>> flow;
  std::string source;
};

struct InputOpts {
  std::vector<std::string> frames;
  std::string normal_flow;
  std::string full_flow;
  std::string sample;
};

void add_inputs(CLI::App* cmd, InputOpts& in, bool frames) {
  if (frames) cmd->add_option("--frames", in.frames, "two consecutive frames (PNG or PGM)")->expected(2);
  cmd->add_option("--normal-flow", in.normal_flow, "normal flow CSV (x,y,nx,ny,un)");
  cmd->add_option("--flow", in.full_flow, "full flow CSV (x,y,u,v), for the epipolar constraint");
  cmd->add_option("--sample", in.sample, "synthetic sample directory");
}

FieldInput load_field(const InputOpts& in, const Common& c) {
  const int given = (!in.frames.empty()) + (!in.normal_flow.empty()) + (!in.sample.empty());
  if (given != 1) throw UsageError("pass exactly one of --frames, --normal-flow or --sample");
  FieldInput out;
  if (!in.sample.empty()) {
    const fs::path dir(in.sample);
    if (!fs::is_directory(dir)) throw Error(Errc::FileNotFound, "no sample directory " + in.sample);
    const std::string nf_path = (dir / "normal_flow.csv").string();
    out.camera = resolve_camera(c, io::normal_flow_csv_size(nf_path), sidecar_in(dir));
    out.field = io::load_normal_flow_csv(nf_path, out.camera);
    if (fs::exists(dir / "motion.json")) out.truth = io::load_motion((dir / "motion.json").string());
    if (fs::exists(dir / "depth.f32")) out.truth_depth = io::load_f32((dir / "depth.f32").string());
    if (fs::exists(dir / "flow.csv"))
      out.flow = io::load_flow_csv((dir / "flow.csv").string(), out.camera);
    out.source = in.sample;
  } else if (!in.normal_flow.empty()) {
    const fs::path p(in.normal_flow);
    out.camera = resolve_camera(c, io::normal_flow_csv_size(in.normal_flow),
                                sidecar_in(p.parent_path()));
    out.field = io::load_normal_flow_csv(in.normal_flow, out.camera);
    out.source = in.normal_flow;
  } else {
    const io::FrameSequence seq = io::load_sequence(in.frames);
    const auto dims = std::make_pair(seq.frames[0].width(), seq.frames[0].height());
    out.camera = resolve_camera(c, dims, seq.camera);
    out.field = normal_flow_from_frames(seq.frames[0], seq.frames[1], out.camera, c.density,
                                        c.threads);
    out.source = in.frames[0] + "," + in.frames[1];
  }
  if (!in.full_flow.empty()) out.flow = io::load_flow_csv(in.full_flow, out.camera);
  return out;
}

// ---------------------------------------------------------------------------

int cmd_estimate(const InputOpts& in, const Common& c) {
  const FieldInput input = load_field(in, c);
  PipelineConfig pc;
  pc.solver = solver_config(c);
  pc.refine_enabled = !c.no_refine;
  pc.refine.solver = pc.solver;

  std::optional<ImageF> truth_c;
  StructureTruth truth;
  if (input.truth && input.truth_depth && input.truth_depth->width() == input.camera.width() &&
      input.truth_depth->height() == input.camera.height()) {
    truth_c = ImageF(input.truth_depth->width(), input.truth_depth->height());
    for (std::size_t k = 0; k < truth_c->size(); ++k)
      truth_c->data()[k] = input.truth->speed / input.truth_depth->data()[k];
    truth.c = &*truth_c;
  }
  const PipelineResult r = run_pipeline(input.field, input.camera, pc, truth);

  fs::create_directories(c.out);
  const fs::path out(c.out);
  json mj = motion_json(r.motion);
  mj["schema_version"] = 1;
  mj["refined"] = pc.refine_enabled;
  io::save_json((out / "motion.json").string(), mj);
  io::save_f32((out / "structure.f32").string(), r.structure.c);
  io::save_png((out / "structure.png").string(), io::structure_preview(r.structure.c));

  json rep;
  rep["schema_version"] = 1;
  rep["input"] = input.source;
  rep["camera"] = io::intrinsics_json(input.camera);
  rep["entries"] = input.field.size();
  rep["density"] = density(input.field);
  rep["epsilon"] = c.epsilon > 0.0 ? c.epsilon : default_epsilon(input.field, input.camera);
  rep["grid_level"] = {{"coarse", pc.solver.grid_level_coarse}, {"fine", pc.solver.grid_level_fine}};
  rep["initial"] = motion_json(r.initial.motion);
  rep["initial"]["objective"] = r.initial.objective;
  rep["initial"]["negative_depth_count"] = r.initial.negative_depth_count;
  rep["final"] = motion_json(r.motion);
  if (r.report) {
    json its = json::array();
    for (const auto& it : r.report->iterations) {
      json j = motion_json(it.motion);
      j["residual"] = it.residual;
      j["change"] = std::isfinite(it.change) ? json(it.change) : json(nullptr);
      j["valid_entries"] = it.valid_entries;
      if (it.mae) j["mae"] = *it.mae;
      if (it.pobp) j["pobp_percent"] = *it.pobp;
      its.push_back(j);
    }
    rep["refinement"] = {{"iterations", its},
                         {"best", r.report->best},
                         {"converged", r.report->converged}};
  }
  if (input.truth) {
    const ErrorReport initial = field_errors(r.initial.motion, input.truth->motion, input.field);
    ErrorReport final = field_errors(r.motion, input.truth->motion, input.field);
    if (truth_c) {
      final.mae = mae(r.structure.c, *truth_c);
      final.pobp = pobp(r.structure.c, *truth_c);
    }
    rep["errors"] = {{"initial", initial.to_json()}, {"final", final.to_json()}};
  }
  io::save_json((out / "report.json").string(), rep);
  std::cout << mj.dump() << '\n';
  return 0;
}

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("bad value in ") + what + ": " + tok);
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(tok);
  return out;
}

struct BenchOpts {
  int scenes = 100;
  std::string noise = "0";
  std::string solvers = "positive-depth,positive-depth+refined";
  double scene_density = SceneSpec{}.density;
  int size = SceneSpec{}.width;
};

int cmd_synth_bench(const BenchOpts& b, const Common& c) {
  BenchConfig cfg;
  cfg.scenes = b.scenes;
  cfg.noise = parse_list(b.noise, "--noise");
  cfg.solvers = split(b.solvers);
  for (const auto& s : cfg.solvers) {
    const auto& known = bench_solver_names();
    if (std::find(known.begin(), known.end(), s) == known.end())
      throw UsageError("unknown solver '" + s + "'");
  }
  cfg.seed = c.seed;
  cfg.threads = c.threads;
  cfg.scene.density = b.scene_density;
  cfg.scene.width = cfg.scene.height = b.size;
  cfg.pipeline.solver = solver_config(c);
  cfg.pipeline.refine.solver = cfg.pipeline.solver;

  fs::create_directories(c.out);
  const fs::path out(c.out);
  std::ofstream csv(out / "bench.csv");
  if (!csv) throw Error(Errc::FileNotFound, "cannot write bench.csv in " + c.out);
  const auto rows = run_synth_bench(cfg, csv);
  csv.close();
  if (!csv) throw Error(Errc::FileNotFound, "failed writing bench.csv");
  const json summary = bench_summary(cfg, rows);
  io::save_json((out / "summary.json").string(), summary);
  std::cout << summary.dump(2) << '\n';
  return 0;
}

struct TrajectoryOpts {
  std::string sequence;
  std::string samples;
  std::string poses;
  double target_disp = 0.0;
  double disp_hint = 0.0;
};

int cmd_trajectory(const TrajectoryOpts& t, const Common& c) {
  if (t.sequence.empty() == t.samples.empty())
    throw UsageError("pass exactly one of --sequence or --samples");
  PipelineConfig pc;
  pc.solver = solver_config(c);
  pc.refine_enabled = !c.no_refine;
  pc.refine.solver = pc.solver;

  std::vector<RigidMotion> est;
  std::vector<RigidMotion> truth;
  std::vector<double> speeds;
  bool have_speeds = false;
  if (!t.sequence.empty()) {
    io::FrameSequence seq = io::load_sequence({t.sequence});
    const Camera cam = resolve_camera(
        c, std::make_pair(seq.frames[0].width(), seq.frames[0].height()), seq.camera);
    const io::FrameSequence dense =
        t.target_disp > 0.0 && t.disp_hint > 0.0 ? io::interpolate_frames(seq, t.target_disp, t.disp_hint)
                                                 : seq;
    // Sub-frame estimates between two original frames are aggregated back.
    std::vector<RigidMotion> sub;
    for (std::size_t k = 0; k + 1 < dense.size(); ++k) {
      const NormalFlowField nf =
          normal_flow_from_frames(dense.frames[k], dense.frames[k + 1], cam, c.density, c.threads);
      sub.push_back(run_pipeline(nf, cam, pc).motion);
      if (!dense.synthetic[k + 1]) {
        if (sub.size() == 1) {
          est.push_back(sub[0]);
        } else {
          const std::vector<double> unit(sub.size(), 1.0 / static_cast<double>(sub.size()));
          est.push_back(io::aggregate_subframes(sub, unit).motion);
        }
        sub.clear();
      }
    }
  } else {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(t.samples))
      if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    if (dirs.empty()) throw Error(Errc::FileNotFound, "no sample directories in " + t.samples);
    have_speeds = true;
    for (const auto& d : dirs) {
      const std::string nf_path = (d / "normal_flow.csv").string();
      const Camera cam = resolve_camera(c, io::normal_flow_csv_size(nf_path), sidecar_in(d));
      const NormalFlowField nf = io::load_normal_flow_csv(nf_path, cam);
      est.push_back(run_pipeline(nf, cam, pc).motion);
      if (fs::exists(d / "motion.json")) {
        const auto m = io::load_motion((d / "motion.json").string());
        truth.push_back(m.motion);
        speeds.push_back(m.speed);
      } else {
        have_speeds = false;
      }
    }
    if (!have_speeds) {
      truth.clear();
      speeds.clear();
    }
  }

  std::optional<io::Trajectory> gt_path;
  if (!t.poses.empty() && fs::exists(t.poses)) {
    const io::PoseGroundTruth gt = io::load_poses(t.poses);
    for (const auto& w : gt.warnings) std::cerr << "warning: " << w << '\n';
    const auto fm = io::motions_from_poses(gt);
    if (fm.size() < est.size())
      throw Error(Errc::LengthMismatch, "poses cover fewer frames than the sequence");
    truth.clear();
    speeds.clear();
    for (std::size_t k = 0; k < est.size(); ++k) {
      truth.push_back(fm[k].motion);
      speeds.push_back(fm[k].speed);
    }
    have_speeds = true;
  } else if (!have_speeds) {
    std::cerr << "warning: no poses file" << (t.poses.empty() ? "" : " at " + t.poses)
              << "; integrating with unit speed\n";
    speeds.assign(est.size(), 1.0);
  }
  if (!truth.empty()) gt_path = io::integrate_trajectory(truth, speeds);

  const io::Trajectory path = io::integrate_trajectory(est, speeds);
  fs::create_directories(c.out);
  const fs::path out(c.out);
  {
    std::ofstream os(out / "trajectory.csv");
    io::write_trajectory_csv(os, path);
  }
  std::vector<const io::Trajectory*> paths = {&path};
  std::vector<std::string> labels = {"estimated"};
  if (gt_path) {
    std::ofstream os(out / "trajectory_gt.csv");
    io::write_trajectory_csv(os, *gt_path);
    paths.push_back(&*gt_path);
    labels.push_back("ground truth");
  }
  {
    std::ofstream os(out / "trajectory.svg");
    io::write_trajectory_svg(os, paths, labels);
  }
  std::ofstream fe(out / "frames.csv");
  fe << "# schema_version: 1\nframe,tx,ty,tz,wx,wy,wz,speed,trans_aae_deg,rot_epe_deg_per_frame\n";
  fe.precision(17);
  for (std::size_t k = 0; k < est.size(); ++k) {
    const RigidMotion& m = est[k];
    fe << k << ',' << m.t_axis.x() << ',' << m.t_axis.y() << ',' << m.t_axis.z() << ','
       << m.w.x() << ',' << m.w.y() << ',' << m.w.z() << ',' << speeds[k] << ',';
    if (!truth.empty()) {
      const ErrorReport e = motion_errors(m, truth[k]);
      fe << e.trans_aae << ',' << e.rot_epe;
    } else {
      fe << ',';
    }
    fe << '\n';
  }
  json summary = {{"schema_version", 1}, {"frames", path.positions.size()}};
  const Vec3 end = path.positions.back();
  summary["endpoint"] = {end.x(), end.y(), end.z()};
  if (gt_path) {
    const Vec3 g = gt_path->positions.back();
    double length = 0.0;
    for (std::size_t k = 1; k < gt_path->positions.size(); ++k)
      length += (gt_path->positions[k] - gt_path->positions[k - 1]).norm();
    summary["endpoint_error"] = (end - g).norm();
    summary["path_length"] = length;
  }
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_surface(const InputOpts& in, const Common& c, const std::string& constraint) {
  if (constraint != "epipolar" && constraint != "planar" && constraint != "positive-depth")
    throw Error(Errc::UnknownConstraint, "unknown constraint '" + constraint +
                                             "' (epipolar, planar, positive-depth)");
  const FieldInput input = load_field(in, c);
  ResidualSurface surface;
  if (constraint == "epipolar") {
    if (!input.flow) throw UsageError("the epipolar constraint needs full flow: pass --flow");
    surface = solve_epipolar(*input.flow, input.camera, c.grid_level, true, c.threads).surface;
  } else if (constraint == "planar") {
    surface = solve_planar_patches(input.field, PatchLayout{}, input.camera, c.grid_level, c.threads)
                  .surface;
  } else {
    surface = positivity_surface(input.field, input.camera, solver_config(c), c.grid_level);
  }
  fs::create_directories(c.out);
  std::ofstream os(fs::path(c.out) / "surface.csv");
  write_surface_csv(os, surface);
  const SurfaceSample& b = surface.best();
  std::cout << json{{"constraint", constraint},
                    {"rows", surface.samples.size()},
                    {"argmin", {b.t.x(), b.t.y(), b.t.z()}},
                    {"residual", b.residual}}
                   .dump()
            << '\n';
  return 0;
}

struct EvalStructureOpts {
  std::string estimate;
  std::string truth;
  std::string mask;
  double threshold = 1.0;
  double to_depth = 0.0;
};

int cmd_eval_structure(const EvalStructureOpts& e, const Common& c) {
  ImageF est = io::load_f32(e.estimate);
  const ImageF truth = io::load_f32(e.truth);
  if (e.to_depth > 0.0)
    for (double& v : est.data()) v = v > 0.0 ? e.to_depth / v : 0.0;
  std::optional<Mask> mask;
  if (!e.mask.empty()) {
    const ImageF m = io::load_image(e.mask);
    mask = Mask(m.width(), m.height());
    for (std::size_t k = 0; k < m.size(); ++k) mask->data()[k] = m.data()[k] > 0.0 ? 1 : 0;
  } else {
    // Non-finite or non-positive truth marks missing ground truth.
    mask = Mask(truth.width(), truth.height());
    for (std::size_t k = 0; k < truth.size(); ++k)
      mask->data()[k] = std::isfinite(truth.data()[k]) && truth.data()[k] > 0.0 ? 1 : 0;
  }
  ErrorReport r;
  r.mae = mae(est, truth, &*mask);
  r.pobp = pobp(est, truth, &*mask, e.threshold);
  std::size_t n = 0;
  for (auto v : mask->data()) n += v ? 1 : 0;
  r.n_points = static_cast<int>(n);
  r.density = static_cast<double>(n) / static_cast<double>(truth.size());
  json j = r.to_json();
  j["pobp_threshold"] = e.threshold;
  j["pobp_full"] = pobp_full(est, truth, *mask, e.threshold);
  if (!c.out.empty() && c.out != "-") {
    fs::create_directories(c.out);
    io::save_json((fs::path(c.out) / "structure_errors.json").string(), j);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_eval_motion(const std::string& est_path, const std::string& truth_path, const Common& c) {
  const auto est = io::load_motion(est_path);
  const auto truth = io::load_motion(truth_path);
  const json j = motion_errors(est.motion, truth.motion).to_json();
  if (!c.out.empty() && c.out != "-") {
    fs::create_directories(c.out);
    io::save_json((fs::path(c.out) / "motion_errors.json").string(), j);
  }
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_synth(const BenchOpts& b, const Common& c, double noise) {
  SceneSpec spec;
  spec.density = b.scene_density;
  spec.width = spec.height = b.size;
  SyntheticSample s = generate_scene(c.seed, spec);
  if (noise > 0.0) s = add_noise(s, noise * mean_abs_speed(s.field), noise_seed(c.seed, 0, 0));
  io::save_sample(c.out, s);
  std::cout << io::motion_json(s.motion, s.speed).dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera motion and scene structure from normal flow"};
  app.require_subcommand(1);
  Common c;
  InputOpts in;

  auto* est = app.add_subcommand("estimate", "motion and structure of one frame pair or field");
  add_inputs(est, in, true);
  add_intrinsics(est, c);
  add_solver(est, c);
  add_out(est, c);
  est->add_option("--density-threshold", c.density,
                  "fraction of pixels kept as normal flow measurements")
      ->check(CLI::Range(1e-6, 1.0));
  est->add_flag("--no-refine", c.no_refine, "skip the structure/motion refinement");

  BenchOpts bench;
  auto* sb = app.add_subcommand("synth-bench", "seeded synthetic benchmark");
  sb->add_option("--scenes", bench.scenes, "number of scenes")->check(CLI::PositiveNumber);
  sb->add_option("--noise", bench.noise, "noise levels as fractions of mean |u_n|, comma separated");
  sb->add_option("--solvers", bench.solvers,
                 "comma separated: positive-depth, positive-depth+refined, epipolar, planar, "
                 "sign-voting");
  sb->add_option("--scene-density", bench.scene_density, "fraction of pixels with measurements")
      ->check(CLI::Range(1e-6, 1.0));
  sb->add_option("--size", bench.size, "scene width and height in pixels")->check(CLI::PositiveNumber);
  sb->add_option("--seed", c.seed, "base seed");
  add_solver(sb, c);
  add_out(sb, c);

  double synth_noise = 0.0;
  auto* sy = app.add_subcommand("synth", "write one synthetic sample directory");
  sy->add_option("--seed", c.seed, "scene seed");
  sy->add_option("--noise", synth_noise, "noise as a fraction of mean |u_n|")->check(CLI::NonNegativeNumber);
  sy->add_option("--scene-density", bench.scene_density, "fraction of pixels with measurements")
      ->check(CLI::Range(1e-6, 1.0));
  sy->add_option("--size", bench.size, "scene width and height in pixels")->check(CLI::PositiveNumber);
  add_out(sy, c);

  TrajectoryOpts traj;
  auto* tr = app.add_subcommand("trajectory", "per-frame estimation and path integration");
  tr->add_option("--sequence", traj.sequence, "directory of frames");
  tr->add_option("--samples", traj.samples, "directory of sample directories, one per frame pair");
  tr->add_option("--poses", traj.poses, "pose file, 12 values per line");
  tr->add_option("--target-disp", traj.target_disp, "interpolate frames down to this displacement (px)");
  tr->add_option("--disp-hint", traj.disp_hint, "largest displacement in the sequence (px)");
  tr->add_option("--density-threshold", c.density, "fraction of pixels kept as measurements")
      ->check(CLI::Range(1e-6, 1.0));
  tr->add_flag("--no-refine", c.no_refine, "skip the structure/motion refinement");
  add_intrinsics(tr, c);
  add_solver(tr, c);
  add_out(tr, c);

  std::string constraint = "positive-depth";
  auto* sf = app.add_subcommand("surface", "residual surface over translation axes");
  add_inputs(sf, in, true);
  add_intrinsics(sf, c);
  add_solver(sf, c);
  add_out(sf, c);
  sf->add_option("--constraint", constraint, "epipolar, planar or positive-depth");
  sf->add_option("--density-threshold", c.density, "fraction of pixels kept as measurements")
      ->check(CLI::Range(1e-6, 1.0));

  EvalStructureOpts es;
  auto* evs = app.add_subcommand("eval-structure", "MAE and PoBP of a structure raster");
  evs->add_option("--estimate", es.estimate, "estimated raster (.f32)")->required();
  evs->add_option("--truth", es.truth, "ground-truth raster (.f32)")->required();
  evs->add_option("--mask", es.mask, "mask image; nonzero pixels are evaluated");
  evs->add_option("--threshold", es.threshold, "bad-pixel threshold");
  evs->add_option("--to-depth", es.to_depth, "convert the estimate to depth = speed / c with this speed");
  evs->add_option("--out", c.out, "output directory ('-' for stdout only)");

  std::string em_est, em_truth;
  auto* evm = app.add_subcommand("eval-motion", "AAE and EPE against a motion JSON");
  evm->add_option("--estimate", em_est, "estimated motion.json")->required();
  evm->add_option("--truth", em_truth, "ground-truth motion.json")->required();
  evm->add_option("--out", c.out, "output directory ('-' for stdout only)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*est) return cmd_estimate(in, c);
    if (*sb) return cmd_synth_bench(bench, c);
    if (*sy) return cmd_synth(bench, c, synth_noise);
    if (*tr) return cmd_trajectory(traj, c);
    if (*sf) return cmd_surface(in, c, constraint);
    if (*evs) return cmd_eval_structure(es, c);
    if (*evm) return cmd_eval_motion(em_est, em_truth, c);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code() == Errc::UnknownConstraint ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
