#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "egomo/constraints.hpp"
#include "egomo/metrics.hpp"
#include "egomo/random.hpp"
#include "egomo/synthetic.hpp"

using namespace egomo;

namespace {

struct Field {
  Camera cam = Camera::from_fov(96, 96, 30.0);
  std::vector<FlowSample> flow;
  NormalFlowField nf;
  std::vector<double> depth;
};

// Flow and normal flow at a random 15% of pixels for a given depth function.
Field make_field(const RigidMotion& m, double speed,
                 const std::function<double(int, int)>& depth_at, std::uint64_t seed) {
  Field f;
  f.nf.width = f.cam.width();
  f.nf.height = f.cam.height();
  CounterRng rng(seed);
  for (int row = 0; row < f.cam.height(); ++row)
    for (int col = 0; col < f.cam.width(); ++col) {
      if (rng.uniform() > 0.15) continue;
      const ImagePoint p = f.cam.centered(col, row);
      const double z = depth_at(col, row);
      const FlowVector u = motion_field(p, z, m, speed, f.cam);
      f.flow.push_back({col, row, p, u});
      const double th = rng.uniform(0, 2 * kPi);
      const Vec2 n(std::cos(th), std::sin(th));
      f.nf.entries.push_back({col, row, p, n, n.dot(u), 1.0});
      f.depth.push_back(z);
    }
  return f;
}

RigidMotion sample_motion(CounterRng& rng) {
  return RigidMotion{rng.unit_vector(), rng.unit_vector() * deg2rad(rng.uniform(0, 10))};
}

double random_depth(CounterRng& rng) { return rng.uniform(1.0, 10.0); }

}  // namespace

TEST(SquaredDistance, ZeroAtModelAndEqualsPerturbation) {
  CounterRng rng(10);
  const RigidMotion m = sample_motion(rng);
  Field f = make_field(m, 1.5, [&](int, int) { return random_depth(rng); }, 11);
  EXPECT_NEAR(squared_distance_residual(f.flow, m, f.depth, f.cam, 1.5), 0.0, 1e-9);
  f.flow[3].u += FlowVector(0.3, -0.4);
  EXPECT_NEAR(squared_distance_residual(f.flow, m, f.depth, f.cam, 1.5), 0.5, 1e-9);
  f.depth[0] = 0.0;
  EXPECT_THROW(squared_distance_residual(f.flow, m, f.depth, f.cam, 1.5), Error);
}

TEST(SquaredDistance, EqualsSumOfReprojectionErrors) {
  CounterRng rng(12);
  const RigidMotion m = sample_motion(rng);
  Field f = make_field(m, 1.0, [&](int, int) { return random_depth(rng); }, 13);
  for (auto& s : f.flow) s.u += FlowVector(rng.normal(), rng.normal());
  double expect = 0.0;
  for (std::size_t i = 0; i < f.flow.size(); ++i)
    expect += (f.flow[i].u - motion_field(f.flow[i].pos, f.depth[i], m, 1.0, f.cam)).norm();
  EXPECT_NEAR(squared_distance_residual(f.flow, m, f.depth, f.cam), expect, 1e-9 * expect);
}

TEST(Epipolar, ZeroAtGroundTruthForAnyDepthMap) {
  CounterRng rng(14);
  for (int k = 0; k < 10; ++k) {
    const RigidMotion m = sample_motion(rng);
    const Field a = make_field(m, 2.0, [&](int, int) { return random_depth(rng); }, 15 + k);
    const Field b = make_field(m, 2.0, [&](int c, int) { return 1.0 + 0.05 * c; }, 15 + k);
    double scale = 0.0;
    for (const auto& s : a.flow) scale += s.u.squaredNorm();
    for (bool unbiased : {false, true}) {
      EXPECT_NEAR(epipolar_residual(a.flow, m, a.cam, unbiased), 0.0, 1e-12 * scale);
      EXPECT_NEAR(epipolar_residual(b.flow, m, b.cam, unbiased), 0.0, 1e-12 * scale);
    }
  }
}

TEST(Epipolar, InfiniteDepthGivesZeroEverywhere) {
  CounterRng rng(16);
  const RigidMotion m = sample_motion(rng);
  const Field f = make_field(m, 1.0, [](int, int) { return std::numeric_limits<double>::infinity(); }, 17);
  for (int k = 0; k < 20; ++k) {
    const RigidMotion other{rng.unit_vector(), m.w};
    EXPECT_NEAR(epipolar_residual(f.flow, other, f.cam, false), 0.0, 1e-9);
  }
}

TEST(Epipolar, TooFewMeasurements) {
  std::vector<FlowSample> flow(4);
  try {
    epipolar_residual(flow, RigidMotion{}, Camera::from_fov(8, 8, 30), true);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewMeasurements);
  }
}

TEST(Epipolar, UnbiasedIgnoresPerPointScale) {
  // Scaling the translation axis changes |A t| per point but not its direction.
  CounterRng rng(18);
  const RigidMotion m = sample_motion(rng);
  Field f = make_field(m, 1.0, [&](int, int) { return random_depth(rng); }, 19);
  for (auto& s : f.flow) s.u += FlowVector(0.1 * rng.normal(), 0.1 * rng.normal());
  const RigidMotion probe{rng.unit_vector(), Vec3(0.01, 0.0, -0.02)};
  const RigidMotion scaled{probe.t_axis * 3.7, probe.w};
  EXPECT_NEAR(epipolar_residual(f.flow, probe, f.cam, true),
              epipolar_residual(f.flow, scaled, f.cam, true), 1e-9);
}

TEST(Epipolar, NoiselessRecovery) {
  CounterRng rng(20);
  const RigidMotion m = sample_motion(rng);
  const Field f = make_field(m, 2.0, [&](int, int) { return random_depth(rng); }, 21);
  const EpipolarSolution sol = solve_epipolar(f.flow, f.cam, 0, true, 1, 4);
  const double err = angle_between(sol.motion.t_axis, m.t_axis);
  EXPECT_LE(std::min(err, kPi - err), grid_spacing(4));
  const Vec3 w = sol.motion.w;
  EXPECT_LE((w - m.w).norm(), 1e-3);
  EXPECT_FALSE(sol.degenerate_translation);
  EXPECT_EQ(sol.surface.samples.size(), sphere_grid(0).size());
}

TEST(Epipolar, PureRotationIsFlagged) {
  CounterRng rng(22);
  const RigidMotion m = sample_motion(rng);
  const Field f = make_field(m, 1.0, [](int, int) { return std::numeric_limits<double>::infinity(); }, 23);
  const EpipolarSolution sol = solve_epipolar(f.flow, f.cam, 0, true);
  EXPECT_TRUE(sol.degenerate_translation);
  for (const auto& s : sol.surface.samples) EXPECT_GE(s.residual, 0.0);
}

TEST(Planar, SinglePlaneExactRecovery) {
  const RigidMotion m{Vec3(0.3, 0.2, 0.93).normalized(), Vec3(0.004, -0.006, 0.01)};
  const double speed = 1.2;
  const Camera cam = Camera::from_fov(96, 96, 30.0);
  const double alpha = 0.05, beta = -0.03, gamma = 0.2;  // 1/Z = alpha x/f + beta y/f + gamma
  const Field f = make_field(m, speed, [&](int c, int r) {
    const ImagePoint p = cam.centered(c, r);
    return 1.0 / (alpha * p.x / cam.focal() + beta * p.y / cam.focal() + gamma);
  }, 24);
  const PlanarSolution sol = solve_planar_patches(f.nf, PatchLayout{2, 2}, f.cam, 3);
  // The exact axis need not be a lattice point, so score the fit at the truth.
  const auto pf = detail::partition(f.nf, PatchLayout{2, 2}, f.cam);
  const auto fit = detail::fit_planar(pf, m.t_axis, 200, 1e-14);
  EXPECT_LE(fit.residual, 1e-8);
  EXPECT_LE((fit.w - m.w).norm(), 1e-6);
  for (const auto& v : fit.planes)
    EXPECT_LE((v - speed * Vec3(alpha, beta, gamma)).norm(), 1e-6);
  EXPECT_LE(rad2deg(angle_between(sol.motion.t_axis, m.t_axis)), 0.5);
}

TEST(Planar, FrontoParallelPlane) {
  const RigidMotion m{Vec3(-0.2, 0.1, 1.0).normalized(), Vec3(0.0, 0.003, -0.002)};
  const Field f = make_field(m, 2.0, [](int, int) { return 4.0; }, 25);
  const auto pf = detail::partition(f.nf, PatchLayout{1, 1}, f.cam);
  const auto fit = detail::fit_planar(pf, m.t_axis, 200, 1e-14);
  ASSERT_EQ(fit.planes.size(), 1u);
  EXPECT_LE((fit.planes[0] - Vec3(0, 0, 2.0 / 4.0)).norm(), 1e-6);
}

TEST(Planar, PiecewisePlanarScene) {
  CounterRng rng(26);
  const RigidMotion m = sample_motion(rng);
  const Camera cam = Camera::from_fov(96, 96, 30.0);
  std::vector<Vec3> planes(64);
  for (auto& p : planes) p = Vec3(rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.15, 0.6));
  const Field f = make_field(m, 1.0, [&](int c, int r) {
    const Vec3 v = planes[static_cast<std::size_t>((r * 8 / 96) * 8 + c * 8 / 96)];
    const ImagePoint p = cam.centered(c, r);
    return 1.0 / (v.x() * p.x / cam.focal() + v.y() * p.y / cam.focal() + v.z());
  }, 27);
  const PlanarSolution sol = solve_planar_patches(f.nf, PatchLayout{8, 8}, f.cam, 0, 1, 4);
  const double err = rad2deg(angle_between(sol.motion.t_axis, m.t_axis));
  EXPECT_LE(std::min(err, 180.0 - err), 1.0);
}

TEST(Planar, AlternationIsMonotone) {
  CounterRng rng(28);
  const RigidMotion m = sample_motion(rng);
  Field f = make_field(m, 1.0, [&](int, int) { return random_depth(rng); }, 29);
  const auto pf = detail::partition(f.nf, PatchLayout{8, 8}, f.cam);
  for (int k = 0; k < 5; ++k) {
    const auto fit = detail::fit_planar(pf, rng.unit_vector(), 50, 1e-10, true);
    for (std::size_t i = 1; i < fit.history.size(); ++i)
      EXPECT_LE(fit.history[i], fit.history[i - 1] * (1 + 1e-12) + 1e-12);
  }
}

TEST(Planar, DropsSparsePatchesAndRejectsUnderdetermined) {
  NormalFlowField nf;
  nf.width = nf.height = 16;
  const Camera cam = Camera::from_fov(16, 16, 30);
  for (int k = 0; k < 5; ++k) nf.entries.push_back({k, 0, cam.centered(k, 0), Vec2(1, 0), 1.0, 1.0});
  try {
    solve_planar_patches(nf, PatchLayout{2, 2}, cam, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PatchUnderdetermined);
  }
  for (int k = 0; k < 2; ++k) nf.entries.push_back({k, 1, cam.centered(k, 1), Vec2(0, 1), 1.0, 1.0});
  try {
    solve_planar_patches(nf, PatchLayout{2, 2}, cam, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewMeasurements);
  }
}

TEST(Votes, GroundTruthAndFlippedAxis) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SceneSpec spec;
    spec.width = spec.height = 48;
    const SyntheticSample s = generate_scene(seed, spec);
    ASSERT_EQ(depth_positivity_votes(s.field, s.motion, s.camera), 0);
    ASSERT_EQ(robust_sign_votes(s.field, s.motion, s.camera), 0);
    // Entries whose translational component vanishes cannot flip.
    int nonzero = 0;
    for (const auto& e : s.field.entries) {
      const double d = e.speed - rotation_row(e.pos, e.n, s.camera).dot(s.motion.w);
      nonzero += d != 0.0 && translation_row(e.pos, e.n, s.camera).dot(s.motion.t_axis) != 0.0;
    }
    ASSERT_EQ(depth_positivity_votes(s.field, {-s.motion.t_axis, s.motion.w}, s.camera), nonzero);
  }
}

TEST(Votes, MatchBruteForceAndBoundRobustCount) {
  CounterRng rng(30);
  SceneSpec spec;
  spec.width = spec.height = 48;
  const SyntheticSample s = generate_scene(31, spec);
  for (int k = 0; k < 50; ++k) {
    const RigidMotion m = sample_motion(rng);
    int brute = 0, robust = 0;
    for (const auto& e : s.field.entries) {
      const double bw = rotation_row(e.pos, e.n, s.camera).dot(m.w);
      const double at = translation_row(e.pos, e.n, s.camera).dot(m.t_axis);
      brute += (e.speed - bw) * at < 0.0;
      robust += (e.speed > 0 && bw < 0 && at < 0) || (e.speed < 0 && bw > 0 && at > 0);
    }
    const int votes = depth_positivity_votes(s.field, m, s.camera);
    EXPECT_EQ(votes, brute);
    EXPECT_EQ(robust_sign_votes(s.field, m, s.camera), robust);
    EXPECT_LE(robust, votes);
    const PackedField p = PackedField::from(s.field, s.camera);
    EXPECT_EQ(depth_positivity_votes(p, m.t_axis, m.w), votes);
  }
}

TEST(Votes, RobustPatternExample) {
  const Camera cam(100.0, 50.0, 50.0, 101, 101);
  NormalFlowField nf;
  nf.width = nf.height = 101;
  // At the principal point with n = (1,0): n.A t = -100 tx, n.B w = -100 wy.
  nf.entries.push_back({50, 50, {0, 0}, Vec2(1, 0), 0.5, 1.0});
  EXPECT_EQ(robust_sign_votes(nf, RigidMotion{Vec3::UnitX(), Vec3(0, 0.01, 0)}, cam), 1);
  EXPECT_EQ(robust_sign_votes(nf, RigidMotion{-Vec3::UnitX(), Vec3(0, 0.01, 0)}, cam), 0);
}

TEST(OrthogonalRotation, RecoversRotation) {
  CounterRng rng(32);
  const RigidMotion m = sample_motion(rng);
  const Field f = make_field(m, 1.0, [&](int, int) { return random_depth(rng); }, 33);
  NormalFlowField nf = f.nf;
  // Entries whose direction is exactly orthogonal to the translational flow.
  for (std::size_t i = 0; i < f.flow.size(); ++i) {
    const Vec2 at = translation_matrix(f.flow[i].pos, f.cam) * m.t_axis;
    if (at.norm() == 0.0) continue;
    const Vec2 n = Vec2(-at.y(), at.x()).normalized();
    nf.entries.push_back({f.flow[i].col, f.flow[i].row, f.flow[i].pos, n, n.dot(f.flow[i].u), 1.0});
  }
  const OrthogonalRotation r = orthogonal_flow_rotation(nf, m.t_axis, f.cam, 1e-6);
  EXPECT_GE(r.count, static_cast<int>(f.flow.size()) - 1);
  EXPECT_LE((r.w - m.w).norm(), 1e-6);
}

TEST(OrthogonalRotation, PureRotationAnyAxis) {
  CounterRng rng(34);
  const RigidMotion m = sample_motion(rng);
  const Field f = make_field(m, 1.0, [](int, int) { return std::numeric_limits<double>::infinity(); }, 35);
  for (int k = 0; k < 5; ++k) {
    const OrthogonalRotation r = orthogonal_flow_rotation(f.nf, rng.unit_vector(), f.cam, 0.05);
    EXPECT_LE((r.w - m.w).norm(), 1e-9);
  }
}

TEST(OrthogonalRotation, CountMonotoneInTolerance) {
  CounterRng rng(36);
  const RigidMotion m = sample_motion(rng);
  const Field f = make_field(m, 1.0, [&](int, int) { return random_depth(rng); }, 37);
  int prev = std::numeric_limits<int>::max();
  for (double tol = 0.5; tol > 5e-3; tol *= 0.7) {
    int count = 0;
    try {
      count = orthogonal_flow_rotation(f.nf, m.t_axis, f.cam, tol).count;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::TooFewMeasurements);
    }
    EXPECT_LE(count, prev);
    prev = count;
  }
  EXPECT_THROW(orthogonal_flow_rotation(f.nf, m.t_axis, f.cam, 0.0), Error);
}

TEST(SignVoting, NoiselessRecoveryNearTruth) {
  SceneSpec spec;
  spec.width = spec.height = 64;
  spec.density = 0.5;
  const SyntheticSample s = generate_scene(38, spec);
  const SignVotingSolution sol = solve_sign_voting(s.field, s.camera, 0, 0.05, 1, 2);
  EXPECT_LE(sol.votes, static_cast<int>(s.field.size() / 20));
  EXPECT_EQ(depth_positivity_votes(s.field, sol.motion, s.camera), sol.votes);
}

TEST(SurfaceCsv, ArgminRowAndHeader) {
  ResidualSurface s;
  s.samples = {{Vec3::UnitZ(), 3.0, Vec3::Zero()}, {Vec3::UnitX(), 1.0, Vec3::Zero()},
               {Vec3::UnitY(), 1.0, Vec3::Zero()}};
  std::ostringstream os;
  write_surface_csv(os, s);
  const std::string out = os.str();
  EXPECT_NE(out.find("# schema_version: 1\n"), std::string::npos);
  EXPECT_NE(out.find("# argmin_row: 1\n"), std::string::npos);
  EXPECT_NE(out.find("tx,ty,tz,residual,wx,wy,wz\n"), std::string::npos);
}
