#include <gtest/gtest.h>

#include <cmath>

#include "egomo/random.hpp"
#include "egomo/synthetic.hpp"

using namespace egomo;

TEST(Rng, DeterministicAndIndependentStreams) {
  CounterRng a(42), b(42), c(42, 1);
  for (int k = 0; k < 100; ++k) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, UniformAndNormalMoments) {
  CounterRng rng(7);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.005);
  EXPECT_NEAR(sn / n, 0.0, 0.01);
  EXPECT_NEAR(sn2 / n, 1.0, 0.02);
  for (int k = 0; k < 1000; ++k) ASSERT_LT(rng.below(7), 7u);
  for (int k = 0; k < 100; ++k) ASSERT_NEAR(rng.unit_vector().norm(), 1.0, 1e-12);
}

TEST(Scene, SameSeedSameBytes) {
  const SceneSpec spec;
  const SyntheticSample a = generate_scene(99, spec);
  const SyntheticSample b = generate_scene(99, spec);
  EXPECT_EQ(a.motion.t_axis, b.motion.t_axis);
  EXPECT_EQ(a.motion.w, b.motion.w);
  EXPECT_EQ(a.speed, b.speed);
  EXPECT_EQ(a.depth, b.depth);
  ASSERT_EQ(a.field.size(), b.field.size());
  for (std::size_t i = 0; i < a.field.size(); ++i) {
    EXPECT_EQ(a.field.entries[i].col, b.field.entries[i].col);
    EXPECT_EQ(a.field.entries[i].speed, b.field.entries[i].speed);
    EXPECT_EQ(a.field.entries[i].n, b.field.entries[i].n);
  }
  const SyntheticSample c = generate_scene(100, spec);
  EXPECT_NE(a.motion.t_axis, c.motion.t_axis);
}

TEST(Scene, RespectsSpec) {
  SceneSpec spec;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const SyntheticSample s = generate_scene(seed, spec);
    EXPECT_EQ(s.depth.width(), 150);
    EXPECT_EQ(s.field.size(), 2250u);
    EXPECT_NEAR(s.motion.t_axis.norm(), 1.0, 1e-12);
    EXPECT_LE(s.speed, spec.max_translation);
    EXPECT_GE(s.speed, 0.1 * spec.max_translation);
    EXPECT_LE(rad2deg(s.motion.w.norm()), spec.max_rotation_deg + 1e-9);
    const auto [lo, hi] = std::minmax_element(s.depth.data().begin(), s.depth.data().end());
    EXPECT_NEAR(*lo, spec.min_depth, 1e-12);
    EXPECT_NEAR(*hi, spec.max_depth, 1e-12);
    EXPECT_NEAR(s.camera.focal(), 75.0 / std::tan(deg2rad(15.0)), 1e-9);
    std::vector<std::size_t> pix;
    for (const auto& e : s.field.entries) pix.push_back(static_cast<std::size_t>(e.row) * 150 + e.col);
    EXPECT_TRUE(std::is_sorted(pix.begin(), pix.end()));
    EXPECT_EQ(std::adjacent_find(pix.begin(), pix.end()), pix.end());
  }
}

TEST(Scene, NormalFlowIsProjectedMotionField) {
  const SyntheticSample s = generate_scene(5, SceneSpec{});
  for (std::size_t i = 0; i < s.field.size(); ++i) {
    const auto& e = s.field.entries[i];
    const FlowVector u = motion_field(e.pos, s.depth(e.col, e.row), s.motion, s.speed, s.camera);
    EXPECT_NEAR((u - s.flow[i]).norm(), 0.0, 1e-12);
    EXPECT_NEAR(e.speed, e.n.dot(u), 1e-12);
    EXPECT_NEAR(e.n.norm(), 1.0, 1e-12);
  }
}

TEST(Scene, RenderWithPrescribedMotion) {
  SceneSpec spec;
  const SyntheticSample g = generate_scene(8, spec);
  const SyntheticSample r = render_scene(8, spec, g.motion, g.speed);
  EXPECT_EQ(g.depth, r.depth);
  ASSERT_EQ(g.field.size(), r.field.size());
  for (std::size_t i = 0; i < g.field.size(); ++i)
    EXPECT_EQ(g.field.entries[i].speed, r.field.entries[i].speed);
  const RigidMotion forward{Vec3(0, 0, 2), Vec3::Zero()};
  const SyntheticSample f = render_scene(8, spec, forward, 1.0);
  EXPECT_EQ(f.motion.t_axis, Vec3::UnitZ());
  EXPECT_THROW(render_scene(8, spec, forward, 0.0), Error);
  EXPECT_THROW(render_scene(8, spec, RigidMotion{Vec3::Zero(), Vec3::Zero()}, 1.0), Error);
}

TEST(Scene, InvalidSpec) {
  SceneSpec spec;
  spec.density = 0.0;
  EXPECT_THROW(generate_scene(1, spec), Error);
  spec = SceneSpec{};
  spec.min_depth = 0.0;
  EXPECT_THROW(generate_scene(1, spec), Error);
  spec = SceneSpec{};
  spec.width = 0;
  EXPECT_THROW(generate_scene(1, spec), Error);
}

TEST(Noise, SeededIndependentOfScene) {
  const SyntheticSample s = generate_scene(3, SceneSpec{});
  const SyntheticSample a = add_noise(s, 0.2, 11);
  const SyntheticSample b = add_noise(s, 0.2, 11);
  const SyntheticSample c = add_noise(s, 0.2, 12);
  EXPECT_EQ(a.noise_sigma, 0.2);
  double sum = 0, sum2 = 0;
  for (std::size_t i = 0; i < s.field.size(); ++i) {
    EXPECT_EQ(a.field.entries[i].speed, b.field.entries[i].speed);
    const double d = a.field.entries[i].speed - s.field.entries[i].speed;
    sum += d;
    sum2 += d * d;
  }
  const double n = static_cast<double>(s.field.size());
  EXPECT_NEAR(sum / n, 0.0, 0.02);
  EXPECT_NEAR(std::sqrt(sum2 / n), 0.2, 0.02);
  EXPECT_NE(a.field.entries[0].speed, c.field.entries[0].speed);
  EXPECT_EQ(add_noise(s, 0.0, 1).field.entries[0].speed, s.field.entries[0].speed);
  EXPECT_THROW(add_noise(s, -1.0, 1), Error);
}

TEST(Blur, PreservesConstantsAndMass) {
  ImageF img(30, 20, 2.5);
  const ImageF b = detail::gaussian_blur(img, 3.0);
  for (double v : b.data()) EXPECT_NEAR(v, 2.5, 1e-12);
  const auto taps = detail::gaussian_taps(2.0);
  EXPECT_EQ(taps.size() % 2, 1u);
  EXPECT_NEAR(std::accumulate(taps.begin(), taps.end(), 0.0), 1.0, 1e-12);
}
