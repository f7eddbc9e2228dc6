#include <gtest/gtest.h>

#include <cmath>

#include "egomo/metrics.hpp"

using namespace egomo;

TEST(Aae, Examples) {
  EXPECT_NEAR(aae(Vec3(1, 0, 0), Vec3(0, 1, 0)), 90.0, 1e-12);
  EXPECT_NEAR(aae(Vec3(1, 0, 0), Vec3(2, 0, 0)), 0.0, 1e-12);
  EXPECT_NEAR(aae(Vec3(1, 0, 0), Vec3(-1, 0, 0)), 180.0, 1e-12);
  EXPECT_NEAR(aae(Vec3(1, 1, 0), Vec3(1, 0, 0)), 45.0, 1e-12);
  const std::vector<Vec3> est = {Vec3(1, 0, 0), Vec3(0, 0, 1), Vec3::Zero()};
  const std::vector<Vec3> truth = {Vec3(0, 1, 0), Vec3(0, 0, 1), Vec3(1, 0, 0)};
  EXPECT_NEAR(aae(est, truth), 45.0, 1e-12);
  const AngularError d = aae_detail(est, truth);
  EXPECT_EQ(d.used, 2u);
  EXPECT_EQ(d.skipped, 1u);
  EXPECT_THROW(aae(est, std::vector<Vec3>{}), Error);
}

TEST(Aae, NearlyParallelIsStable) {
  const Vec3 a(1, 0, 0);
  const Vec3 b(1, 1e-9, 0);
  EXPECT_NEAR(aae(a, b), rad2deg(1e-9), 1e-12);
}

TEST(Epe, Examples) {
  EXPECT_DOUBLE_EQ(epe(Vec3(0, 0, 0), Vec3(3, 4, 0)), 5.0);
  const std::vector<Vec2> est = {Vec2(0, 0), Vec2(1, 1)};
  const std::vector<Vec2> truth = {Vec2(3, 4), Vec2(1, 1)};
  EXPECT_DOUBLE_EQ(epe(est, truth), 2.5);
  EXPECT_THROW(epe(est, std::vector<Vec2>{Vec2(0, 0)}), Error);
}

TEST(Mae, MaskedAndErrors) {
  ImageF est(2, 2, 1.0), truth(2, 2, 0.0);
  est(1, 1) = 5.0;
  EXPECT_DOUBLE_EQ(mae(est, truth), 2.0);
  Mask m(2, 2, 1);
  m(1, 1) = 0;
  EXPECT_DOUBLE_EQ(mae(est, truth, &m), 1.0);
  Mask none(2, 2, 0);
  try {
    mae(est, truth, &none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyMask);
  }
  EXPECT_THROW(mae(est, ImageF(3, 2)), Error);
  EXPECT_DOUBLE_EQ(mae(std::vector<double>{1, 2}, std::vector<double>{2, 4}), 1.5);
}

TEST(Pobp, ThresholdStrictAndMasks) {
  ImageF est(4, 1, 0.0), truth(4, 1, 0.0);
  est(0, 0) = 1.0;  // exactly at threshold: not bad
  est(1, 0) = 1.5;
  est(2, 0) = -2.0;
  EXPECT_DOUBLE_EQ(pobp(est, truth), 0.5);
  Mask m(4, 1, 1);
  m(2, 0) = 0;
  EXPECT_DOUBLE_EQ(pobp(est, truth, &m), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(pobp_full(est, truth, m), 0.25);
  EXPECT_DOUBLE_EQ(pobp(est, truth, nullptr, 0.5), 0.75);
  Mask none(4, 1, 0);
  EXPECT_THROW(pobp(est, truth, &none), Error);
  EXPECT_DOUBLE_EQ(pobp(std::vector<double>{0, 3}, std::vector<double>{0, 0}), 0.5);
}

TEST(Density, Fractions) {
  NormalFlowField nf;
  nf.width = 10;
  nf.height = 5;
  nf.entries.resize(5);
  EXPECT_DOUBLE_EQ(density(nf), 0.1);
  SparseStructure s;
  s.width = 10;
  s.height = 2;
  s.entries.resize(4);
  s.entries[0].valid = s.entries[3].valid = true;
  EXPECT_DOUBLE_EQ(density(s), 0.1);
  EXPECT_EQ(density(NormalFlowField{}), 0.0);
}

TEST(ErrorReport, MotionErrorsAndSerialization) {
  const RigidMotion truth{Vec3::UnitZ(), Vec3(0, 0, 0.01)};
  const RigidMotion est{Vec3::UnitX(), Vec3(0, 0, 0.02)};
  ErrorReport r = motion_errors(est, truth);
  EXPECT_NEAR(r.trans_aae, 90.0, 1e-12);
  EXPECT_NEAR(r.rot_aae, 0.0, 1e-12);
  EXPECT_NEAR(r.rot_epe, rad2deg(0.01), 1e-12);
  const auto j = r.to_json();
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_TRUE(j["mae"].is_null());
  r.mae = 0.5;
  EXPECT_EQ(r.to_json()["mae"], 0.5);
  EXPECT_EQ(ErrorReport::csv_header().rfind("schema_version,", 0), 0u);
  EXPECT_EQ(r.csv_row().rfind("1,", 0), 0u);
}
