#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oculorl/error.hpp"
#include "oculorl/plant.hpp"

using namespace oculorl;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double angle_between(const Vec3& a, const Vec3& b) {
  return std::atan2(norm(cross(a, b)), dot(a, b));
}

Excitations zeros() { return Excitations{}; }

}  // namespace

TEST(PassiveTorque, ZeroAtPrimaryRest) {
  const PlantParams p;
  EXPECT_EQ(norm(passive_torque(UnitQuat::identity(), {0, 0, 0}, p)), 0.0);
}

TEST(PassiveTorque, SpringLaw) {
  const PlantParams p;
  const UnitQuat q = UnitQuat::from_axis_angle({0, 1, 0}, 0.1);
  const Vec3 t = passive_torque(q, {0, 0, 0}, p);
  EXPECT_NEAR(norm(t), 0.0015, 1e-15);
  EXPECT_NEAR(t.y, -0.0015, 1e-15);
}

TEST(PassiveTorque, DampingLaw) {
  PlantParams p;
  p.c_p = 1.6e-4;
  const Vec3 t = passive_torque(UnitQuat::identity(), {1, 0, 0}, p);
  EXPECT_NEAR(t.x, -1.6e-4, 1e-18);
  EXPECT_EQ(t.y, 0.0);
  EXPECT_EQ(t.z, 0.0);
}

TEST(PlantDefaults, DampingIsCritical) {
  const PlantParams p;
  EXPECT_NEAR(p.c_p, 2.0 * std::sqrt(p.k_p * p.inertia), 1e-18);
  EXPECT_NEAR(p.inertia, 0.4 * 0.0075 * 0.012 * 0.012, 1e-20);
}

TEST(ResetPlant, PrimaryPositionAtRest) {
  const PlantModel m = default_plant_model();
  const PlantState s = reset_plant(m);
  for (Eye e : {Eye::Right, Eye::Left}) {
    const Vec3 g = gaze_direction(s.eye(e));
    EXPECT_EQ(g.x, 1.0);
    EXPECT_EQ(g.y, 0.0);
    EXPECT_EQ(g.z, 0.0);
    EXPECT_EQ(norm(s.eye(e).omega), 0.0);
    for (const MuscleState& ms : s.eye(e).muscles) EXPECT_EQ(ms.activation, 0.0);
  }
}

TEST(PlantStep, ZeroExcitationAtRestIsEquilibrium) {
  const PlantModel m = default_plant_model();
  PlantState s = reset_plant(m);
  for (int i = 0; i < 100; ++i) s = plant_step(m, s, zeros(), 0.01);
  for (Eye e : {Eye::Right, Eye::Left}) {
    EXPECT_LT(s.eye(e).q.angle(), 1e-9);
    EXPECT_LT(norm(s.eye(e).omega), 1e-9);
  }
}

TEST(PlantStep, SettlesFromTwentyDegreesWithinOneSecond) {
  const PlantModel m = default_plant_model();
  PlantState s = reset_plant(m);
  s.right.q = UnitQuat::from_axis_angle({0, 1, 0}, 20 * kDeg);
  s.left.q = UnitQuat::from_axis_angle({0, 0, 1}, -20 * kDeg);
  for (int i = 0; i < 100; ++i) s = plant_step(m, s, zeros(), 0.01);
  EXPECT_LT(s.right.q.angle(), 1 * kDeg);
  EXPECT_LT(s.left.q.angle(), 1 * kDeg);
}

TEST(PlantStep, EnergyNonIncreasingWithoutExcitation) {
  const PlantModel m = default_plant_model();
  PlantState s = reset_plant(m);
  s.right.q = UnitQuat::from_axis_angle({1, 2, -1}, 25 * kDeg);
  s.right.omega = {3.0, -2.0, 5.0};
  double e = mechanical_energy(s.right, m.params);
  for (int i = 0; i < 200; ++i) {
    s = plant_step(m, s, zeros(), 0.01);
    const double next = mechanical_energy(s.right, m.params);
    EXPECT_LE(next, e * (1.0 + 1e-12) + 1e-18) << "step " << i;
    e = next;
  }
}

TEST(PlantStep, FullLateralRectusAbductsModerately) {
  const PlantModel m = default_plant_model();
  const AnatomicalAngles a =
      single_muscle_response(m, muscle_index(Eye::Right, MuscleKind::LR), 0.2, 0.01);
  EXPECT_GT(a.abduction_deg, 5.0);
  EXPECT_LT(a.abduction_deg, 45.0);
}

TEST(PlantStep, ActionSignsOfEveryMuscle) {
  const PlantModel m = default_plant_model();
  for (Eye eye : {Eye::Right, Eye::Left}) {
    auto resp = [&](MuscleKind k) { return single_muscle_response(m, muscle_index(eye, k)); };
    EXPECT_GT(resp(MuscleKind::LR).abduction_deg, 0.0);
    EXPECT_LT(resp(MuscleKind::MR).abduction_deg, 0.0);
    EXPECT_GT(resp(MuscleKind::SR).elevation_deg, 0.0);
    EXPECT_LT(resp(MuscleKind::IR).elevation_deg, 0.0);
    const AnatomicalAngles so = resp(MuscleKind::SO);
    EXPECT_GT(so.incyclotorsion_deg, 0.0);
    EXPECT_LT(so.elevation_deg, 0.0);
    const AnatomicalAngles io = resp(MuscleKind::IO);
    EXPECT_LT(io.incyclotorsion_deg, 0.0);
    EXPECT_GT(io.elevation_deg, 0.0);
  }
}

TEST(PlantStep, EyesMirrorEachOther) {
  const PlantModel m = default_plant_model();
  for (int k = 0; k < kMusclesPerEye; ++k) {
    const AnatomicalAngles r = single_muscle_response(m, k);
    const AnatomicalAngles l = single_muscle_response(m, k + kMusclesPerEye);
    EXPECT_NEAR(r.abduction_deg, l.abduction_deg, 1e-9);
    EXPECT_NEAR(r.elevation_deg, l.elevation_deg, 1e-9);
    EXPECT_NEAR(r.incyclotorsion_deg, l.incyclotorsion_deg, 1e-9);
  }
}

TEST(PlantStep, BadSlotRejected) {
  EXPECT_THROW(single_muscle_response(default_plant_model(), 12), ValidationError);
}

TEST(PlantStep, RandomExcitationFuzzStaysFinite) {
  const PlantModel m = default_plant_model();
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlantState s = reset_plant(m);
  for (int i = 0; i < 20000; ++i) {
    Excitations x;
    for (double& v : x) v = u(rng);
    ASSERT_NO_THROW(s = plant_step(m, s, x, 0.01)) << "step " << i;
    for (Eye e : {Eye::Right, Eye::Left}) {
      ASSERT_TRUE(is_finite(s.eye(e).omega));
      ASSERT_NEAR(s.eye(e).q.norm(), 1.0, 1e-9);
      for (const MuscleState& ms : s.eye(e).muscles) {
        ASSERT_GE(ms.activation, 0.0);
        ASSERT_LE(ms.activation, 1.0);
      }
    }
  }
}

TEST(PlantStep, Deterministic) {
  const PlantModel m = default_plant_model();
  Excitations x;
  for (int i = 0; i < kMuscleCount; ++i) x[static_cast<std::size_t>(i)] = 0.07 * i;
  PlantState a = reset_plant(m);
  PlantState b = reset_plant(m);
  for (int i = 0; i < 50; ++i) {
    a = plant_step(m, a, x, 0.01);
    b = plant_step(m, b, x, 0.01);
  }
  EXPECT_EQ(a.right.q, b.right.q);
  EXPECT_EQ(a.left.omega, b.left.omega);
}

TEST(PlantStep, HalvingSubstepBarelyMovesGaze) {
  PlantModel coarse = default_plant_model();
  PlantModel fine = coarse;
  fine.params.substeps = 2 * coarse.params.substeps;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PlantState a = reset_plant(coarse);
  PlantState b = reset_plant(fine);
  for (int i = 0; i < 100; ++i) {
    Excitations x;
    for (double& v : x) v = u(rng);
    a = plant_step(coarse, a, x, 0.01);
    b = plant_step(fine, b, x, 0.01);
  }
  for (Eye e : {Eye::Right, Eye::Left}) {
    EXPECT_LT(angle_between(gaze_direction(a.eye(e)), gaze_direction(b.eye(e))), 0.1 * kDeg);
  }
}

TEST(PlantParams, Validation) {
  PlantParams p;
  p.substeps = 0;
  EXPECT_THROW(p.validate(), ValidationError);
  p = PlantParams{};
  p.inertia = -1.0;
  EXPECT_THROW(p.validate(), ValidationError);
  EXPECT_NO_THROW(default_plant_model().validate());
}
