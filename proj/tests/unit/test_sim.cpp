#include <gtest/gtest.h>

#include "cpgloco/controller.hpp"

using namespace cpgloco;

namespace {

Vec12 nominal_joints(const sim::WorldConfig& w) {
  ControlStack st;
  st.initial_amplitude = 0.0;
  return initial_joints(w, st, cpg::init_state(Vec4::Zero(), 0.0));
}

}  // namespace

TEST(Sim, BallisticFallMatchesGravity) {
  const sim::WorldConfig w;
  const auto t = terrain::generate(terrain::TerrainSpec::flat());
  RobotState s = sim::standing_state(w, t, 0, 0, 0, nominal_joints(w));
  s.base_pos.z() += 1.0;
  const RobotState n = sim::inner_step(w, s, s.q, t);
  EXPECT_NEAR(n.v_world().z(), -w.gravity * w.dt_inner, 1e-15);
  EXPECT_NEAR(n.v_world().x(), 0.0, 1e-15);
  EXPECT_NEAR(n.omega_b.norm(), 0.0, 1e-15);
  for (const auto& f : n.foot_force) EXPECT_EQ(f.norm(), 0.0);
}

TEST(Sim, TorqueClamped) {
  const sim::WorldConfig w;
  RobotState s;
  Vec12 target = Vec12::Constant(3.0);
  target[4] = -3.0;
  const Vec12 tau = sim::pd_torque(w, s, target);
  EXPECT_EQ(tau[0], 33.5);
  EXPECT_EQ(tau[4], -33.5);
  s.q_dot.setConstant(1.0);
  const Vec12 small = sim::pd_torque(w, s, Vec12::Constant(0.01));
  EXPECT_DOUBLE_EQ(small[0], 55.0 * 0.01 - 2.0 * 1.0);
}

TEST(Sim, StandingForceBalanceAndEnergy) {
  const sim::WorldConfig w;
  const auto t = terrain::generate(terrain::TerrainSpec::flat());
  RobotState s = sim::standing_state(w, t, 0, 0, 0, nominal_joints(w));
  const Vec12 q = s.q;
  const double e0 = sim::trunk_energy(w, s);
  double emax = e0;
  for (int i = 0; i < 5000; ++i) {
    s = sim::inner_step(w, s, q, t);
    emax = std::max(emax, sim::trunk_energy(w, s));
  }
  double fz = 0.0;
  for (const auto& f : s.foot_force) fz += f.z();
  EXPECT_NEAR(fz, w.mass * w.gravity, 0.02 * w.mass * w.gravity);
  EXPECT_LE(emax, e0 + 1e-9);
  // Stick friction holds a small static pitch after the legs sag under load.
  EXPECT_LT(std::abs(s.rpy.x()) + std::abs(s.rpy.y()), 1e-2);
  EXPECT_EQ(s.contacts(), Vec4::Ones());
}

TEST(Sim, NonFiniteDiverges) {
  const sim::WorldConfig w;
  const auto t = terrain::generate(terrain::TerrainSpec::flat());
  RobotState s = sim::standing_state(w, t, 0, 0, 0, nominal_joints(w));
  Vec12 bad = s.q;
  bad[2] = NAN;
  EXPECT_THROW(sim::inner_step(w, s, bad, t), sim::SimulationDiverged);
}

TEST(Sim, WorldConfigValidation) {
  sim::WorldConfig w;
  EXPECT_NO_THROW(w.validate());
  EXPECT_EQ(w.inner_steps_per_tick(), 10);
  w.kd = 0.0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(Sim, TerminationThresholds) {
  const auto t = terrain::generate(terrain::TerrainSpec::flat());
  RobotState s;
  s.base_pos = Vec3(0, 0, 0.3);
  auto with_rpy = [&](double roll, double pitch) {
    RobotState r = s;
    r.orientation = rotation_from_rpy(Vec3(roll, pitch, 0));
    r.sync_derived();
    return sim::check_termination(r, t, 5.0, 1.0, 20.0);
  };
  EXPECT_EQ(with_rpy(0.79, 0.0), sim::Status::Running);
  EXPECT_EQ(with_rpy(0.81, 0.0), sim::Status::Fell);
  EXPECT_EQ(with_rpy(0.0, -0.81), sim::Status::Fell);
  RobotState low = s;
  low.base_pos.z() = 0.099;
  EXPECT_EQ(sim::check_termination(low, t, 5.0, 1.0, 20.0), sim::Status::Fell);
  low.base_pos.z() = 0.101;
  EXPECT_EQ(sim::check_termination(low, t, 5.0, 1.0, 20.0), sim::Status::Running);
  RobotState far = s;
  far.base_pos.x() = 5.0;
  EXPECT_EQ(sim::check_termination(far, t, 5.0, 1.0, 20.0), sim::Status::Success);
  EXPECT_EQ(sim::check_termination(s, t, 5.0, 20.01, 20.0), sim::Status::Timeout);
}

TEST(Sim, ClearanceUsesLocalTerrain) {
  const auto t = terrain::generate(terrain::TerrainSpec::platform(0.3, 1.0));
  RobotState s;
  s.base_pos = Vec3(2.0, 0.0, 0.35);
  EXPECT_EQ(sim::check_termination(s, t, 10.0, 1.0, 20.0), sim::Status::Fell);
  s.base_pos.z() = 0.45;
  EXPECT_EQ(sim::check_termination(s, t, 10.0, 1.0, 20.0), sim::Status::Running);
}

TEST(Sim, RiserContactPushesSideways) {
  const auto t = terrain::generate(terrain::TerrainSpec::stairs_up(0.31, 0.18, 3));
  // Foot just past the first riser, 5 cm below the tread top.
  const auto c = sim::probe_contact(t, Vec3(1.5 + 0.31 + 0.006, 0.0, 0.13));
  EXPECT_TRUE(c.touching);
  EXPECT_EQ(c.normal, Vec3(-1.0, 0.0, 0.0));
  const auto top = sim::probe_contact(t, Vec3(1.5 + 0.31 + 0.15, 0.0, 0.175));
  EXPECT_EQ(top.normal, Vec3::UnitZ());
  EXPECT_NEAR(top.depth, 0.005, 1e-12);
}

TEST(Sim, StandingStateRestsOnGround) {
  const sim::WorldConfig w;
  const auto t = terrain::generate(terrain::TerrainSpec::flat());
  const RobotState s = sim::standing_state(w, t, 0.2, -0.1, 0.0, nominal_joints(w));
  double lowest = 1e9;
  for (const auto& f : sim::feet_in_world(w, s)) lowest = std::min(lowest, f.z());
  EXPECT_NEAR(lowest, 0.0, 1e-12);
  EXPECT_NEAR(s.base_pos.z(), 0.30, 1e-9);
}
