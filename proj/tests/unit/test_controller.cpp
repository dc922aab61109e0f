#include <gtest/gtest.h>

#include <cstring>

#include "cpgloco/controller.hpp"

using namespace cpgloco;

namespace {

ControlStack stack_with(bool descending, double desc_scale = 1.0) {
  ControlStack s;
  s.spinal = policy::random_network(policy::spinal_dims({16}), 1);
  if (descending) s.descending = policy::random_network(policy::descending_dims({16}), 2, policy::Activation::Elu, desc_scale);
  return s;
}

bool same_bits(const VecX& a, const VecX& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

bool same_state(const RobotState& a, const RobotState& b) {
  return same_bits(a.base_pos, b.base_pos) && same_bits(a.v_b, b.v_b) && same_bits(a.q, b.q) && same_bits(a.q_dot, b.q_dot) &&
         same_bits(a.omega_b, b.omega_b) && a.orientation.coeffs() == b.orientation.coeffs();
}

EpisodeResult episode(const ControlStack& st, EpisodeOptions o, const terrain::TerrainSpec& spec = {}) {
  o.record = true;
  return run_episode(st, {}, terrain::generate(spec), o);
}

}  // namespace

TEST(Controller, InitialStateUsesMidpointAction) {
  const ControlStack st = stack_with(false);
  const auto c = initial_controller_state(st, 0.0);
  EXPECT_DOUBLE_EQ(c.prev_spinal_action[0], 1.25);
  EXPECT_DOUBLE_EQ(c.prev_spinal_action[4], 4 * kPi);
  EXPECT_EQ(c.oscillators.theta, cpg::trot_offsets());
}

TEST(Controller, ValidateRejectsWrongShapes) {
  ControlStack st;
  st.spinal = policy::make_network({63, 8});
  EXPECT_THROW(st.validate(), policy::DimensionError);
  st.spinal = policy::make_network({64, 8});
  st.descending = policy::make_network({64, 8});
  EXPECT_THROW(st.validate(), policy::DimensionError);
}

TEST(Controller, RowsPerSimulatedSecond) {
  EpisodeOptions o;
  o.budget_s = 2.0;
  o.terminate = false;
  const auto r = episode(stack_with(false), o);
  ASSERT_EQ(r.log.size(), 200u);
  for (std::size_t k = 0; k < r.log.size(); ++k) {
    EXPECT_EQ(r.log[k].tick, static_cast<sensors::Tick>(k));
    EXPECT_DOUBLE_EQ(r.log[k].t, 0.01 * static_cast<double>(k));
  }
}

TEST(Controller, SpinalOnlyHasZeroOffsets) {
  EpisodeOptions o;
  o.budget_s = 1.0;
  const auto r = episode(stack_with(false), o);
  for (const auto& l : r.log) {
    EXPECT_FALSE(l.descending_active);
    for (const auto& lt : l.legs) {
      EXPECT_EQ(lt.x_off, 0.0);
      EXPECT_EQ(lt.z_off, 0.0);
      EXPECT_EQ(lt.exec_x, lt.spinal_x);
      EXPECT_EQ(lt.exec_z, lt.spinal_z);
    }
  }
}

TEST(Controller, ToggleWindowZeroesOffsets) {
  EpisodeOptions o;
  o.budget_s = 15.0;
  o.toggle = ToggleSchedule{};
  o.terminate = false;
  o.phase = reward::Phase::Descending;
  const auto r = episode(stack_with(true, 1.0), o);
  ASSERT_EQ(r.log.size(), 1500u);
  bool nonzero_before = false, nonzero_after = false;
  for (const auto& l : r.log) {
    const bool off = l.tick >= 500 && l.tick < 1000;
    EXPECT_EQ(l.descending_active, !off) << l.t;
    for (const auto& lt : l.legs) {
      if (off) {
        EXPECT_EQ(lt.x_off, 0.0);
        EXPECT_EQ(lt.z_off, 0.0);
        EXPECT_NEAR(lt.exec_x, lt.spinal_x, 1e-12);
        EXPECT_NEAR(lt.exec_z, lt.spinal_z, 1e-12);
      } else if (lt.x_off != 0.0) {
        (l.tick < 500 ? nonzero_before : nonzero_after) = true;
      }
    }
  }
  EXPECT_TRUE(nonzero_before);
  EXPECT_TRUE(nonzero_after);
  EXPECT_NE(r.log[499].legs[0].x_off, 0.0);
  EXPECT_EQ(r.log[730].legs[0].x_off, 0.0);
}

TEST(Controller, ToggleOverride) {
  const ToggleSchedule s{2.0, 3.0};
  EXPECT_TRUE(s.active_at_tick(199, 0.01));
  EXPECT_FALSE(s.active_at_tick(200, 0.01));
  EXPECT_FALSE(s.active_at_tick(299, 0.01));
  EXPECT_TRUE(s.active_at_tick(300, 0.01));
}

TEST(Controller, ZeroDelayBusMatchesNoBus) {
  for (bool desc : {false, true}) {
    EpisodeOptions a;
    a.budget_s = 3.0;
    a.terminate = false;
    EpisodeOptions b = a;
    b.delays = sensors::DelayConfig{};
    const auto ra = episode(stack_with(desc), a);
    const auto rb = episode(stack_with(desc), b);
    ASSERT_EQ(ra.log.size(), rb.log.size());
    for (std::size_t k = 0; k < ra.log.size(); ++k) {
      ASSERT_TRUE(same_state(ra.log[k].state, rb.log[k].state)) << k;
      ASSERT_TRUE(same_bits(ra.log[k].spinal_action, rb.log[k].spinal_action));
    }
    EXPECT_EQ(ra.total_return, rb.total_return);
  }
}

TEST(Controller, DelayOnOtherPolicyLeavesSpinalUntouched) {
  EpisodeOptions a;
  a.budget_s = 2.0;
  a.terminate = false;
  EpisodeOptions b = a;
  b.delays = sensors::DelayConfig::all(170, sensors::AppliesTo::Descending);
  const auto ra = episode(stack_with(false), a);
  const auto rb = episode(stack_with(false), b);
  for (std::size_t k = 0; k < ra.log.size(); ++k) ASSERT_TRUE(same_state(ra.log[k].state, rb.log[k].state));
}

TEST(Controller, DelayChangesSpinalBehaviour) {
  EpisodeOptions a;
  a.budget_s = 2.0;
  a.terminate = false;
  EpisodeOptions b = a;
  b.delays = sensors::DelayConfig::all(30, sensors::AppliesTo::Spinal);
  const auto ra = episode(stack_with(false), a);
  const auto rb = episode(stack_with(false), b);
  EXPECT_FALSE(same_state(ra.log.back().state, rb.log.back().state));
}

TEST(Controller, Deterministic1000Ticks) {
  EpisodeOptions o;
  o.budget_s = 10.0;
  o.terminate = false;
  o.phase = reward::Phase::Descending;
  auto spec = terrain::TerrainSpec::uneven(0.05);
  spec.seed = 12;
  const auto a = episode(stack_with(true, 0.3), o, spec);
  const auto b = episode(stack_with(true, 0.3), o, spec);
  ASSERT_EQ(a.log.size(), 1000u);
  for (std::size_t k = 0; k < a.log.size(); ++k) {
    ASSERT_TRUE(same_state(a.log[k].state, b.log[k].state));
    ASSERT_EQ(a.log[k].reward.total, b.log[k].reward.total);
  }
}

TEST(Controller, DivergenceEndsEpisodeAsFall) {
  ControlStack st = stack_with(false);
  st.spinal.layers.back().bias[0] = NAN;
  EpisodeOptions o;
  o.budget_s = 1.0;
  const auto r = run_episode(st, {}, terrain::generate({}), o);
  EXPECT_TRUE(r.diverged);
  EXPECT_EQ(r.status.status, sim::Status::Fell);
}

TEST(Controller, MidpointTrotWalksForward) {
  ControlStack st;
  st.spinal = policy::make_network(policy::spinal_dims({8}));
  EpisodeOptions o;
  o.budget_s = 5.0;
  const auto r = run_episode(st, {}, terrain::generate({}), o);
  EXPECT_EQ(r.status.status, sim::Status::Timeout);
  EXPECT_GT(r.status.distance, 1.0);
}
