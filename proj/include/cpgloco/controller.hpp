#pragma once

// The hierarchical control pipeline and the episode runner.
//
// Per 10 ms tick:
//   1. read (possibly delayed) sensors
//   2. spinal observation -> spinal network -> bounded (mu, nu)
//   3. oscillator step
//   4. descending observation (with height map) -> descending network -> bounded offsets
//   5. foot targets per leg
//   6. leg IK -> joint targets
//   7. ten 1 kHz physics steps

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "cpgloco/cpg.hpp"
#include "cpgloco/gait_kinematics.hpp"
#include "cpgloco/policy.hpp"
#include "cpgloco/reward.hpp"
#include "cpgloco/sensor_bus.hpp"
#include "cpgloco/sim.hpp"
#include "cpgloco/terrain.hpp"

namespace cpgloco {

struct ControlStack {
  policy::PolicyWeights spinal;
  std::optional<policy::PolicyWeights> descending;
  policy::ActionBounds spinal_bounds = policy::spinal_bounds();
  policy::ActionBounds descending_bounds = policy::descending_bounds();
  policy::ObservationScales obs_scales{};
  gait::TrajectoryParams trajectory{};
  gait::JointLimits joint_limits{};
  double alpha = 50.0;
  Vec4 phase_offsets = cpg::trot_offsets();
  double initial_amplitude = 1.0;

  void validate() const {
    spinal.validate();
    if (spinal.in_dim() != policy::kSpinalObsDim || spinal.out_dim() != policy::kSpinalActionDim)
      throw policy::DimensionError("spinal policy must map 64 -> 8");
    if (descending) {
      descending->validate();
      if (descending->in_dim() != policy::kDescendingObsDim || descending->out_dim() != policy::kDescendingActionDim)
        throw policy::DimensionError("descending policy must map 251 -> 8");
    }
    if (!spinal_bounds.valid() || !descending_bounds.valid()) throw std::invalid_argument("action bounds must satisfy low < high");
    if (!trajectory.valid()) throw std::invalid_argument("invalid trajectory parameters");
    if (!(alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
  }
};

struct ControllerState {
  cpg::OscillatorState oscillators;
  VecX prev_spinal_action;
  sensors::Tick tick = 0;
  double heading_cmd = 0.0;
};

inline ControllerState initial_controller_state(const ControlStack& stack, double initial_yaw) {
  ControllerState c;
  c.oscillators = cpg::init_state(stack.phase_offsets, stack.initial_amplitude);
  c.prev_spinal_action = 0.5 * (stack.spinal_bounds.low + stack.spinal_bounds.high);
  c.heading_cmd = initial_yaw;
  return c;
}

struct LegTrace {
  double spinal_x = 0.0, spinal_z = 0.0;
  double x_off = 0.0, z_off = 0.0;
  double exec_x = 0.0, exec_z = 0.0;
  bool contact = false;
};

struct TickLog {
  sensors::Tick tick = 0;
  double t = 0.0;  // s, start of the tick
  RobotState state;  // after the tick's physics
  std::array<LegTrace, kNumLegs> legs{};
  VecX spinal_action;
  VecX descending_action;  // zero-length when no descending policy ran
  bool descending_active = false;
  int ik_clamped = 0;
  reward::TermBreakdown reward{};
};

/// Joint targets for a set of hip-frame foot targets.
inline Vec12 joint_targets(const sim::WorldConfig& world, const ControlStack& stack,
                           const std::array<gait::FootXZ, kNumLegs>& feet, int* clamped = nullptr) {
  Vec12 q;
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) {
    const auto g = world.leg_geometry(leg);
    const Vec3 p(feet[leg].x, g.side * g.l_hip, feet[leg].z);
    const auto sol = gait::leg_ik_clamped(p, g);
    if (sol.clamped && clamped) ++*clamped;
    sim::set_leg_joints(q, leg, stack.joint_limits.clamp(sol.q));
  }
  return q;
}

/// Initial joint configuration matching the oscillators' first foot targets.
inline Vec12 initial_joints(const sim::WorldConfig& world, const ControlStack& stack, const cpg::OscillatorState& osc) {
  std::array<gait::FootXZ, kNumLegs> feet;
  for (std::size_t leg = 0; leg < kNumLegs; ++leg)
    feet[leg] = gait::foot_target(osc.r[leg], osc.theta[leg], stack.trajectory, 0.0, 0.0);
  return joint_targets(world, stack, feet);
}

/// One 10 ms control tick. `bus` may be null, which reads true sensors.
inline TickLog control_tick(const ControlStack& stack, ControllerState& ctrl, const sim::WorldConfig& world, RobotState& robot,
                            const terrain::Terrain& terrain, const reward::Command& cmd, sensors::SensorBus* bus,
                            bool descending_active) {
  TickLog log;
  log.tick = ctrl.tick;
  log.t = static_cast<double>(ctrl.tick) * world.dt_control;

  // 1. sensors
  const policy::ImuReading imu = policy::read_imu(robot);
  const policy::JointReading joints = policy::read_joints(robot);
  sensors::PolicyView spinal_view{imu, joints};
  if (bus) spinal_view = bus->spinal(imu, joints, ctrl.tick);

  // 2. spinal policy
  const Vec3 command = cmd.as_vector();
  const VecX spinal_obs =
      policy::build_spinal_obs(spinal_view.imu, spinal_view.joints, ctrl.oscillators, ctrl.prev_spinal_action, command, stack.obs_scales);
  const VecX spinal_action = policy::scale_action(policy::forward(stack.spinal, spinal_obs), stack.spinal_bounds);

  // 4a. descending observation uses the same pre-step oscillator state
  gait::FootOffsets offsets;
  if (stack.descending) {
    sensors::PolicyView desc_view{imu, joints};
    if (bus) desc_view = bus->descending(imu, joints, ctrl.tick);
    VecX hmap = terrain::sample_heightmap(terrain, robot.base_pos, robot.rpy.z());
    if (bus) hmap = bus->vision(hmap, ctrl.tick);
    if (descending_active) {
      const VecX desc_spinal = policy::build_spinal_obs(desc_view.imu, desc_view.joints, ctrl.oscillators,
                                                        ctrl.prev_spinal_action, command, stack.obs_scales);
      const VecX desc_obs = policy::build_desc_obs(desc_spinal, hmap);
      log.descending_action = policy::scale_action(policy::forward(*stack.descending, desc_obs), stack.descending_bounds);
      offsets.x_off = log.descending_action.head<4>();
      offsets.z_off = log.descending_action.segment<4>(4);
      log.descending_active = true;
    }
  }
  if (log.descending_action.size() == 0) log.descending_action = VecX::Zero(policy::kDescendingActionDim);

  // 3. oscillators
  ctrl.oscillators = cpg::step(ctrl.oscillators, policy::to_intrinsics(spinal_action, stack.alpha), world.dt_control);
  ctrl.prev_spinal_action = spinal_action;
  log.spinal_action = spinal_action;

  // 5. foot targets
  std::array<gait::FootXZ, kNumLegs> exec;
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) {
    const double r = ctrl.oscillators.r[leg], th = ctrl.oscillators.theta[leg];
    const auto spinal = gait::foot_target(r, th, stack.trajectory, 0.0, 0.0);
    exec[leg] = gait::foot_target(r, th, stack.trajectory, offsets.x_off[leg], offsets.z_off[leg]);
    auto& lt = log.legs[leg];
    lt.spinal_x = spinal.x;
    lt.spinal_z = spinal.z;
    lt.x_off = offsets.x_off[leg];
    lt.z_off = offsets.z_off[leg];
    lt.exec_x = exec[leg].x;
    lt.exec_z = exec[leg].z;
  }

  // 6. IK
  const Vec12 q_target = joint_targets(world, stack, exec, &log.ik_clamped);

  // 7. physics
  const int n_inner = world.inner_steps_per_tick();
  for (int i = 0; i < n_inner; ++i) robot = sim::inner_step(world, robot, q_target, terrain);

  const Vec4 contacts = robot.contacts();
  for (std::size_t leg = 0; leg < kNumLegs; ++leg) log.legs[leg].contact = contacts[leg] > 0.5;
  log.state = robot;

  ctrl.heading_cmd += cmd.wz * world.dt_control;
  ++ctrl.tick;
  return log;
}

// ---------------------------------------------------------------------------
// Episodes

/// Descending policy is off for ticks in [off_s, on_s).
struct ToggleSchedule {
  double off_s = 5.0;
  double on_s = 10.0;

  bool active_at_tick(sensors::Tick tick, double dt) const {
    const auto off = static_cast<sensors::Tick>(std::llround(off_s / dt));
    const auto on = static_cast<sensors::Tick>(std::llround(on_s / dt));
    return tick < off || tick >= on;
  }
};

struct EpisodeOptions {
  double vx = 0.9, vy = 0.0, wz = 0.0;  // command
  double budget_s = 20.0;
  std::optional<sensors::DelayConfig> delays;
  double start_x = 0.0;
  double start_y = 0.0;
  std::optional<ToggleSchedule> toggle;
  bool terminate = true;  // stop at the first fall / success
  reward::Phase phase = reward::Phase::Spinal;
  reward::RewardWeights reward_weights{};
  sim::TerminationLimits limits{};
  bool record = false;
};

struct EpisodeResult {
  sim::EpisodeStatus status;
  double total_return = 0.0;
  double mean_velocity_error = 0.0;  // m/s
  double mean_action_sq = 0.0;       // mean ||a_desc||^2 over ticks
  int ik_clamped = 0;
  bool diverged = false;
  std::vector<TickLog> log;
};

inline EpisodeResult run_episode(const ControlStack& stack, const sim::WorldConfig& world, const terrain::Terrain& terrain,
                                 const EpisodeOptions& opt) {
  EpisodeResult res;
  ControllerState ctrl = initial_controller_state(stack, 0.0);
  RobotState robot = sim::standing_state(world, terrain, opt.start_x, opt.start_y, 0.0,
                                         initial_joints(world, stack, ctrl.oscillators));
  std::unique_ptr<sensors::SensorBus> bus;
  if (opt.delays) bus = std::make_unique<sensors::SensorBus>(*opt.delays, 1.0 / world.dt_control);

  const auto max_ticks = static_cast<sensors::Tick>(std::llround(opt.budget_s / world.dt_control));
  const double goal = terrain.spec().goal_x();
  const double x_start = robot.base_pos.x();
  double vel_err_sum = 0.0, act_sum = 0.0;
  sensors::Tick done = 0;

  for (sensors::Tick k = 0; k < max_ticks; ++k) {
    const bool desc_on = opt.toggle ? opt.toggle->active_at_tick(k, world.dt_control) : true;
    const RobotState prev = robot;
    reward::Command cmd{opt.vx, opt.vy, opt.wz, ctrl.heading_cmd};
    TickLog log;
    try {
      log = control_tick(stack, ctrl, world, robot, terrain, cmd, bus.get(), desc_on);
    } catch (const sim::SimulationDiverged&) {
      res.diverged = true;
      res.status.status = sim::Status::Fell;
      break;
    } catch (const CorruptedState&) {
      res.diverged = true;
      res.status.status = sim::Status::Fell;
      break;
    }
    log.reward = reward::compute(prev, robot, cmd, log.descending_action, opt.phase, opt.reward_weights);
    res.total_return += log.reward.total;
    res.ik_clamped += log.ik_clamped;
    vel_err_sum += std::hypot(opt.vx - robot.v_b.x(), opt.vy - robot.v_b.y());
    act_sum += log.descending_action.squaredNorm();
    ++done;
    if (opt.record) res.log.push_back(log);

    const double t_end = static_cast<double>(k + 1) * world.dt_control;
    const sim::Status st = sim::check_termination(robot, terrain, goal, t_end, opt.budget_s, opt.limits);
    if (st == sim::Status::Fell || st == sim::Status::Success) {
      if (res.status.status == sim::Status::Running) res.status.status = st;
      if (opt.terminate) break;
    }
  }
  if (res.status.status == sim::Status::Running) res.status.status = sim::Status::Timeout;
  res.status.elapsed = static_cast<double>(done) * world.dt_control;
  res.status.distance = robot.base_pos.x() - x_start;
  if (done > 0) {
    res.mean_velocity_error = vel_err_sum / static_cast<double>(done);
    res.mean_action_sq = act_sum / static_cast<double>(done);
  }
  return res;
}

}  // namespace cpgloco
