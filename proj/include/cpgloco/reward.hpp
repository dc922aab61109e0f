#pragma once

// Per-tick shaping rewards for the two training phases. Every coefficient is
// a base weight times the control period dt.

#include "cpgloco/robot_state.hpp"

namespace cpgloco::reward {

enum class Phase { Spinal = 1, Descending = 2 };

struct RewardWeights {
  double dt = 0.01;
  double lin_vel = 10.0;
  double orientation = 20.0;
  double orientation_yaw = 30.0;
  double power = 0.01;
  double distance = 800.0;
  double contact_force_spinal = 0.1;
  double contact_force_descending = 0.01;
  double stumble = 1.0;
  double action = 0.001;
  double sigma = 0.25;
  double f_max = 180.0;  // N

  double contact_force(Phase p) const {
    return (p == Phase::Spinal ? contact_force_spinal : contact_force_descending) * dt;
  }
};

/// Body-frame velocity command plus the integrated commanded heading.
struct Command {
  double vx = 0.0;
  double vy = 0.0;
  double wz = 0.0;
  double heading = 0.0;  // rad, world yaw the robot should face

  Vec3 as_vector() const { return {vx, vy, wz}; }
};

struct TermBreakdown {
  double lin_vel = 0.0;
  double orientation = 0.0;
  double orientation_yaw = 0.0;
  double power = 0.0;
  double distance = 0.0;
  double contact_force = 0.0;
  double stumble = 0.0;  // descending phase only
  double action = 0.0;   // descending phase only
  double total = 0.0;
  bool has_descending_terms = false;

  static constexpr std::array<std::string_view, 9> kColumns = {
      "r_lin_vel", "r_orientation", "r_orientation_yaw", "r_power", "r_distance",
      "r_contact_force", "r_stumble", "r_action", "r_total"};

  std::array<double, 9> values() const {
    return {lin_vel, orientation, orientation_yaw, power, distance, contact_force, stumble, action, total};
  }
};

/// exp(-||x||^2 / sigma)
inline double squared_exponential(double norm_sq, double sigma) { return std::exp(-norm_sq / sigma); }

inline bool stumbling(const Vec3& f) { return std::hypot(f.x(), f.y()) > 5.0 * std::abs(f.z()); }

inline TermBreakdown compute(const RobotState& prev, const RobotState& cur, const Command& cmd, const VecX& a_desc,
                             Phase phase, const RewardWeights& w = {}) {
  const double dt = w.dt;
  TermBreakdown b;

  const double ex = cmd.vx - cur.v_b.x();
  const double ey = cmd.vy - cur.v_b.y();
  b.lin_vel = w.lin_vel * dt * squared_exponential(ex * ex + ey * ey, w.sigma);

  const double roll = cur.rpy.x(), pitch = cur.rpy.y();
  b.orientation = -w.orientation * dt * (pitch * pitch + roll * roll);
  const double yaw_err = wrap_pi(cur.rpy.z() - cmd.heading);
  b.orientation_yaw = -w.orientation_yaw * dt * yaw_err * yaw_err;

  b.power = -w.power * dt * (cur.tau.array() * cur.q_dot.array()).abs().sum();

  // Displacement along the commanded direction, clipped to [0, |v_cmd| dt].
  const double speed = std::hypot(cmd.vx, cmd.vy);
  if (speed > 0.0) {
    const double c = std::cos(cmd.heading), s = std::sin(cmd.heading);
    const Vec3 dir_w((c * cmd.vx - s * cmd.vy) / speed, (s * cmd.vx + c * cmd.vy) / speed, 0.0);
    const double along = (cur.base_pos - prev.base_pos).dot(dir_w);
    b.distance = w.distance * dt * std::clamp(along, 0.0, speed * dt);
  }

  double excess = 0.0;
  for (const auto& f : cur.foot_force) excess += std::max(f.norm() - w.f_max, 0.0);
  b.contact_force = -w.contact_force(phase) * excess;

  if (phase == Phase::Descending) {
    b.has_descending_terms = true;
    bool any = false;
    for (const auto& f : cur.foot_force) any = any || stumbling(f);
    b.stumble = any ? -w.stumble * dt : 0.0;
    b.action = a_desc.size() > 0 ? -w.action * dt * a_desc.squaredNorm() : 0.0;
  }

  b.total = b.lin_vel + b.orientation + b.orientation_yaw + b.power + b.distance + b.contact_force + b.stumble + b.action;
  return b;
}

}  // namespace cpgloco::reward
