#pragma once

// Simplified quadruped dynamics: a rigid trunk carried by four massless legs
// whose joints track PD targets. Each joint has a small reflected rotor
// inertia so joint angles are dynamic states. Feet touch the ground through
// a spring-damper normal force and a stick/slip tangential spring capped by
// Coulomb friction. Torques are updated at 1 kHz; contact and trunk
// integration run a few physics substeps inside each torque period.

#include "cpgloco/gait_kinematics.hpp"
#include "cpgloco/robot_state.hpp"
#include "cpgloco/terrain.hpp"

namespace cpgloco::sim {

struct WorldConfig {
  double mass = 12.0;                     // kg
  Vec3 inertia = Vec3(0.13, 0.36, 0.45);  // body-frame diagonal, kg m^2
  double gravity = 9.81;                  // m/s^2
  double contact_stiffness = 2.0e4;       // N/m
  double contact_damping = 200.0;         // N s/m
  double friction = 0.8;
  double tangential_stiffness = 2.0e4;  // N/m, stick spring
  double tangential_damping = 200.0;    // N s/m
  double torque_limit = 33.5;  // N m
  double kp = 55.0;            // N m / rad
  double kd = 2.0;             // N m s / rad
  double dt_inner = 0.001;     // s
  double dt_control = 0.01;    // s
  double joint_inertia = 0.015;  // kg m^2, reflected rotor inertia per joint
  int physics_substeps = 4;
  double hip_x = 0.1805;  // m, hip abduction axis offsets from the trunk centre
  double hip_y = 0.047;
  gait::LegGeometry leg{};

  int inner_steps_per_tick() const { return static_cast<int>(std::llround(dt_control / dt_inner)); }

  void validate() const {
    const bool pos = mass > 0 && (inertia.array() > 0).all() && gravity > 0 && contact_stiffness > 0 &&
                     contact_damping > 0 && friction > 0 && torque_limit > 0 && kp > 0 && kd > 0 && dt_inner > 0 &&
                     dt_control > 0 && joint_inertia > 0 && physics_substeps >= 1;
    if (!pos) throw std::invalid_argument("world config: all parameters must be positive");
    if (std::abs(dt_control - 10.0 * dt_inner) > 1e-12) throw std::invalid_argument("world config: dt_control must equal 10 dt_inner");
  }

  gait::LegGeometry leg_geometry(std::size_t leg_index) const {
    gait::LegGeometry g = leg;
    g.side = side_sign(leg_index);
    return g;
  }

  Vec3 hip_offset(std::size_t leg_index) const {
    return {is_front(leg_index) ? hip_x : -hip_x, side_sign(leg_index) * hip_y, 0.0};
  }
};

class SimulationDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline gait::JointAngles leg_joints(const Vec12& q, std::size_t leg) {
  return {q[3 * leg + 0], q[3 * leg + 1], q[3 * leg + 2]};
}

inline void set_leg_joints(Vec12& q, std::size_t leg, const gait::JointAngles& a) {
  q[3 * leg + 0] = a.abd;
  q[3 * leg + 1] = a.hip;
  q[3 * leg + 2] = a.knee;
}

/// Foot positions of all legs in the trunk frame.
inline std::array<Vec3, kNumLegs> feet_in_body(const WorldConfig& w, const Vec12& q) {
  std::array<Vec3, kNumLegs> out;
  for (std::size_t i = 0; i < kNumLegs; ++i) out[i] = w.hip_offset(i) + gait::leg_fk(leg_joints(q, i), w.leg_geometry(i));
  return out;
}

inline std::array<Vec3, kNumLegs> feet_in_world(const WorldConfig& w, const RobotState& s) {
  auto feet = feet_in_body(w, s.q);
  const Mat3 r = s.rotation();
  for (auto& f : feet) f = s.base_pos + r * f;
  return feet;
}

/// PD torque clamped to the actuator limit.
inline Vec12 pd_torque(const WorldConfig& w, const RobotState& s, const Vec12& q_target) {
  Vec12 tau = w.kp * (q_target - s.q) - w.kd * s.q_dot;
  for (Eigen::Index j = 0; j < 12; ++j) tau[j] = std::clamp(tau[j], -w.torque_limit, w.torque_limit);
  return tau;
}

struct ContactPatch {
  bool touching = false;
  Vec3 normal = Vec3::UnitZ();
  double depth = 0.0;
};

inline constexpr double kRiserProbeDepth = 0.02;  // m
inline constexpr double kRiserProbeStep = 0.0025; // m
inline constexpr double kRiserProbeMax = 0.06;    // m

/// Contact normal and depth for a foot point. Deep penetrations next to a
/// vertical face are resolved horizontally so stair risers and platform
/// edges push the foot sideways instead of launching it upwards.
inline ContactPatch probe_contact(const terrain::Terrain& t, const Vec3& foot) {
  const double pen = t.height_at(foot.x(), foot.y()) - foot.z();
  if (!(pen > 0.0)) return {};
  ContactPatch c{true, Vec3::UnitZ(), pen};
  if (pen > kRiserProbeDepth) {
    for (double d = kRiserProbeStep; d < pen && d <= kRiserProbeMax; d += kRiserProbeStep) {
      for (double dir : {-1.0, 1.0}) {
        if (t.height_at(foot.x() + dir * d, foot.y()) <= foot.z()) {
          c.normal = Vec3(dir, 0.0, 0.0);
          c.depth = d;
          return c;
        }
      }
    }
  }
  return c;
}

/// One 1 kHz step with torques held over the physics substeps.
inline RobotState inner_step(const WorldConfig& w, const RobotState& state, const Vec12& q_target, const terrain::Terrain& t) {
  if (!state.finite() || !q_target.allFinite()) throw SimulationDiverged("inner_step: non-finite state or target");
  RobotState s = state;
  s.tau = pd_torque(w, state, q_target);

  const double h = w.dt_inner / w.physics_substeps;
  const Vec3 inertia = w.inertia;
  const Vec3 gravity(0.0, 0.0, -w.gravity);

  for (int sub = 0; sub < w.physics_substeps; ++sub) {
    const Mat3 r = s.rotation();
    const Vec3 v_w = r * s.v_b;
    const Vec3 omega_w = r * s.omega_b;

    Vec3 force = w.mass * gravity;
    Vec3 torque_w = Vec3::Zero();
    Vec12 qdd;

    for (std::size_t leg = 0; leg < kNumLegs; ++leg) {
      const auto g = w.leg_geometry(leg);
      const auto qa = leg_joints(s.q, leg);
      const Vec3 qd(s.q_dot[3 * leg], s.q_dot[3 * leg + 1], s.q_dot[3 * leg + 2]);
      const Vec3 foot_b = w.hip_offset(leg) + gait::leg_fk(qa, g);
      const Mat3 jac = gait::leg_jacobian(qa, g);
      const Vec3 arm_w = r * foot_b;
      const Vec3 foot_w = s.base_pos + arm_w;
      const Vec3 foot_v = v_w + omega_w.cross(arm_w) + r * (jac * qd);

      Vec3 f = Vec3::Zero();
      const ContactPatch c = probe_contact(t, foot_w);
      if (c.touching) {
        const Vec3& n = c.normal;
        const double vn = foot_v.dot(n);
        const double fn = std::max(0.0, w.contact_stiffness * c.depth - w.contact_damping * vn);
        if (!s.anchored[leg]) {
          s.anchor[leg] = foot_w;
          s.anchored[leg] = true;
        }
        Vec3 slip = foot_w - s.anchor[leg];
        slip -= n * slip.dot(n);
        const Vec3 vt = foot_v - n * vn;
        Vec3 ft = -w.tangential_stiffness * slip - w.tangential_damping * vt;
        const double cap = w.friction * fn;
        const double ft_norm = ft.norm();
        if (ft_norm > cap) {
          ft *= (ft_norm > 0.0 ? cap / ft_norm : 0.0);
          // Sliding: drag the anchor so the spring alone carries the capped force.
          s.anchor[leg] = foot_w + ft / w.tangential_stiffness;
          s.anchor[leg] -= n * (s.anchor[leg] - foot_w).dot(n);
        }
        f = n * fn + ft;
      } else {
        s.anchored[leg] = false;
      }
      s.foot_force[leg] = f;
      force += f;
      torque_w += arm_w.cross(f);

      const Vec3 tau_ext = jac.transpose() * (r.transpose() * f);
      for (int j = 0; j < 3; ++j) qdd[3 * leg + j] = (s.tau[3 * leg + j] + tau_ext[j]) / w.joint_inertia;
    }

    // Semi-implicit Euler: velocities first, then positions with the new velocities.
    const Vec3 v_w_next = v_w + h * force / w.mass;
    const Vec3 torque_b = r.transpose() * torque_w;
    const Vec3 iw = inertia.cwiseProduct(s.omega_b);
    const Vec3 omega_b_next = s.omega_b + h * (torque_b - s.omega_b.cross(iw)).cwiseQuotient(inertia);
    s.q_dot += h * qdd;
    s.q += h * s.q_dot;
    s.base_pos += h * v_w_next;
    s.omega_b = omega_b_next;
    const double angle = omega_b_next.norm() * h;
    if (angle > 0.0) {
      s.orientation = s.orientation * Eigen::Quaterniond(Eigen::AngleAxisd(angle, omega_b_next.normalized()));
      s.orientation.normalize();
    }
    s.v_b = s.orientation.toRotationMatrix().transpose() * v_w_next;
  }

  s.sync_derived();
  if (!s.finite()) throw SimulationDiverged("inner_step: simulation diverged");
  return s;
}

/// Trunk kinetic plus potential energy.
inline double trunk_energy(const WorldConfig& w, const RobotState& s) {
  const Vec3 v = s.v_world();
  return 0.5 * w.mass * v.squaredNorm() + 0.5 * s.omega_b.dot(w.inertia.cwiseProduct(s.omega_b)) +
         w.mass * w.gravity * s.base_pos.z();
}

// ---------------------------------------------------------------------------
// Episode status

enum class Status { Running, Fell, Success, Timeout };

inline std::string_view status_name(Status s) {
  switch (s) {
    case Status::Running: return "running";
    case Status::Fell: return "fell";
    case Status::Success: return "success";
    case Status::Timeout: return "timeout";
  }
  return "running";
}

struct EpisodeStatus {
  Status status = Status::Running;
  double elapsed = 0.0;   // s
  double distance = 0.0;  // m along x from the start
  bool terminal() const { return status != Status::Running; }
};

struct TerminationLimits {
  double max_tilt = 0.8;        // rad, roll and pitch
  double min_clearance = 0.10;  // m, base height over local terrain
};

inline Status check_termination(const RobotState& s, const terrain::Terrain& t, double goal_x, double time, double budget,
                                const TerminationLimits& lim = {}) {
  const double clearance = s.base_pos.z() - t.height_at(s.base_pos.x(), s.base_pos.y());
  if (std::abs(s.rpy.x()) > lim.max_tilt || std::abs(s.rpy.y()) > lim.max_tilt || clearance < lim.min_clearance)
    return Status::Fell;
  if (s.base_pos.x() >= goal_x) return Status::Success;
  if (time > budget) return Status::Timeout;
  return Status::Running;
}

/// Standing state with the given joint angles, feet resting on the terrain.
inline RobotState standing_state(const WorldConfig& w, const terrain::Terrain& t, double x, double y, double yaw,
                                 const Vec12& q) {
  RobotState s;
  s.orientation = rotation_from_rpy(Vec3(0.0, 0.0, yaw));
  s.q = q;
  s.base_pos = Vec3(x, y, 0.0);
  const auto feet_b = feet_in_body(w, q);
  const Mat3 r = s.rotation();
  // Lift the trunk until the lowest foot just touches its local ground.
  double z = -1e9;
  for (const auto& fb : feet_b) {
    const Vec3 fw = s.base_pos + r * fb;
    z = std::max(z, t.height_at(fw.x(), fw.y()) - fw.z());
  }
  s.base_pos.z() = z;
  s.sync_derived();
  return s;
}

}  // namespace cpgloco::sim
