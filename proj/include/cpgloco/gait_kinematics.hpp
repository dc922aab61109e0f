#pragma once

// Foot trajectory generation from oscillator states and closed-form leg
// kinematics for an abduction / hip-pitch / knee leg.
//
// Hip frame: x forward, y left, z up, origin at the abduction axis.

#include <optional>

#include "cpgloco/types.hpp"

namespace cpgloco::gait {

struct TrajectoryParams {
  double step_length = 0.10;     // m, nominal step length
  double body_height = 0.30;     // m
  double max_clearance = 0.05;   // m, swing apex above nominal ground
  double max_penetration = 0.01; // m, stance depth below nominal ground

  bool valid() const {
    return step_length > 0 && body_height > 0 && max_clearance > 0 && max_penetration > 0 &&
           max_penetration < max_clearance && body_height > max_clearance;
  }
};

struct FootOffsets {
  Vec4 x_off = Vec4::Zero();
  Vec4 z_off = Vec4::Zero();
};

struct LegGeometry {
  double l_hip = 0.0838;
  double l_thigh = 0.20;
  double l_calf = 0.20;
  double side = 1.0;  // +1 left, -1 right
};

inline LegGeometry a1_leg(std::size_t leg) {
  LegGeometry g;
  g.side = side_sign(leg);
  return g;
}

struct JointAngles {
  double abd = 0.0;
  double hip = 0.0;
  double knee = 0.0;  // <= 0 for the knee-backward branch
};

struct JointLimits {
  double abd_min = -0.80, abd_max = 0.80;
  double hip_min = -1.05, hip_max = 4.19;
  double knee_min = -2.70, knee_max = 0.0;

  JointAngles clamp(const JointAngles& q) const {
    return {std::clamp(q.abd, abd_min, abd_max), std::clamp(q.hip, hip_min, hip_max),
            std::clamp(q.knee, knee_min, knee_max)};
  }
};

struct FootXZ {
  double x;
  double z;
};

/// Desired foot position in the hip frame for one leg.
///
/// x = -L_step * r * cos(theta) + x_off
/// z = -h + L_clrnc * sin(theta) + z_off   if sin(theta) > 0   (swing)
/// z = -h + L_pntr  * sin(theta) + z_off   otherwise           (stance)
inline FootXZ foot_target(double r, double theta, const TrajectoryParams& p, double x_off, double z_off) {
  const double s = std::sin(theta);
  const double x = -p.step_length * r * std::cos(theta) + x_off;
  const double lift = s > 0.0 ? p.max_clearance : p.max_penetration;
  const double z = -p.body_height + lift * s + z_off;
  return {x, z};
}

inline Vec3 leg_fk(const JointAngles& q, const LegGeometry& g) {
  const double s1 = std::sin(q.hip), c1 = std::cos(q.hip);
  const double s12 = std::sin(q.hip + q.knee), c12 = std::cos(q.hip + q.knee);
  const double px = -g.l_thigh * s1 - g.l_calf * s12;
  const double py = g.side * g.l_hip;
  const double pz = -g.l_thigh * c1 - g.l_calf * c12;
  const double ca = std::cos(q.abd), sa = std::sin(q.abd);
  return {px, ca * py - sa * pz, sa * py + ca * pz};
}

/// d(foot position)/d(abd, hip, knee), columns in joint order.
inline Mat3 leg_jacobian(const JointAngles& q, const LegGeometry& g) {
  const double s1 = std::sin(q.hip), c1 = std::cos(q.hip);
  const double s12 = std::sin(q.hip + q.knee), c12 = std::cos(q.hip + q.knee);
  const double py = g.side * g.l_hip;
  const double pz = -g.l_thigh * c1 - g.l_calf * c12;
  const double ca = std::cos(q.abd), sa = std::sin(q.abd);
  Mat3 j;
  // abduction rotates (py, pz) about x
  j(0, 0) = 0.0;
  j(1, 0) = -sa * py - ca * pz;
  j(2, 0) = ca * py - sa * pz;
  // hip pitch
  const double dx1 = -g.l_thigh * c1 - g.l_calf * c12;
  const double dz1 = g.l_thigh * s1 + g.l_calf * s12;
  j(0, 1) = dx1;
  j(1, 1) = -sa * dz1;
  j(2, 1) = ca * dz1;
  // knee
  const double dx2 = -g.l_calf * c12;
  const double dz2 = g.l_calf * s12;
  j(0, 2) = dx2;
  j(1, 2) = -sa * dz2;
  j(2, 2) = ca * dz2;
  return j;
}

/// Thrown by leg_ik when the target lies outside the workspace. Carries the
/// nearest reachable target and the angles that reach it.
class UnreachableTarget : public std::runtime_error {
 public:
  UnreachableTarget(const Vec3& requested, const Vec3& clamped, const JointAngles& q)
      : std::runtime_error("leg_ik: target outside reachable workspace"),
        requested_(requested),
        clamped_(clamped),
        angles_(q) {}

  const Vec3& requested() const { return requested_; }
  const Vec3& clamped() const { return clamped_; }
  const JointAngles& angles() const { return angles_; }

 private:
  Vec3 requested_;
  Vec3 clamped_;
  JointAngles angles_;
};

struct IkSolution {
  JointAngles q;
  bool clamped = false;
};

// Relative slack for targets that sit on the workspace boundary up to rounding.
inline constexpr double kReachSlack = 1e-12;

/// Knee-backward closed-form IK that projects unreachable targets onto the
/// workspace boundary instead of failing.
inline IkSolution leg_ik_clamped(const Vec3& p, const LegGeometry& g) {
  IkSolution out;
  const double y = p.y(), z = p.z();
  double rho2 = y * y + z * z;
  double yy = y, zz = z;
  const double lh2 = g.l_hip * g.l_hip;
  if (rho2 < lh2 * (1.0 - kReachSlack) || rho2 == 0.0) {
    // Inside the abduction cylinder: push out to the hip offset radius.
    out.clamped = true;
    const double rho = std::sqrt(rho2);
    if (rho > 0.0) {
      yy = y / rho * g.l_hip;
      zz = z / rho * g.l_hip;
    } else {
      yy = g.side * g.l_hip;
      zz = 0.0;
    }
    rho2 = lh2;
  }
  const double leg_y = g.side * g.l_hip;
  double leg_z = -std::sqrt(std::max(rho2 - lh2, 0.0));
  double x = p.x();

  const double reach_max = g.l_thigh + g.l_calf;
  const double reach_min = std::abs(g.l_thigh - g.l_calf);
  double d = std::hypot(x, leg_z);
  if (d > reach_max * (1.0 + kReachSlack)) {
    out.clamped = true;
    x *= reach_max / d;
    leg_z *= reach_max / d;
    d = reach_max;
  } else if (d < reach_min * (1.0 - kReachSlack) || d == 0.0) {
    out.clamped = true;
    const double target = std::max(reach_min, 1e-9);
    if (d > 0.0) {
      x *= target / d;
      leg_z *= target / d;
    } else {
      x = 0.0;
      leg_z = -target;
    }
    d = target;
  }

  const double l1 = g.l_thigh, l2 = g.l_calf;
  const double cos_knee = std::clamp((d * d - l1 * l1 - l2 * l2) / (2.0 * l1 * l2), -1.0, 1.0);
  const double knee = -std::acos(cos_knee);
  const double a = l1 + l2 * std::cos(knee);
  const double b = l2 * std::sin(knee);
  const double hip = std::atan2(-x, -leg_z) - std::atan2(b, a);
  const double abd = std::atan2(zz, yy) - std::atan2(leg_z, leg_y);
  out.q = {wrap_pi(abd), wrap_pi(hip), knee};
  return out;
}

/// Knee-backward closed-form IK. Throws UnreachableTarget outside the workspace.
inline JointAngles leg_ik(const Vec3& p, const LegGeometry& g) {
  if (!p.allFinite()) throw CorruptedState("leg_ik: non-finite target");
  const IkSolution sol = leg_ik_clamped(p, g);
  if (sol.clamped) throw UnreachableTarget(p, leg_fk(sol.q, g), sol.q);
  return sol.q;
}

}  // namespace cpgloco::gait
