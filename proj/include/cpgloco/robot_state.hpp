#pragma once

#include "cpgloco/types.hpp"

namespace cpgloco {

inline constexpr double kContactThreshold = 1.0;  // N

/// Roll, pitch, yaw (ZYX convention) of a world-from-body rotation.
inline Vec3 rpy_from_rotation(const Mat3& r) {
  const double pitch = std::asin(std::clamp(-r(2, 0), -1.0, 1.0));
  return {std::atan2(r(2, 1), r(2, 2)), pitch, std::atan2(r(1, 0), r(0, 0))};
}

inline Eigen::Quaterniond rotation_from_rpy(const Vec3& rpy) {
  return Eigen::Quaterniond(Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) *
                            Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                            Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()));
}

struct RobotState {
  Vec3 base_pos = Vec3::Zero();                                // world, m
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();  // world-from-body
  Vec3 rpy = Vec3::Zero();                                     // rad, derived from orientation
  Vec3 v_b = Vec3::Zero();                                     // body frame, m/s
  Vec3 omega_b = Vec3::Zero();                                 // body frame, rad/s
  Vec3 e_g = Vec3(0.0, 0.0, -1.0);                             // gravity direction in body frame
  Vec12 q = Vec12::Zero();
  Vec12 q_dot = Vec12::Zero();
  Vec12 tau = Vec12::Zero();
  std::array<Vec3, kNumLegs> foot_force{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};

  // Tangential contact anchors (stick points) per foot.
  std::array<Vec3, kNumLegs> anchor{Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
  std::array<bool, kNumLegs> anchored{false, false, false, false};

  Mat3 rotation() const { return orientation.toRotationMatrix(); }

  Vec4 contacts() const {
    Vec4 c;
    for (std::size_t i = 0; i < kNumLegs; ++i) c[i] = foot_force[i].norm() > kContactThreshold ? 1.0 : 0.0;
    return c;
  }

  /// World-frame base velocity.
  Vec3 v_world() const { return orientation * v_b; }

  /// Refresh the derived attitude fields from the orientation.
  void sync_derived() {
    const Mat3 r = rotation();
    rpy = rpy_from_rotation(r);
    e_g = r.transpose() * Vec3(0.0, 0.0, -1.0);
  }

  bool finite() const {
    return base_pos.allFinite() && orientation.coeffs().allFinite() && v_b.allFinite() &&
           omega_b.allFinite() && q.allFinite() && q_dot.allFinite();
  }
};

}  // namespace cpgloco
