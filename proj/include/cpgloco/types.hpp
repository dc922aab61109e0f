#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace cpgloco {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline constexpr std::size_t kNumLegs = 4;
inline constexpr std::size_t kNumJoints = 12;

// Leg order used everywhere: front-right, front-left, rear-right, rear-left.
enum class Leg : std::size_t { FR = 0, FL = 1, RR = 2, RL = 3 };

inline constexpr std::array<std::string_view, kNumLegs> kLegNames = {"FR", "FL", "RR", "RL"};

// +1 for left legs, -1 for right legs.
constexpr double side_sign(std::size_t leg) { return (leg == 1 || leg == 3) ? 1.0 : -1.0; }
constexpr bool is_front(std::size_t leg) { return leg < 2; }

using Vec12 = Eigen::Matrix<double, 12, 1>;

/// Raised when a state transition meets NaN/Inf.
class CorruptedState : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Wrap an angle into [0, 2π).
inline double wrap_two_pi(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

/// Wrap an angle into [-π, π).
inline double wrap_pi(double a) { return wrap_two_pi(a + kPi) - kPi; }

}  // namespace cpgloco
