#pragma once

// Sensory delay injection between the simulator and the policies. Each
// sensor group (IMU, joint states, vision) gets its own fixed-latency line.

#include <cstdint>
#include <optional>
#include <vector>

#include "cpgloco/policy.hpp"

namespace cpgloco::sensors {

using Tick = std::int64_t;

inline Tick ms_to_ticks(double ms, double rate_hz) {
  if (!(ms >= 0.0) || !std::isfinite(ms)) throw std::invalid_argument("ms_to_ticks: delay must be >= 0");
  return static_cast<Tick>(std::llround(ms * rate_hz / 1000.0));
}

class NonMonotoneTick : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Fixed-latency ring buffer. push_read(s, t) stores s and returns the
/// sample pushed at tick t - delay, or the oldest stored sample while the
/// buffer is still filling.
template <typename Sample>
class DelayLine {
 public:
  explicit DelayLine(Tick delay = 0) : delay_(delay), slots_(static_cast<std::size_t>(delay) + 1) {
    if (delay < 0) throw std::invalid_argument("DelayLine: negative delay");
  }

  Tick delay() const { return delay_; }
  std::size_t capacity() const { return slots_.size(); }

  const Sample& push_read(const Sample& sample, Tick now) {
    if (last_ && now <= *last_) throw NonMonotoneTick("DelayLine: tick " + std::to_string(now) + " after " + std::to_string(*last_));
    if (!first_) first_ = now;
    last_ = now;
    const std::size_t cap = slots_.size();
    slots_[static_cast<std::size_t>(now % static_cast<Tick>(cap))] = Slot{now, sample};
    ++count_;

    const Tick want = now - delay_;
    if (want <= *first_) return oldest();
    const Slot& s = slots_[static_cast<std::size_t>(want % static_cast<Tick>(cap))];
    // Gaps in the tick sequence fall back to the newest sample not newer than want.
    if (s.tick == want) return s.value;
    return newest_not_after(want);
  }

  void reset() {
    for (auto& s : slots_) s = Slot{};
    first_.reset();
    last_.reset();
    count_ = 0;
  }

 private:
  struct Slot {
    Tick tick = -1;
    Sample value{};
  };

  const Sample& oldest() const {
    const Slot* best = nullptr;
    for (const auto& s : slots_)
      if (s.tick >= 0 && (!best || s.tick < best->tick)) best = &s;
    return best->value;
  }

  const Sample& newest_not_after(Tick want) const {
    const Slot* best = nullptr;
    for (const auto& s : slots_)
      if (s.tick >= 0 && s.tick <= want && (!best || s.tick > best->tick)) best = &s;
    return best ? best->value : oldest();
  }

  Tick delay_;
  std::vector<Slot> slots_;
  std::optional<Tick> first_;
  std::optional<Tick> last_;
  std::size_t count_ = 0;
};

enum class AppliesTo { Spinal, Descending, Both };

inline std::string_view applies_to_name(AppliesTo a) {
  switch (a) {
    case AppliesTo::Spinal: return "spinal";
    case AppliesTo::Descending: return "descending";
    case AppliesTo::Both: return "both";
  }
  return "both";
}

inline std::optional<AppliesTo> parse_applies_to(std::string_view s) {
  if (s == "spinal") return AppliesTo::Spinal;
  if (s == "descending") return AppliesTo::Descending;
  if (s == "both") return AppliesTo::Both;
  return std::nullopt;
}

struct DelayConfig {
  double imu_ms = 0.0;
  double joints_ms = 0.0;  // joint positions, velocities and contact booleans
  double vision_ms = 0.0;  // height map, descending policy only
  AppliesTo applies_to = AppliesTo::Both;

  bool all_zero() const { return imu_ms == 0.0 && joints_ms == 0.0 && vision_ms == 0.0; }

  void validate() const {
    if (!(imu_ms >= 0.0) || !(joints_ms >= 0.0) || !(vision_ms >= 0.0))
      throw std::invalid_argument("delay config: delays must be >= 0 ms");
    if (vision_ms > 0.0 && applies_to == AppliesTo::Spinal)
      throw std::invalid_argument("delay config: vision delay applies only to the descending policy");
  }

  /// Same delay on every group.
  static DelayConfig all(double ms, AppliesTo target = AppliesTo::Both) {
    return {ms, ms, target == AppliesTo::Spinal ? 0.0 : ms, target};
  }
};

/// What one policy sees after its delay lines.
struct PolicyView {
  policy::ImuReading imu;
  policy::JointReading joints;
};

/// Delay lines for both policies. The spinal and descending policies read
/// the same true sensors through independent lines so a delay can be applied
/// to one while the other stays undelayed.
class SensorBus {
 public:
  explicit SensorBus(const DelayConfig& cfg = {}, double rate_hz = 100.0) : cfg_(cfg) {
    cfg.validate();
    const bool sp = cfg.applies_to != AppliesTo::Descending;
    const bool de = cfg.applies_to != AppliesTo::Spinal;
    spinal_imu_ = DelayLine<policy::ImuReading>(sp ? ms_to_ticks(cfg.imu_ms, rate_hz) : 0);
    spinal_joints_ = DelayLine<policy::JointReading>(sp ? ms_to_ticks(cfg.joints_ms, rate_hz) : 0);
    desc_imu_ = DelayLine<policy::ImuReading>(de ? ms_to_ticks(cfg.imu_ms, rate_hz) : 0);
    desc_joints_ = DelayLine<policy::JointReading>(de ? ms_to_ticks(cfg.joints_ms, rate_hz) : 0);
    vision_ = DelayLine<VecX>(de ? ms_to_ticks(cfg.vision_ms, rate_hz) : 0);
  }

  const DelayConfig& config() const { return cfg_; }

  PolicyView spinal(const policy::ImuReading& imu, const policy::JointReading& joints, Tick now) {
    return {spinal_imu_.push_read(imu, now), spinal_joints_.push_read(joints, now)};
  }

  PolicyView descending(const policy::ImuReading& imu, const policy::JointReading& joints, Tick now) {
    return {desc_imu_.push_read(imu, now), desc_joints_.push_read(joints, now)};
  }

  const VecX& vision(const VecX& height_map, Tick now) { return vision_.push_read(height_map, now); }

  Tick spinal_imu_delay() const { return spinal_imu_.delay(); }
  Tick spinal_joint_delay() const { return spinal_joints_.delay(); }
  Tick descending_imu_delay() const { return desc_imu_.delay(); }
  Tick descending_joint_delay() const { return desc_joints_.delay(); }
  Tick vision_delay() const { return vision_.delay(); }

 private:
  DelayConfig cfg_;
  DelayLine<policy::ImuReading> spinal_imu_;
  DelayLine<policy::JointReading> spinal_joints_;
  DelayLine<policy::ImuReading> desc_imu_;
  DelayLine<policy::JointReading> desc_joints_;
  DelayLine<VecX> vision_;
};

}  // namespace cpgloco::sensors
