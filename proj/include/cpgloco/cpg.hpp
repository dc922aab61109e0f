#pragma once

// Four amplitude-controlled phase oscillators, one per leg.
//
//   r''     = alpha * (alpha / 4 * (mu - r) - r')
//   theta'  = nu
//
// The amplitude equation is critically damped; mu and nu come from the
// spinal policy every control tick. There is no oscillator-to-oscillator
// coupling: inter-leg phase relations are produced by the policy alone.

#include "cpgloco/types.hpp"

namespace cpgloco::cpg {

struct OscillatorState {
  Vec4 r = Vec4::Zero();
  Vec4 r_dot = Vec4::Zero();
  Vec4 theta = Vec4::Zero();
  Vec4 theta_dot = Vec4::Zero();

  bool operator==(const OscillatorState&) const = default;
};

struct CpgIntrinsics {
  Vec4 mu = Vec4::Ones();
  Vec4 nu = Vec4::Zero();  // rad/s
  double alpha = 50.0;     // 1/s
};

// Amplitude substeps per call. Semi-implicit Euler is first order; 2000
// substeps of a 10 ms tick keep the trajectory within 1e-4 of the exact
// critically damped response.
inline constexpr int kSubsteps = 2000;

/// Trot pattern (FR, FL, RR, RL): diagonal pairs in phase.
inline Vec4 trot_offsets() { return Vec4(0.0, kPi, kPi, 0.0); }

inline OscillatorState init_state(const Vec4& phase_offsets, double mu0) {
  if (!phase_offsets.allFinite() || !std::isfinite(mu0)) {
    throw CorruptedState("cpg::init_state: non-finite phase offsets or amplitude");
  }
  OscillatorState s;
  for (int i = 0; i < 4; ++i) s.theta[i] = wrap_two_pi(phase_offsets[i]);
  s.r.setConstant(std::max(mu0, 0.0));
  return s;
}

/// Advance the network by dt seconds.
///
/// The amplitude uses semi-implicit Euler over `substeps` substeps. The phase
/// equation is linear in time so it is advanced once by nu*dt, which keeps
/// theta exact up to the final wrap.
inline OscillatorState step(const OscillatorState& state, const CpgIntrinsics& intr, double dt, int substeps = kSubsteps) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw CorruptedState("cpg::step: dt must be positive and finite");
  if (substeps < 1) throw std::invalid_argument("cpg::step: substeps must be >= 1");
  if (!state.r.allFinite() || !state.r_dot.allFinite() || !state.theta.allFinite() ||
      !intr.mu.allFinite() || !intr.nu.allFinite() || !std::isfinite(intr.alpha)) {
    throw CorruptedState("cpg::step: non-finite oscillator state or intrinsics");
  }

  OscillatorState next = state;
  const double h = dt / substeps;
  const double a = intr.alpha;
  for (int i = 0; i < 4; ++i) {
    double r = state.r[i];
    double rd = state.r_dot[i];
    const double mu = intr.mu[i];
    for (int k = 0; k < substeps; ++k) {
      const double rdd = a * (a / 4.0 * (mu - r) - rd);
      rd += h * rdd;
      r += h * rd;
      if (r < 0.0) {
        r = 0.0;
        if (rd < 0.0) rd = 0.0;
      }
    }
    next.r[i] = r;
    next.r_dot[i] = rd;
    next.theta[i] = wrap_two_pi(state.theta[i] + intr.nu[i] * dt);
    next.theta_dot[i] = intr.nu[i];
  }
  return next;
}

}  // namespace cpgloco::cpg
