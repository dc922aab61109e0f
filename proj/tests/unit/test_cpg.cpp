#include <gtest/gtest.h>

#include "cpgloco/cpg.hpp"
#include "cpgloco/rng.hpp"
#include "oracles.hpp"

using namespace cpgloco;

namespace {

cpg::CpgIntrinsics intrinsics(double mu, double nu) {
  cpg::CpgIntrinsics in;
  in.mu.setConstant(mu);
  in.nu.setConstant(nu);
  return in;
}

}  // namespace

TEST(CpgInit, TrotOffsets) {
  const auto s = cpg::init_state(cpg::trot_offsets(), 1.0);
  EXPECT_EQ(s.theta, Vec4(0.0, kPi, kPi, 0.0));
  EXPECT_EQ(s.r, Vec4::Ones());
  EXPECT_EQ(s.r_dot, Vec4::Zero());
  EXPECT_EQ(s.theta_dot, Vec4::Zero());
}

TEST(CpgInit, WrapsOffsets) {
  const auto s = cpg::init_state(Vec4(kTwoPi, 0.0, -kPi / 2, 5 * kPi), 1.0);
  EXPECT_EQ(s.theta[0], 0.0);
  EXPECT_NEAR(s.theta[2], 1.5 * kPi, 1e-15);
  EXPECT_NEAR(s.theta[3], kPi, 1e-14);
}

TEST(CpgInit, ZeroAmplitudeRest) {
  const auto s = cpg::init_state(cpg::trot_offsets(), 0.0);
  EXPECT_EQ(s.r, Vec4::Zero());
}

TEST(CpgInit, RejectsNonFinite) {
  EXPECT_THROW(cpg::init_state(Vec4(NAN, 0, 0, 0), 1.0), CorruptedState);
}

TEST(CpgStep, FixedPoint) {
  auto s = cpg::init_state(cpg::trot_offsets(), 1.0);
  for (int k = 0; k < 100; ++k) {
    const auto n = cpg::step(s, intrinsics(1.0, 2.0), 0.01);
    EXPECT_LT((n.r - s.r).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT(n.r_dot.cwiseAbs().maxCoeff(), 1e-12);
    s = n;
  }
}

TEST(CpgStep, PhaseSingleStep) {
  auto s = cpg::init_state(Vec4::Zero(), 1.0);
  s = cpg::step(s, intrinsics(1.0, kTwoPi), 0.01);
  EXPECT_NEAR(s.theta[0], 0.062831853071795862, 1e-15);
  EXPECT_EQ(s.theta_dot[0], kTwoPi);
}

TEST(CpgStep, ConvergesLikeReference) {
  auto s = cpg::init_state(Vec4::Zero(), 0.0);
  const auto in = intrinsics(1.0, 0.0);
  double peak = 0.0;
  for (int k = 1; k <= 100; ++k) {
    s = cpg::step(s, in, 0.01);
    const double t = 0.01 * k;
    const double exact = oracle::amplitude_closed_form(0.0, 1.0, 50.0, t);
    const double rk4 = oracle::amplitude_rk4(0.0, 0.0, 1.0, 50.0, t, 1e-5).first;
    ASSERT_NEAR(exact, rk4, 1e-9);
    EXPECT_NEAR(s.r[0], rk4, 1e-4) << "t=" << t;
    if (t >= 0.5) EXPECT_LT(std::abs(s.r[0] - 1.0), 1e-3);
    peak = std::max(peak, s.r.maxCoeff());
  }
  EXPECT_LE(peak, 1.01);
}

TEST(CpgStep, OvershootBoundedAcrossSetpoints) {
  for (double mu : {0.5, 1.0, 1.5, 2.0}) {
    auto s = cpg::init_state(Vec4::Zero(), 0.0);
    double peak = 0.0;
    for (int k = 0; k < 200; ++k) {
      s = cpg::step(s, intrinsics(mu, 3.0), 0.01);
      peak = std::max(peak, s.r.maxCoeff());
    }
    EXPECT_LE(peak, 1.01 * mu);
  }
}

TEST(CpgStep, PhaseExactOverManySteps) {
  auto s = cpg::init_state(Vec4(0.0, 1.0, 2.0, 3.0), 1.0);
  const Vec4 theta0 = s.theta;
  const double nu = kTwoPi, dt = 0.01;
  for (int k = 1; k <= 1000; ++k) {
    s = cpg::step(s, intrinsics(1.0, nu), dt);
    for (int i = 0; i < 4; ++i) {
      const double expect = std::fmod(theta0[i] + k * nu * dt, kTwoPi);
      double err = std::abs(s.theta[i] - expect);
      err = std::min(err, kTwoPi - err);
      ASSERT_LT(err, 1e-10);
    }
  }
}

TEST(CpgStep, InvariantsHold) {
  Rng rng(7);
  auto s = cpg::init_state(cpg::trot_offsets(), 0.0);
  for (int k = 0; k < 2000; ++k) {
    cpg::CpgIntrinsics in;
    for (int i = 0; i < 4; ++i) {
      in.mu[i] = rng.uniform(0.0, 2.0);
      in.nu[i] = rng.uniform(0.0, 8 * kPi);
    }
    s = cpg::step(s, in, 0.01);
    EXPECT_TRUE((s.r.array() >= 0.0).all());
    EXPECT_TRUE((s.theta.array() >= 0.0).all() && (s.theta.array() < kTwoPi).all());
    EXPECT_EQ(s.theta_dot, in.nu);
  }
}

TEST(CpgStep, ClampsAmplitudeAtZero) {
  cpg::OscillatorState s;
  s.r.setConstant(0.01);
  s.r_dot.setConstant(-50.0);
  const auto n = cpg::step(s, intrinsics(0.0, 0.0), 0.01);
  EXPECT_TRUE((n.r.array() >= 0.0).all());
}

TEST(CpgStep, Deterministic) {
  auto s = cpg::init_state(cpg::trot_offsets(), 0.3);
  const auto in = intrinsics(1.3, 7.0);
  EXPECT_EQ(cpg::step(s, in, 0.01), cpg::step(s, in, 0.01));
}

TEST(CpgStep, RejectsCorruptInput) {
  auto s = cpg::init_state(cpg::trot_offsets(), 1.0);
  EXPECT_THROW(cpg::step(s, intrinsics(1.0, 1.0), 0.0), CorruptedState);
  EXPECT_THROW(cpg::step(s, intrinsics(NAN, 1.0), 0.01), CorruptedState);
  s.r_dot[2] = INFINITY;
  EXPECT_THROW(cpg::step(s, intrinsics(1.0, 1.0), 0.01), CorruptedState);
}

TEST(CpgStep, TenSubstepsStillSelectable) {
  auto s = cpg::init_state(Vec4::Zero(), 0.0);
  s = cpg::step(s, intrinsics(1.0, 0.0), 0.01, 10);
  EXPECT_GT(s.r[0], 0.0);
  EXPECT_THROW(cpg::step(s, intrinsics(1.0, 0.0), 0.01, 0), std::invalid_argument);
}
