#include "fixtures.hpp"
#include "hybridtrack/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hybridtrack;
using namespace fixtures;

namespace {

constexpr double g0 = 9.81;

double analytic_impact(int k) { return k * 20.0 / g0; }

}  // namespace

TEST(IntegrateFlow, BallFirstImpact) {
    const auto seg = integrate_flow(ball(), v2(0, 10), 0.0, 5.0, nullptr);
    ASSERT_EQ(seg.end, SegmentEnd::Guard);
    ASSERT_TRUE(seg.event.has_value());
    EXPECT_NEAR(seg.event->t, 20.0 / g0, 1e-10);
    EXPECT_NEAR(seg.event->x(0), 0.0, 1e-10);
    EXPECT_NEAR(seg.event->x(1), -10.0, 1e-9);
}

TEST(IntegrateFlow, EquilibriumStaysPut) {
    const Vec eq = v2(1, 0);  // A x + E = 0 for the oscillator
    const auto seg = integrate_flow(oscillator(), eq, 0.0, 3.0, nullptr);
    EXPECT_EQ(seg.end, SegmentEnd::Horizon);
    for (const auto& s : seg.samples) EXPECT_LE((s.x - eq).norm(), 1e-14);
    EXPECT_DOUBLE_EQ(seg.samples.back().t, 3.0);
}

TEST(IntegrateFlow, OscillatorImpactMatchesTighterReference) {
    InputFn u = [](double t, const Vec&) { return 100.0 * std::cos(0.4 * t); };
    const auto seg = integrate_flow(oscillator(), v2(50, 0), 0.0, 50.0, u);
    ASSERT_EQ(seg.end, SegmentEnd::Guard);
    IntegratorOptions tight;
    tight.rtol = 1e-11;
    tight.atol = 1e-13;
    tight.sample_dt = 1e-3;
    const auto ref = integrate_flow(oscillator(), v2(50, 0), 0.0, 50.0, u, tight);
    ASSERT_EQ(ref.end, SegmentEnd::Guard);
    EXPECT_NEAR(seg.event->t, ref.event->t, 1e-9);
    EXPECT_LE((seg.event->x - ref.event->x).norm(), 1e-7);
    EXPECT_LT(seg.event->x(1), 0.0);
}

TEST(Simulate, BallImpactTimesMatchClosedForm) {
    const auto arc = simulate(ball(), v2(0, 10), 0.0, 15.0, nullptr);
    EXPECT_EQ(arc.termination, Termination::HorizonReached);
    ASSERT_GE(arc.jumps.size(), 5u);
    for (int k = 1; k <= 5; ++k) EXPECT_NEAR(arc.jumps[k - 1].t, analytic_impact(k), 1e-9) << "impact " << k;
    EXPECT_EQ(arc.jumps.size(), 7u);  // period 20/g, seven impacts within 15 s
}

TEST(Simulate, ShortHorizonHasNoJumps) {
    const auto arc = simulate(ball(), v2(0, 10), 0.0, 1.0, nullptr);
    EXPECT_EQ(arc.domain.intervals.size(), 1u);
    EXPECT_TRUE(arc.jumps.empty());
    EXPECT_DOUBLE_EQ(arc.t_end(), 1.0);
}

TEST(Simulate, ZeroHorizonSingleSample) {
    const auto arc = simulate(ball(), v2(0, 10), 0.0, 0.0, nullptr);
    ASSERT_EQ(arc.samples.size(), 1u);
    EXPECT_EQ(arc.samples[0].size(), 1u);
}

TEST(Simulate, ArcInvariants) {
    IntegratorOptions fine;
    fine.sample_dt = 1e-3;
    const auto sys = ball();
    const auto arc = simulate(sys, v2(0, 10), 0.0, 15.0, nullptr, {}, fine);
    EXPECT_TRUE(arc.domain.is_valid());
    EXPECT_EQ(arc.domain.intervals.size(), arc.samples.size());
    for (const auto& jr : arc.jumps) {
        const Vec expect = sys.L * jr.pre + sys.H;
        EXPECT_LE((jr.post - expect).norm(), 1e-10 * (1 + expect.norm()));
        EXPECT_LE(std::abs(sys.J.dot(jr.pre) + sys.K), sys.tol.event);
        EXPECT_LE(sys.z1.dot(jr.pre) + sys.z2, sys.tol.event);
    }
    EXPECT_LE(flow_residual(sys, arc, nullptr), 1e-4);
}

TEST(Simulate, OscillatorResidualAndJumps) {
    IntegratorOptions fine;
    fine.sample_dt = 1e-3;
    const auto sys = oscillator();
    InputFn u = [](double t, const Vec&) { return 100.0 * std::cos(0.4 * t); };
    const auto arc = simulate(sys, v2(50, 0), 0.0, 60.0, u, {}, fine);
    EXPECT_EQ(arc.termination, Termination::HorizonReached);
    EXPECT_GE(arc.jumps.size(), 5u);
    EXPECT_TRUE(arc.domain.is_valid());
    EXPECT_LE(flow_residual(sys, arc, u), 1e-4);
}

TEST(Simulate, StateAtInterpolates) {
    const auto arc = simulate(ball(), v2(0, 10), 0.0, 1.0, nullptr);
    const double t = 0.3337;
    const Vec x = arc.state_at(t, 0);
    EXPECT_NEAR(x(0), 10 * t - 0.5 * g0 * t * t, 1e-10);
    EXPECT_NEAR(x(1), 10 - g0 * t, 1e-10);
    EXPECT_THROW(arc.state_at(2.0, 0), HybridError);
}

TEST(Simulate, ZenoDetectedForUntruncatedDissipativeBall) {
    auto sys = ball(0.0);
    sys.exclusion.reset();
    sys.L = -0.5 * Mat::Identity(2, 2);
    const auto arc = simulate(sys, v2(0, 10), 0.0, 20.0, nullptr);
    EXPECT_EQ(arc.termination, Termination::ZenoLimit);
}

TEST(Simulate, MaxJumpsLimit) {
    SimulationLimits lim;
    lim.max_jumps = 2;
    const auto arc = simulate(ball(), v2(0, 10), 0.0, 15.0, nullptr, lim);
    EXPECT_EQ(arc.termination, Termination::ZenoLimit);
}

TEST(Simulate, TruncatedBallStopsAtExcludedCorner) {
    auto sys = ball(0.05);
    sys.L = -0.5 * Mat::Identity(2, 2);
    const auto arc = simulate(sys, v2(0, 10), 0.0, 40.0, nullptr);
    EXPECT_EQ(arc.termination, Termination::LeftFlowSet);
    EXPECT_GT(arc.jumps.size(), 3u);
}

TEST(Simulate, EscapeDetected) {
    auto sys = ball();
    sys.A = m2(1, 0, 0, 1);
    sys.E = v2(0, 0);
    const auto arc = simulate(sys, v2(1, 1), 0.0, 40.0, nullptr);
    EXPECT_EQ(arc.termination, Termination::EscapeDetected);
}

TEST(Simulate, StartInJumpSetJumpsFirst) {
    const auto arc = simulate(ball(), v2(0, -3), 0.0, 0.1, nullptr);
    ASSERT_FALSE(arc.jumps.empty());
    EXPECT_EQ(arc.jumps[0].t, 0.0);
    EXPECT_TRUE(arc.jumps[0].post.isApprox(v2(0, 3)));
}

TEST(Simulate, RejectsStateOutsideStateSpace) {
    EXPECT_THROW(simulate(ball(), v2(-1, 0), 0.0, 1.0, nullptr), HybridError);
}
