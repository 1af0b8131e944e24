#include "design_fixtures.hpp"
#include "hybridtrack/tracking.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace hybridtrack;
using fixtures::m2;
using fixtures::r2;
using fixtures::v2;

namespace {

struct Setup {
    AffineHybridSystem sys;
    LyapunovDesign design;
    ControllerDesign ctrl;
};

Setup ball_setup(double horizon = 16.0) {
    Setup s{fixtures::ball(), {}, {}};
    s.design = derive_constants(s.sys, fixtures::ball_design(), fixtures::planar_geometry(1.0, 0.01));
    s.ctrl.gains = fixtures::ball_gains();
    s.ctrl.reference = std::make_shared<HybridArc>(simulate(s.sys, v2(0, 10), 0.0, horizon, nullptr));
    return s;
}

Setup oscillator_setup(double horizon = 61.0) {
    Setup s{fixtures::oscillator(), {}, {}};
    s.design = derive_constants(s.sys, fixtures::oscillator_design(), fixtures::planar_geometry(0.9, 0.01));
    s.ctrl.gains = fixtures::zero_gains();
    s.ctrl.u_ff = {0.0, 100.0, 0.4};
    const Feedforward uff = s.ctrl.u_ff;
    s.ctrl.reference = std::make_shared<HybridArc>(
        simulate(s.sys, v2(50, 0), 0.0, horizon, [uff](double t, const Vec&) { return uff(t); }));
    return s;
}

double time_derivative_of_branch(const Setup& s, double t, const Vec& x, const Vec& y, Region region) {
    const double uff = s.ctrl.u_ff(t);
    const double u = uff + feedback_in_region(s.sys, s.design, s.ctrl, t, x, y, region);
    const Vec dx = flow_rhs(s.sys, t, x, uff), dy = flow_rhs(s.sys, t, y, u);
    const Mat Lm = jump_linear_part(s.sys, s.design);
    switch (region) {
        case Region::S0: return 2 * (x - y).dot(s.design.P0 * (dx - dy));
        case Region::S1: {
            const Vec e = x - gbar(s.sys, s.design, y);
            return 2 * e.dot(s.design.Ps * (dx - Lm * dy));
        }
        case Region::S2: {
            const Vec e = gbar(s.sys, s.design, x) - y;
            return 2 * e.dot(s.design.Ps * (Lm * dx - dy));
        }
    }
    return 0.0;
}

}  // namespace

TEST(ReferenceSelector, InsideAndAtJumps) {
    const auto s = ball_setup();
    const HybridArc& ref = *s.ctrl.reference;
    EXPECT_EQ(reference_selector(ref, 0.0), v2(0, 10));
    const double t = 1.234;
    EXPECT_LE((reference_selector(ref, t) - v2(10 * t - 9.81 * t * t / 2, 10 - 9.81 * t)).norm(), 1e-8);
    ASSERT_GE(ref.jumps.size(), 2u);
    for (const auto& jr : ref.jumps) EXPECT_EQ(reference_selector(ref, jr.t), jr.pre);
    EXPECT_THROW(reference_selector(ref, -0.1), HybridError);
    try {
        reference_selector(ref, ref.t_end() + 1.0);
        FAIL() << "expected OutOfHorizon";
    } catch (const HybridError& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfHorizon);
    }
}

TEST(Betas, OscillatorReducesToClosedForms) {
    const auto s = oscillator_setup(20.0);
    const double eps = 0.9;
    const Vec b2 = beta2(s.sys, s.design), b4 = beta4(s.sys);
    int used = 0;
    for (double t = 0.0; t < 20.0; t += 0.37) {
        if (reference_selector(*s.ctrl.reference, t)(1) > 0) continue;  // Gbar(xb) off its linear piece
        ++used;
        const Betas b = betas(s.sys, s.design, s.ctrl, t);
        const double kx = 1.0;  // k times the spring rest position
        EXPECT_NEAR(-b2.dot(b.beta1) / b2.squaredNorm(), -(1 + eps) / eps * (kx + s.ctrl.u_ff(t)), 1e-10);
        EXPECT_NEAR(-b4.dot(b.beta3) / b4.squaredNorm(), -(1 + eps) * (kx + s.ctrl.u_ff(t)), 1e-10);
    }
    EXPECT_GT(used, 10);
}

TEST(Betas, VanishWithoutDrift) {
    auto s = ball_setup(3.0);
    s.sys.A.setZero();
    s.sys.E.setZero();
    for (double t : {0.0, 0.5, 2.5}) {
        const Betas b = betas(s.sys, s.design, s.ctrl, t);
        EXPECT_EQ(b.beta1.norm(), 0.0);
        EXPECT_EQ(b.beta3.norm(), 0.0);
    }
}

TEST(Betas, BallDirections) {
    const auto s = ball_setup(3.0);
    EXPECT_EQ(beta2(s.sys, s.design), v2(0, 1));
    EXPECT_EQ(beta4(s.sys), v2(0, -1));
}

TEST(SpanCondition, ExamplesSatisfyIt) {
    for (const auto& s : {ball_setup(), oscillator_setup()}) {
        std::vector<double> grid;
        const double T = s.ctrl.reference->t_end();
        for (int i = 0; i < 1000; ++i) grid.push_back(T * i / 999.0);
        EXPECT_LE(span_condition_residual(s.sys, s.design, s.ctrl, grid), 1e-10);
        auto scaled = s;
        scaled.ctrl.u_ff.amplitude *= 10;
        scaled.ctrl.u_ff.constant = 10 * scaled.ctrl.u_ff.constant + 1;
        EXPECT_LE(span_condition_residual(scaled.sys, scaled.design, scaled.ctrl, grid), 1e-10);
    }
}

TEST(SpanCondition, OrthogonalDriftIsMeasured) {
    // L = -I: beta1 = 2(B u + E) and beta3 = -2(B u + E); E = (1, 0) is orthogonal to B
    auto s = ball_setup(1.0);
    s.sys.E = v2(1, 0);
    s.ctrl.reference = std::make_shared<HybridArc>(simulate(s.sys, v2(1, 0), 0.0, 1.0, nullptr));
    EXPECT_NEAR(span_condition_residual(s.sys, s.design, s.ctrl, {0.0, 0.5, 1.0}), 2.0, 1e-12);
    EXPECT_NEAR(betas(s.sys, s.design, s.ctrl, 0.5).beta1.norm(), 2.0, 1e-12);
}

TEST(Feedback, VanishesOnReference) {
    for (const auto& s : {ball_setup(), oscillator_setup()}) {
        const auto& ref = *s.ctrl.reference;
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, ref.t_end());
        for (int i = 0; i < 1000; ++i) {
            const double t = u(rng);
            const Vec xb = reference_selector(ref, t);
            const auto fb = feedback(s.sys, s.design, s.ctrl, t, xb);
            EXPECT_EQ(fb.region, Region::S0);
            EXPECT_LE(std::abs(fb.u), 1e-9);
        }
    }
}

TEST(Feedback, OscillatorJumpCases) {
    const auto s = oscillator_setup(20.0);
    const double eps = 0.9;
    for (double t = 0.1; t < 20.0; t += 0.9) {
        const Vec xb = reference_selector(*s.ctrl.reference, t);
        if (xb(1) > 0) continue;
        const Vec y = gbar_inverse(s.sys, s.design, xb);
        const double law1 = -(1 + eps) / eps * (1.0 + s.ctrl.u_ff(t));
        EXPECT_NEAR(feedback_in_region(s.sys, s.design, s.ctrl, t, xb, v2(3, 1), Region::S1), law1, 1e-9);
        EXPECT_NEAR(feedback_in_region(s.sys, s.design, s.ctrl, t, xb, v2(3, 1), Region::S2), -(1 + eps) * (1.0 + s.ctrl.u_ff(t)),
                    1e-9);
        EXPECT_EQ(feedback_in_region(s.sys, s.design, s.ctrl, t, xb, v2(3, 1), Region::S0), 0.0);
        if (in_flow_set(s.sys, y, 0.0)) {
            const auto fb = feedback(s.sys, s.design, s.ctrl, t, y);
            EXPECT_EQ(fb.region, Region::S1);
            EXPECT_NEAR(fb.u, law1, 1e-9);
        }
    }
}

TEST(Feedback, BallProportionalCase) {
    // y - xb = (1, 0): u = -c0 (xb - y) = -(-[1, 0.5]) (-1, 0)^T = -1
    const auto s = ball_setup(3.0);
    const Vec xb = reference_selector(*s.ctrl.reference, 0.5);
    EXPECT_DOUBLE_EQ(feedback_in_region(s.sys, s.design, s.ctrl, 0.5, xb, xb + v2(1, 0), Region::S0), -1.0);
    const auto fb = feedback(s.sys, s.design, s.ctrl, 0.5, xb + v2(1, 0));
    EXPECT_EQ(fb.region, Region::S0);
    EXPECT_DOUBLE_EQ(fb.u, -1.0);
}

TEST(Feedback, EachCaseDecaysItsBranch) {
    // along the flow, the active branch satisfies dV/dt <= lambda_c V under the case law
    for (const auto& s : {ball_setup(), oscillator_setup()}) {
        const auto& ref = *s.ctrl.reference;
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> ut(0.0, ref.t_end()), ue(-1.0, 1.0);
        int flipped_violations = 0, flipped_checked = 0;
        for (int i = 0; i < 2000; ++i) {
            const double t = ut(rng);
            const Vec xb = reference_selector(ref, t);
            if (s.sys.z1.dot(xb) + s.sys.z2 > 0) continue;  // keep Gbar(xb) in its linear piece
            const Vec e = v2(ue(rng), ue(rng));
            const Vec y0 = xb + e;
            const Vec y1 = gbar_inverse(s.sys, s.design, xb) + e;
            const Vec y2 = gbar(s.sys, s.design, xb) + e;
            const std::pair<Region, Vec> cases[] = {{Region::S0, y0}, {Region::S1, y1}, {Region::S2, y2}};
            for (const auto& [region, y] : cases) {
                if (s.sys.z1.dot(y) + s.sys.z2 > 0) continue;
                const auto lv = lyapunov_value(s.sys, s.design, xb, y);
                const double branch = lv.branches[static_cast<std::size_t>(region)];
                const double dV = time_derivative_of_branch(s, t, xb, y, region);
                EXPECT_LE(dV, s.design.lambda_c * branch + 1e-9 * (1 + branch));
            }
            // the opposite sign of the proportional term in the S1 case breaks the decay
            if (s.ctrl.gains.c1.norm() > 0 && s.sys.z1.dot(y1) + s.sys.z2 <= 0) {
                ++flipped_checked;
                auto flipped = s;
                flipped.ctrl.gains.c1 = -s.ctrl.gains.c1;
                const double branch = lyapunov_value(s.sys, s.design, xb, y1).branches[1];
                flipped_violations += time_derivative_of_branch(flipped, t, xb, y1, Region::S1) > s.design.lambda_c * branch;
            }
        }
        if (s.ctrl.gains.c1.norm() > 0) EXPECT_GT(flipped_violations, flipped_checked / 10) << flipped_checked;
    }
}

TEST(ClosedLoop, BallConvergesInDistanceWhileEuclideanErrorPeaks) {
    const auto s = ball_setup();
    const auto res = closed_loop_simulate(s.sys, s.design, s.ctrl, v2(0, 3), 0.0, 15.0);
    ASSERT_EQ(res.arc.termination, Termination::HorizonReached);
    const double d0 = res.distance.front().d;
    double tail = 0.0;
    for (const auto& ds : res.distance)
        if (ds.t >= 13.5) tail = std::max(tail, ds.d);
    EXPECT_LE(tail, 0.05 * d0);

    // local maxima of |x - y| above 1 after t = 3
    std::vector<double> e;
    std::vector<double> te;
    for (const auto& iv : res.arc.samples)
        for (const auto& smp : iv) {
            e.push_back((smp.x - smp.y).norm());
            te.push_back(smp.t);
        }
    int peaks = 0;
    for (std::size_t i = 1; i + 1 < e.size(); ++i)
        if (te[i] > 3 && e[i] >= 1 && e[i] >= e[i - 1] && e[i] > e[i + 1]) ++peaks;
    EXPECT_GE(peaks, 3);

    const auto pairs = jump_time_pairs(res.arc);
    ASSERT_GE(pairs.size(), 3u);
    for (std::size_t k = pairs.size() - 2; k < pairs.size(); ++k)
        EXPECT_LT(pairs[k].mismatch(), pairs[k - 1].mismatch()) << k;

    EXPECT_TRUE(res.monitor.jump_violations.empty());
    EXPECT_TRUE(res.monitor.flow_violations.empty());
    EXPECT_LE(res.monitor.envelope_ratio, 1.05);
}

TEST(JumpTimePairs, NearestJumpOfTheOtherComponent) {
    CombinedArc arc;
    for (auto [t, c] : {std::pair{1.0, Component::Y}, {1.5, Component::X}, {1.8, Component::Y}, {3.0, Component::X}, {3.05, Component::Y}}) {
        CombinedJump j;
        j.t = t;
        j.jumped = c;
        arc.jumps.push_back(j);
    }
    const auto p = jump_time_pairs(arc);
    ASSERT_EQ(p.size(), 2u);
    EXPECT_EQ(p[0].t_y, 1.8);
    EXPECT_EQ(p[1].t_y, 3.05);
}

TEST(ClosedLoop, IdenticalStartStaysOnReference) {
    const auto s = ball_setup(8.0);
    const auto res = closed_loop_simulate(s.sys, s.design, s.ctrl, v2(0, 10), 0.0, 7.0);
    for (const auto& ds : res.distance) EXPECT_LE(ds.d, 1e-8) << ds.t;
    for (const auto& c : res.control)
        if (c.region == Region::S0) EXPECT_LE(std::abs(c.u_fb), 1e-8);
}

TEST(ClosedLoop, OscillatorDistanceDecreases) {
    const auto s = oscillator_setup();
    const auto res = closed_loop_simulate(s.sys, s.design, s.ctrl, v2(100, 0), 0.0, 60.0);
    ASSERT_EQ(res.arc.termination, Termination::HorizonReached);
    EXPECT_GE(res.arc.jx.back(), 5);
    EXPECT_LE(res.distance.back().d, 0.1 * res.distance.front().d);
    for (const auto& c : res.control)
        if (c.region == Region::S0) EXPECT_EQ(c.u_fb, 0.0);
    EXPECT_TRUE(res.monitor.jump_violations.empty());
}

TEST(ClosedLoop, CaseMatchesRegionOutsideHysteresisBand) {
    for (const auto& [s, y0, T] : {std::tuple{ball_setup(), v2(0, 3), 15.0}, std::tuple{oscillator_setup(), v2(100, 0), 60.0}}) {
        const auto res = closed_loop_simulate(s.sys, s.design, s.ctrl, y0, 0.0, T);
        for (const auto& iv : res.arc.samples)
            for (const auto& smp : iv) {
                const auto lv = lyapunov_value(s.sys, s.design, smp.x, smp.y);
                if (static_cast<int>(lv.region) == smp.mode) continue;
                // a differing case is only allowed while its branch is within the band of the minimum
                EXPECT_LE(lv.branches[static_cast<std::size_t>(smp.mode)], (1 + 2e-9) * lv.V + 1e-15) << smp.t;
            }
    }
}

TEST(ClosedLoop, NearReferenceTransitionsFollowTheAdmissibleSet) {
    for (const auto& [s, x0, T] : {std::tuple{ball_setup(), v2(0, 10), 15.0}, std::tuple{oscillator_setup(), v2(50, 0), 60.0}}) {
        const double vL = s.design.derived.vL;
        int checked = 0;
        for (const Vec& dy : {v2(0, 1e-4), v2(0, -1e-4), v2(2e-4, 0), v2(1e-4, -1e-4)}) {
            const auto res = closed_loop_simulate(s.sys, s.design, s.ctrl, x0 + dy, 0.0, T);
            EXPECT_EQ(res.monitor.inadmissible_transitions(), 0);
            checked += res.monitor.checked_transitions();
            EXPECT_LE(res.monitor.series.front().V, vL);
        }
        EXPECT_GT(checked, 10);
    }
}

TEST(ClosedLoop, MissingHorizonIsReported) {
    const auto s = ball_setup(3.0);
    EXPECT_THROW(closed_loop_simulate(s.sys, s.design, s.ctrl, v2(0, 3), 0.0, 10.0), HybridError);
}
