#include "dwell_oracle.hpp"
#include "hybridtrack/types.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hybridtrack;

TEST(Dwell, RegularJumpsMinimal) {
    const auto d = HybridTimeDomain::from_jump_times(0, 5, {1, 2, 3, 4});
    const DwellTimeSpec spec{1.0, 1.0, DwellKind::MinimalAverage};
    const auto r = check_inter_jump_time(d, spec);
    EXPECT_TRUE(r.holds);
    // tightest pair: end of interval j and start of interval J > j at the same instant
    EXPECT_NEAR(r.margin, fixtures::dwell_margin_bruteforce(d, spec), 1e-12);
    EXPECT_NEAR(r.margin, 0.0, 1e-12);
}

TEST(Dwell, NoJumpsHoldsForAnySpec) {
    const auto d = HybridTimeDomain::from_jump_times(0, 100, {});
    EXPECT_TRUE(check_inter_jump_time(d, {1e-3, 1e-3, DwellKind::MinimalAverage}).holds);
    EXPECT_TRUE(check_inter_jump_time(d, {5.0, 0.5, DwellKind::MinimalAverage}).holds);
}

TEST(Dwell, SimultaneousJumps) {
    const DwellTimeSpec spec{1.0, 1.0, DwellKind::MinimalAverage};
    EXPECT_TRUE(check_inter_jump_time(HybridTimeDomain::from_jump_times(0, 2, {1}), spec).holds);
    const auto two = check_inter_jump_time(HybridTimeDomain::from_jump_times(0, 2, {1, 1}), spec);
    EXPECT_FALSE(two.holds);
    EXPECT_DOUBLE_EQ(two.margin, -1.0);
    const auto three = check_inter_jump_time(HybridTimeDomain::from_jump_times(0, 2, {1, 1, 1}), spec);
    EXPECT_FALSE(three.holds);
    EXPECT_DOUBLE_EQ(three.margin, -2.0);
    EXPECT_EQ(three.second.j - three.first.j, 3);
    EXPECT_EQ(three.second.t, three.first.t);
}

TEST(Dwell, MaximalDetectsLongGap) {
    const auto d = HybridTimeDomain::from_jump_times(0, 10, {1, 2, 8});
    const auto r = check_inter_jump_time(d, {1.0, 2.0, DwellKind::MaximalAverage});
    EXPECT_FALSE(r.holds);
    EXPECT_DOUBLE_EQ(r.margin, -5.0);
}

TEST(Dwell, EmptyDomainThrows) {
    try {
        check_inter_jump_time(HybridTimeDomain{}, {});
        FAIL();
    } catch (const HybridError& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyDomain);
    }
}

TEST(Dwell, DomainValidity) {
    auto d = HybridTimeDomain::from_jump_times(0, 3, {1, 2});
    EXPECT_TRUE(d.is_valid());
    d.intervals[1].t_begin = 1.5;
    EXPECT_FALSE(d.is_valid());
}

TEST(DwellProperty, AgreesWithBruteForceOnRandomDomains) {
    std::mt19937_64 rng(20240611);
    std::uniform_int_distribution<int> njumps(0, 8);
    std::uniform_real_distribution<double> gap(0.0, 2.0);
    std::bernoulli_distribution simultaneous(0.2);
    std::uniform_real_distribution<double> tau(0.2, 2.0), n0(0.1, 3.0);
    int disagreements = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> jt;
        double t = 0.0;
        const int n = njumps(rng);
        for (int k = 0; k < n; ++k) {
            if (!simultaneous(rng)) t += gap(rng);
            jt.push_back(t);
        }
        const auto d = HybridTimeDomain::from_jump_times(0.0, t + gap(rng), jt);
        const DwellTimeSpec spec{tau(rng), n0(rng), trial % 2 ? DwellKind::MinimalAverage : DwellKind::MaximalAverage};
        const auto r = check_inter_jump_time(d, spec);
        const double m = fixtures::dwell_margin_bruteforce(d, spec);
        if (std::abs(r.margin - m) > 1e-12 || r.holds != (m >= 0.0)) ++disagreements;
    }
    EXPECT_EQ(disagreements, 0);
}
