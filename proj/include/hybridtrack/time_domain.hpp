#pragma once

#include <vector>

namespace hybridtrack {

struct DomainInterval {
    double t_begin = 0.0;
    double t_end = 0.0;
    int j = 0;
};

struct HybridTimeDomain {
    std::vector<DomainInterval> intervals;

    bool empty() const { return intervals.empty(); }
    int jump_count() const { return intervals.empty() ? 0 : intervals.back().j; }
    /// Checks contiguity, ordering and the j sequence; returns false on the first violation.
    bool is_valid() const;
    /// Jump times t_1, ..., t_J.
    std::vector<double> jump_times() const;
    static HybridTimeDomain from_jump_times(double t0, double t_final, const std::vector<double>& jump_times);
};

enum class DwellKind { MinimalAverage, MaximalAverage };

struct DwellTimeSpec {
    double tau = 1.0;
    double N0 = 1.0;
    DwellKind kind = DwellKind::MinimalAverage;
};

struct TimePoint {
    double t = 0.0;
    int j = 0;
};

struct DwellCheck {
    bool holds = true;
    TimePoint first;   ///< (t, j)
    TimePoint second;  ///< (T, J)
    double margin = 0.0;
};

/**
 * Average inter-jump time check over all ordered endpoint pairs (t,j), (T,J) with T+J >= t+j.
 * Minimal:  J - j <= N0 + (T - t)/tau,   margin = min(N0 + (T-t)/tau - (J-j)).
 * Maximal:  J - j >= (T - t)/tau - N0,   margin = min((J-j) - (T-t)/tau + N0).
 */
DwellCheck check_inter_jump_time(const HybridTimeDomain& domain, const DwellTimeSpec& spec);

}  // namespace hybridtrack
