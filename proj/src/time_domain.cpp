#include "hybridtrack/time_domain.hpp"

#include "hybridtrack/types.hpp"

#include <limits>

namespace hybridtrack {

bool HybridTimeDomain::is_valid() const {
    for (std::size_t k = 0; k < intervals.size(); ++k) {
        const auto& iv = intervals[k];
        if (!(iv.t_begin <= iv.t_end)) return false;
        if (iv.j != static_cast<int>(k)) return false;
        if (k > 0 && intervals[k - 1].t_end != iv.t_begin) return false;
    }
    return true;
}

std::vector<double> HybridTimeDomain::jump_times() const {
    std::vector<double> out;
    for (std::size_t k = 1; k < intervals.size(); ++k) out.push_back(intervals[k].t_begin);
    return out;
}

HybridTimeDomain HybridTimeDomain::from_jump_times(double t0, double t_final, const std::vector<double>& jump_times) {
    HybridTimeDomain d;
    double begin = t0;
    int j = 0;
    for (double tj : jump_times) {
        d.intervals.push_back({begin, tj, j++});
        begin = tj;
    }
    d.intervals.push_back({begin, t_final, j});
    return d;
}

DwellCheck check_inter_jump_time(const HybridTimeDomain& domain, const DwellTimeSpec& spec) {
    if (domain.empty()) throw HybridError(ErrorCode::EmptyDomain, "hybrid time domain has no intervals");
    if (!(spec.tau > 0.0) || !(spec.N0 > 0.0))
        throw HybridError(ErrorCode::InvalidSystem, "dwell spec requires tau > 0 and N0 > 0");

    std::vector<TimePoint> pts;
    pts.reserve(2 * domain.intervals.size());
    for (const auto& iv : domain.intervals) {
        pts.push_back({iv.t_begin, iv.j});
        pts.push_back({iv.t_end, iv.j});
    }

    DwellCheck best;
    best.margin = std::numeric_limits<double>::infinity();
    for (const auto& a : pts) {
        for (const auto& b : pts) {
            if (b.j < a.j || b.t < a.t) continue;
            const double jumps = b.j - a.j;
            const double elapsed = (b.t - a.t) / spec.tau;
            const double m = spec.kind == DwellKind::MinimalAverage ? spec.N0 + elapsed - jumps
                                                                    : jumps - elapsed + spec.N0;
            if (m < best.margin) {
                best.margin = m;
                best.first = a;
                best.second = b;
            }
        }
    }
    best.holds = best.margin >= 0.0;
    return best;
}

}  // namespace hybridtrack
