#include "hybridtrack/simulate.hpp"

#include <algorithm>
#include <cmath>

namespace hybridtrack {

const char* to_string(Termination t) {
    switch (t) {
        case Termination::HorizonReached: return "HorizonReached";
        case Termination::LeftFlowSet: return "LeftFlowSet";
        case Termination::ZenoLimit: return "ZenoLimit";
        case Termination::EscapeDetected: return "EscapeDetected";
    }
    return "Unknown";
}

Vec HybridArc::state_at(double t, int j) const {
    if (j < 0 || j >= static_cast<int>(samples.size()))
        throw HybridError(ErrorCode::OutOfHorizon, "jump index outside the arc");
    const auto& iv = samples[static_cast<std::size_t>(j)];
    if (iv.empty()) throw HybridError(ErrorCode::OutOfHorizon, "empty interval");
    const double tol = 1e-12 * std::max(1.0, std::abs(t));
    if (t < iv.front().t - tol || t > iv.back().t + tol)
        throw HybridError(ErrorCode::OutOfHorizon, "time " + std::to_string(t) + " outside interval");
    if (iv.size() == 1 || t <= iv.front().t) return iv.front().x;
    if (t >= iv.back().t) return iv.back().x;
    auto it = std::upper_bound(iv.begin(), iv.end(), t, [](double v, const Sample& s) { return v < s.t; });
    const Sample& b = *it;
    const Sample& a = *(it - 1);
    if (t == a.t) return a.x;
    return hermite(Node{a.t, a.x, a.dx}, Node{b.t, b.x, b.dx}, t);
}

FlowSegment integrate_flow(const AffineHybridSystem& sys, const Vec& x0, double t0, double t_max,
                           const InputFn& u, const IntegratorOptions& opts, double grid_origin) {
    check_dim(sys, x0, "initial state");
    RhsFn rhs = [&](double t, const Vec& x, Vec& dx) { dx = flow_rhs(sys, t, x, u ? u(t, x) : 0.0); };

    std::vector<EventSpec> events;
    events.push_back({[&](double, const Vec& x) { return sys.J.dot(x) + sys.K; }, sys.tol.event});
    events.push_back({[&](double, const Vec& x) { return image_guard_value(sys, x); }, sys.tol.event});
    if (sys.exclusion)
        events.push_back(
            {[&](double, const Vec& x) { return sys.exclusion->radius - (x - sys.exclusion->center).norm(); },
             sys.tol.event});

    FlowSegment seg;
    double t = t0;
    Vec x = x0;
    std::vector<int> disarmed;
    for (;;) {
        FlowOutcome fo = integrate_until(rhs, t, x, t_max, events, opts, grid_origin, disarmed);
        const std::size_t skip = seg.samples.empty() ? 0 : 1;
        for (std::size_t k = skip; k < fo.nodes.size(); ++k)
            seg.samples.push_back({fo.nodes[k].t, fo.nodes[k].w, fo.nodes[k].dw});
        const Node& last = fo.nodes.back();
        if (fo.stop == FlowStop::Horizon) {
            seg.end = SegmentEnd::Horizon;
            return seg;
        }
        if (fo.stop == FlowStop::Escape) {
            seg.end = SegmentEnd::Escape;
            return seg;
        }
        // Classify by the located state: the guard and image-guard surfaces may coincide.
        const GuardValues gv = guard_values(sys, last.w);
        if (fo.event != 2 && std::abs(gv.g) <= sys.tol.event) {
            if (gv.h + sys.jump_margin <= sys.tol.event) {
                seg.end = SegmentEnd::Guard;
                seg.event = GuardEvent{last.t, last.w, gv};
                return seg;
            }
            // hyperplane crossed outside the half-hyperplane D: keep flowing
            t = last.t;
            x = last.w;
            disarmed.clear();
            for (int k = 0; k < 2; ++k)
                if (std::abs(events[static_cast<std::size_t>(k)].value(t, x)) <= 10 * sys.tol.event) disarmed.push_back(k);
            continue;
        }
        seg.end = SegmentEnd::LeftFlowSet;
        seg.event = GuardEvent{last.t, last.w, guard_values(sys, last.w)};
        return seg;
    }
}

HybridArc simulate(const AffineHybridSystem& sys, const Vec& x0, double t0, double horizon, const InputFn& u,
                   const SimulationLimits& limits, const IntegratorOptions& opts) {
    check_dim(sys, x0, "initial state");
    if (!in_flow_set(sys, x0, sys.tol.membership) && !in_jump_set(sys, x0, sys.tol.membership))
        throw HybridError(ErrorCode::OutsideStateSpace, "initial state is outside C and D");

    HybridArc arc;
    const double t_final = t0 + horizon;
    double t = t0;
    Vec x = x0;
    int j = 0;
    double interval_start = t0;
    std::vector<Sample> current;
    auto deriv = [&](double tt, const Vec& xx) { return flow_rhs(sys, tt, xx, u ? u(tt, xx) : 0.0); };

    auto close_interval = [&](double t_end) {
        arc.domain.intervals.push_back({interval_start, t_end, j});
        arc.samples.push_back(std::move(current));
        current.clear();
    };

    for (;;) {
        if (in_jump_set(sys, x, sys.tol.event)) {
            if (current.empty()) current.push_back({t, x, deriv(t, x)});
            const Vec post = jump_map(sys, x);
            const bool too_close = !arc.jumps.empty() && t - arc.jumps.back().t < limits.zeno_window;
            arc.jumps.push_back({t, j, x, post});
            close_interval(t);
            ++j;
            interval_start = t;
            x = post;
            if (static_cast<int>(arc.jumps.size()) > limits.max_jumps || too_close) {
                current.push_back({t, x, deriv(t, x)});
                close_interval(t);
                arc.termination = Termination::ZenoLimit;
                return arc;
            }
            continue;
        }

        FlowSegment seg = integrate_flow(sys, x, t, t_final, u, opts, t0);
        const std::size_t skip = current.empty() ? 0 : 1;
        for (std::size_t k = skip; k < seg.samples.size(); ++k) current.push_back(std::move(seg.samples[k]));
        t = current.back().t;
        x = current.back().x;
        switch (seg.end) {
            case SegmentEnd::Horizon:
                close_interval(t);
                arc.termination = Termination::HorizonReached;
                return arc;
            case SegmentEnd::Escape:
                close_interval(t);
                arc.termination = Termination::EscapeDetected;
                return arc;
            case SegmentEnd::LeftFlowSet:
                close_interval(t);
                arc.termination = Termination::LeftFlowSet;
                return arc;
            case SegmentEnd::Guard:
                if (!in_jump_set(sys, x, sys.tol.event)) {
                    close_interval(t);
                    arc.termination = Termination::LeftFlowSet;
                    return arc;
                }
                break;
        }
    }
}

double flow_residual(const AffineHybridSystem& sys, const HybridArc& arc, const InputFn& u) {
    double worst = 0.0;
    for (const auto& iv : arc.samples) {
        for (std::size_t k = 1; k + 1 < iv.size(); ++k) {
            const double h0 = iv[k].t - iv[k - 1].t;
            const double h1 = iv[k + 1].t - iv[k].t;
            if (h0 <= 0.0 || h1 <= 0.0) continue;
            // three-point derivative on a possibly nonuniform grid
            const Vec fd = -h1 / (h0 * (h0 + h1)) * iv[k - 1].x + (h1 - h0) / (h0 * h1) * iv[k].x +
                           h0 / (h1 * (h0 + h1)) * iv[k + 1].x;
            const Vec f = flow_rhs(sys, iv[k].t, iv[k].x, u ? u(iv[k].t, iv[k].x) : 0.0);
            worst = std::max(worst, (fd - f).norm() / (1.0 + iv[k].x.norm()));
        }
    }
    return worst;
}

}  // namespace hybridtrack
