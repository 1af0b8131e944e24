#include "hybridtrack/combined.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hybridtrack {

const char* to_string(Attribution a) {
    switch (a) {
        case Attribution::XJumped: return "XJumped";
        case Attribution::YJumped: return "YJumped";
        case Attribution::BothEnumerated: return "BothEnumerated";
    }
    return "Unknown";
}

namespace {

constexpr int kEventsPerComponent = 3;  // guard, image guard, excluded ball

std::vector<EventSpec> component_events(const AffineHybridSystem& sys, Eigen::Index offset) {
    const Eigen::Index n = sys.dim();
    std::vector<EventSpec> ev;
    ev.push_back({[&sys, offset, n](double, const Vec& w) { return sys.J.dot(w.segment(offset, n)) + sys.K; },
                  sys.tol.event});
    ev.push_back({[&sys, offset, n](double, const Vec& w) { return image_guard_value(sys, w.segment(offset, n)); },
                  sys.tol.event});
    ev.push_back({[&sys, offset, n](double, const Vec& w) {
                      if (!sys.exclusion) return -1.0;
                      return sys.exclusion->radius - (w.segment(offset, n) - sys.exclusion->center).norm();
                  },
                  sys.tol.event});
    return ev;
}

}  // namespace

CombinedArc simulate_combined(const AffineHybridSystem& sys, const Vec& x0, const Vec& y0, double t0,
                              double horizon, const InputFn& u_x, const PairInputFn& u_y,
                              const CombinedOptions& options) {
    check_dim(sys, x0, "x0");
    check_dim(sys, y0, "y0");
    const double mt = sys.tol.membership;
    if (!in_flow_set(sys, x0, mt) && !in_jump_set(sys, x0, mt))
        throw HybridError(ErrorCode::OutsideStateSpace, "x0 is outside C and D");
    if (!in_flow_set(sys, y0, mt) && !in_jump_set(sys, y0, mt))
        throw HybridError(ErrorCode::OutsideStateSpace, "y0 is outside C and D");

    const Eigen::Index n = sys.dim();
    const auto& lim = options.limits;
    const double t_final = t0 + horizon;
    const HybridArc* ref = options.reference;
    if (ref) {
        if (ref->samples.empty() || std::abs(ref->t_begin() - t0) > 1e-12 * std::max(1.0, std::abs(t0)))
            throw HybridError(ErrorCode::OutOfHorizon, "reference arc does not start at t0");
        if (ref->t_end() < t_final - 1e-12 * std::max(1.0, std::abs(t_final)))
            throw HybridError(ErrorCode::OutOfHorizon, "reference arc ends before the horizon");
        if ((ref->samples.front().front().x - x0).norm() > mt * (1.0 + x0.norm()))
            throw HybridError(ErrorCode::InvalidDimension, "x0 differs from the reference initial state");
    }

    CombinedArc arc;
    double t = t0;
    Vec x = x0, y = y0;
    int j = 0, jx = 0, jy = 0;
    double interval_start = t0;
    std::vector<CombinedSample> current;
    double last_jump[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    std::size_t next_decision = 0;
    double enumerated_at = std::numeric_limits<double>::quiet_NaN();
    int mode = options.modes ? options.modes->classify(t, x, y) : 0;

    auto ux = [&](double tt, const Vec& xx) { return u_x ? u_x(tt, xx) : 0.0; };
    auto uy = [&](double tt, const Vec& xx, const Vec& yy, int m) { return u_y ? u_y(tt, xx, yy, m) : 0.0; };
    auto make_sample = [&](double tt, const Vec& xx, const Vec& yy) {
        const double v = uy(tt, xx, yy, mode);
        return CombinedSample{tt, xx, yy, flow_rhs(sys, tt, xx, ux(tt, xx)), flow_rhs(sys, tt, yy, v), v, mode};
    };
    auto close_interval = [&](double t_end) {
        arc.domain.intervals.push_back({interval_start, t_end, j});
        arc.samples.push_back(std::move(current));
        arc.jx.push_back(jx);
        arc.jy.push_back(jy);
        current.clear();
    };
    // stored reference on its current interval
    auto x_ref = [&](double tt) {
        const auto& iv = ref->samples[static_cast<std::size_t>(jx)];
        return ref->state_at(std::clamp(tt, iv.front().t, iv.back().t), jx);
    };
    auto ref_jump_due = [&]() {
        return jx < static_cast<int>(ref->jumps.size()) && ref->jumps[static_cast<std::size_t>(jx)].t <= t;
    };

    // Events over the integrated state: (x, y) jointly, or y alone when x follows the reference.
    const Eigen::Index y_offset = ref ? 0 : n;
    std::vector<EventSpec> events;
    if (!ref) events = component_events(sys, 0);
    for (auto& e : component_events(sys, y_offset)) events.push_back(std::move(e));
    const int first_y_event = ref ? 0 : kEventsPerComponent;
    const int mode_event = static_cast<int>(events.size());
    auto split = [&](double tt, const Vec& w) -> std::pair<Vec, Vec> {
        if (ref) return {x_ref(tt), w};
        return {w.head(n), w.tail(n)};
    };
    if (options.modes)
        events.push_back({[&](double tt, const Vec& w) {
                              const auto [xx, yy] = split(tt, w);
                              return options.modes->exit_value(tt, xx, yy, mode);
                          },
                          sys.tol.event});

    RhsFn rhs = [&](double tt, const Vec& w, Vec& dw) {
        const auto [xx, yy] = split(tt, w);
        if (ref) {
            dw = flow_rhs(sys, tt, yy, uy(tt, xx, yy, mode));
            return;
        }
        dw.resize(2 * n);
        dw.head(n) = flow_rhs(sys, tt, xx, ux(tt, xx));
        dw.tail(n) = flow_rhs(sys, tt, yy, uy(tt, xx, yy, mode));
    };
    auto state_vector = [&]() -> Vec {
        if (ref) return y;
        Vec w(2 * n);
        w << x, y;
        return w;
    };

    std::vector<int> disarmed;
    auto near_zero_events = [&](double tt, const Vec& w) {
        std::vector<int> out;
        for (int k = 0; k < static_cast<int>(events.size()); ++k)
            if (std::abs(events[static_cast<std::size_t>(k)].value(tt, w)) <= 10 * sys.tol.event) out.push_back(k);
        return out;
    };

    for (;;) {
        const bool xD = ref ? ref_jump_due() : in_jump_set(sys, x);
        const bool yD = in_jump_set(sys, y);
        if (xD || yD) {
            Component which = xD ? Component::X : Component::Y;
            Attribution att = xD ? Attribution::XJumped : Attribution::YJumped;
            if (xD && yD) {
                switch (options.policy) {
                    case BranchPolicy::XFirst: break;
                    case BranchPolicy::YFirst:
                        which = Component::Y;
                        att = Attribution::YJumped;
                        break;
                    case BranchPolicy::Strict:
                        throw HybridError(ErrorCode::AttributionAmbiguous,
                                          "both components are in the jump set at t=" + std::to_string(t));
                    case BranchPolicy::EnumerateBoth: {
                        const int d = next_decision < options.decisions.size() ? options.decisions[next_decision] : 0;
                        ++next_decision;
                        arc.decisions.push_back(d);
                        which = d == 0 ? Component::X : Component::Y;
                        att = Attribution::BothEnumerated;
                        enumerated_at = t;
                        break;
                    }
                }
            } else if (t == enumerated_at) {
                // second half of an enumerated simultaneous jump
                att = Attribution::BothEnumerated;
                enumerated_at = std::numeric_limits<double>::quiet_NaN();
            }
            if (current.empty()) current.push_back(make_sample(t, x, y));
            CombinedJump rec{t, j, att, which, x, y, x, y};
            const int c = which == Component::X ? 0 : 1;
            if (c == 0)
                x = ref ? ref->jumps[static_cast<std::size_t>(jx)].post : jump_map(sys, x);
            else
                y = jump_map(sys, y);
            rec.post_x = x;
            rec.post_y = y;
            const bool too_close = t - last_jump[c] < lim.zeno_window;
            last_jump[c] = t;
            arc.jumps.push_back(std::move(rec));
            close_interval(t);
            ++j;
            ++(c == 0 ? jx : jy);
            interval_start = t;
            disarmed.clear();
            if (options.modes) mode = options.modes->classify(t, x, y);
            if ((c == 0 ? jx : jy) > lim.max_jumps || too_close) {
                current.push_back(make_sample(t, x, y));
                close_interval(t);
                arc.termination = Termination::ZenoLimit;
                arc.terminated_by = which;
                return arc;
            }
            continue;
        }

        double t_stop = t_final;
        if (ref && jx < static_cast<int>(ref->jumps.size()))
            t_stop = std::min(t_stop, ref->jumps[static_cast<std::size_t>(jx)].t);
        FlowOutcome fo = integrate_until(rhs, t, state_vector(), t_stop, events, options.integrator, t0, disarmed);
        disarmed.clear();
        const std::size_t skip = current.empty() ? 0 : 1;
        for (std::size_t k = skip; k < fo.nodes.size(); ++k) {
            const Node& nd = fo.nodes[k];
            const auto [xx, yy] = split(nd.t, nd.w);
            const Vec dx = ref ? flow_rhs(sys, nd.t, xx, ux(nd.t, xx)) : Vec(nd.dw.head(n));
            current.push_back({nd.t, xx, yy, dx, nd.dw.tail(n), uy(nd.t, xx, yy, mode), mode});
        }
        t = current.back().t;
        x = current.back().x;
        y = current.back().y;

        if (fo.stop == FlowStop::Horizon) {
            if (t < t_final) continue;  // reached a reference jump
            close_interval(t);
            arc.termination = Termination::HorizonReached;
            return arc;
        }
        if (fo.stop == FlowStop::Escape) {
            close_interval(t);
            arc.termination = Termination::EscapeDetected;
            arc.terminated_by = x.norm() >= y.norm() ? Component::X : Component::Y;
            return arc;
        }
        const Vec w = state_vector();
        if (fo.event == mode_event) {
            mode = options.modes->classify(t, x, y);
            current.back().mode = mode;
            current.back().u_y = uy(t, x, y, mode);
            current.back().dy = flow_rhs(sys, t, y, current.back().u_y);
            disarmed = near_zero_events(t, w);
            continue;
        }
        const int comp = fo.event >= first_y_event ? 1 : 0;
        const int kind = (fo.event - (comp == 1 ? first_y_event : 0)) % kEventsPerComponent;
        const Vec& s = comp == 0 ? x : y;
        const GuardValues gv = guard_values(sys, s);
        if (kind != 2 && std::abs(gv.g) <= sys.tol.event) {
            // in D: handled at the top of the loop; otherwise the guard hyperplane is crossed outside D
            if (!in_jump_set(sys, s)) disarmed = near_zero_events(t, w);
            continue;
        }
        close_interval(t);
        arc.termination = Termination::LeftFlowSet;
        arc.terminated_by = comp == 0 ? Component::X : Component::Y;
        return arc;
    }
}

Enumeration enumerate_combined(const AffineHybridSystem& sys, const Vec& x0, const Vec& y0, double t0,
                               double horizon, const InputFn& u_x, const PairInputFn& u_y, CombinedOptions options,
                               int max_depth) {
    options.policy = BranchPolicy::EnumerateBoth;
    Enumeration out;
    std::vector<std::vector<int>> stack{{}};
    while (!stack.empty()) {
        options.decisions = std::move(stack.back());
        stack.pop_back();
        CombinedArc arc = simulate_combined(sys, x0, y0, t0, horizon, u_x, u_y, options);
        const std::size_t fixed = options.decisions.size();
        const std::size_t taken = arc.decisions.size();
        if (taken > static_cast<std::size_t>(max_depth)) out.depth_capped = true;
        // each defaulted decision (x first) spawns the alternative branch
        for (std::size_t i = fixed; i < std::min(taken, static_cast<std::size_t>(max_depth)); ++i) {
            std::vector<int> prefix(arc.decisions.begin(), arc.decisions.begin() + static_cast<std::ptrdiff_t>(i));
            prefix.push_back(1);
            stack.push_back(std::move(prefix));
        }
        out.arcs.push_back(std::move(arc));
    }
    return out;
}

Reparameterized reparameterize(const CombinedArc& combined) {
    Reparameterized out;
    out.jx = combined.jx;
    out.jy = combined.jy;
    auto extract = [&](bool first, HybridArc& arc) {
        const auto& counter = first ? combined.jx : combined.jy;
        int prev = -1;
        for (std::size_t k = 0; k < combined.samples.size(); ++k) {
            const auto& iv = combined.domain.intervals[k];
            if (counter[k] != prev) {
                arc.domain.intervals.push_back({iv.t_begin, iv.t_end, counter[k]});
                arc.samples.emplace_back();
                prev = counter[k];
            }
            arc.domain.intervals.back().t_end = iv.t_end;
            auto& dst = arc.samples.back();
            for (const auto& s : combined.samples[k]) {
                if (!dst.empty() && dst.back().t == s.t) continue;
                dst.push_back({s.t, first ? s.x : s.y, first ? s.dx : s.dy});
            }
        }
        for (const auto& jr : combined.jumps) {
            if (jr.jumped != (first ? Component::X : Component::Y)) continue;
            const int before = counter[static_cast<std::size_t>(jr.j)];
            arc.jumps.push_back({jr.t, before, first ? jr.pre_x : jr.pre_y, first ? jr.post_x : jr.post_y});
        }
        arc.termination = combined.termination;
    };
    extract(true, out.arc_x);
    extract(false, out.arc_y);
    return out;
}

std::vector<DistanceSample> distance_profile(const AffineHybridSystem& sys, const CombinedArc& combined) {
    const JumpChainSet chains = build_jump_chains(sys);
    std::vector<DistanceSample> out;
    for (std::size_t k = 0; k < combined.samples.size(); ++k) {
        const int j = combined.domain.intervals[k].j;
        for (const auto& s : combined.samples[k]) out.push_back({s.t, j, distance(sys, chains, s.x, s.y)});
    }
    return out;
}

}  // namespace hybridtrack
