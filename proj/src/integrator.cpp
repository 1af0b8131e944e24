#include "hybridtrack/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hybridtrack {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepResult {
    Vec w;
    Vec dw;
    Vec err;
};

StepResult dp_step(const RhsFn& f, double t, const Vec& w, const Vec& k1, double h) {
    const Eigen::Index n = w.size();
    Vec k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    f(t + c2 * h, w + h * (a21 * k1), k2);
    f(t + c3 * h, w + h * (a31 * k1 + a32 * k2), k3);
    f(t + c4 * h, w + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
    f(t + c5 * h, w + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
    f(t + h, w + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
    StepResult r;
    r.w = w + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    f(t + h, r.w, k7);
    r.err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    r.dw = k7;
    return r;
}

double error_norm(const Vec& err, const Vec& w0, const Vec& w1, const IntegratorOptions& o) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < err.size(); ++i) {
        const double sc = o.atol + o.rtol * std::max(std::abs(w0(i)), std::abs(w1(i)));
        const double q = err(i) / sc;
        acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(err.size()));
}

struct Located {
    double t;
    Node node;
};

// Root of an armed event inside [a, b], where value(a) <= 0 < value(b).
Located locate_event(const RhsFn& f, const EventSpec& ev, const Node& a, const Node& b) {
    auto interp_value = [&](double t) { return ev.value(t, hermite(a, b, t)); };
    double lo = a.t, hi = b.t;
    double flo = ev.value(a.t, a.w), fhi = ev.value(b.t, b.w);
    // armed on the surface with a slightly positive start value: bracket from inside
    for (int k = 1; k < 60 && flo > 0.0; ++k) {
        const double tk = a.t + (b.t - a.t) * std::ldexp(1.0, -k);
        const double fk = interp_value(tk);
        if (fk <= 0.0) {
            lo = tk;
            flo = fk;
        }
    }
    const double lo_bound = lo;
    int side = 0;
    double tm = hi;
    for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
        tm = (flo * hi - fhi * lo) / (flo - fhi);
        if (!(tm > lo && tm < hi)) tm = 0.5 * (lo + hi);
        const double fm = interp_value(tm);
        if (fm > 0.0) {
            hi = tm;
            fhi = fm;
            if (side == 1) flo *= 0.5;
            side = 1;
        } else {
            lo = tm;
            flo = fm;
            if (side == -1) fhi *= 0.5;
            side = -1;
        }
    }

    // Exact re-step from the step start, then Newton on the event value along the flow.
    auto exact = [&](double t) {
        Node nd;
        nd.t = t;
        if (t == a.t) {
            nd.w = a.w;
            nd.dw = a.dw;
        } else {
            const StepResult r = dp_step(f, a.t, a.w, a.dw, t - a.t);
            nd.w = r.w;
            nd.dw = r.dw;
        }
        return nd;
    };
    double t = tm;
    Node nd = exact(t);
    double g = ev.value(t, nd.w);
    Node best = nd;
    double best_g = g;
    for (int it = 0; it < 12 && std::abs(g) > ev.tol; ++it) {
        const double delta = 1e-7 * std::max(1e-3, b.t - a.t);
        const double g2 = ev.value(t + delta, nd.w + delta * nd.dw);
        const double slope = (g2 - g) / delta;
        if (slope == 0.0 || !std::isfinite(slope)) break;
        t = std::clamp(t - g / slope, lo_bound, b.t);
        nd = exact(t);
        g = ev.value(t, nd.w);
        if (std::abs(g) < std::abs(best_g)) {
            best = nd;
            best_g = g;
        }
    }
    return {best.t, best};
}

}  // namespace

Vec hermite(const Node& a, const Node& b, double t) {
    const double h = b.t - a.t;
    if (h == 0.0) return a.w;
    const double s = (t - a.t) / h;
    const double s2 = s * s, s3 = s2 * s;
    const double h00 = 2 * s3 - 3 * s2 + 1;
    const double h10 = s3 - 2 * s2 + s;
    const double h01 = -2 * s3 + 3 * s2;
    const double h11 = s3 - s2;
    return h00 * a.w + (h10 * h) * a.dw + h01 * b.w + (h11 * h) * b.dw;
}

FlowOutcome integrate_until(const RhsFn& rhs, double t0, const Vec& w0, double t_end,
                            const std::vector<EventSpec>& events, const IntegratorOptions& opts,
                            double grid_origin, const std::vector<int>& disarmed) {
    FlowOutcome out;
    Node cur;
    cur.t = t0;
    cur.w = w0;
    cur.dw.resize(w0.size());
    rhs(t0, w0, cur.dw);
    out.nodes.push_back(cur);

    if (!(w0.norm() <= opts.escape_bound)) {
        out.stop = FlowStop::Escape;
        return out;
    }

    std::vector<char> armed(events.size(), 0);
    std::vector<char> strict(events.size(), 0);
    for (int k : disarmed) strict[static_cast<std::size_t>(k)] = 1;
    auto arms = [&](std::size_t k, double v) { return strict[k] ? v < -events[k].tol : v < 0.0; };
    for (std::size_t k = 0; k < events.size(); ++k) {
        const double v0 = events[k].value(t0, w0);
        armed[k] = arms(k, v0) ? 1 : 0;
        // a start on the surface arms when the flow points inward
        if (!armed[k] && !strict[k] && std::abs(v0) <= events[k].tol) {
            const double delta = 1e-7 * opts.sample_dt;
            armed[k] = events[k].value(t0 + delta, w0 + delta * cur.dw) < v0 ? 1 : 0;
        }
    }

    const double dt = opts.sample_dt;
    auto next_grid = [&](double t) {
        double k = std::floor((t - grid_origin) / dt);
        double g = grid_origin + k * dt;
        while (g <= t * (1.0 + 1e-15) + 1e-14) g = grid_origin + (++k) * dt;
        return g;
    };

    double h = dt;
    while (cur.t < t_end) {
        const double t_grid = std::min(next_grid(cur.t), t_end);
        double target = t_grid;
        double step = std::min(h, target - cur.t);
        bool lands = step >= target - cur.t;
        if (lands) step = target - cur.t;
        if (step < opts.h_min && !lands)
            throw HybridError(ErrorCode::IntegratorStall, "step size underflow at t = " + std::to_string(cur.t));

        StepResult r = dp_step(rhs, cur.t, cur.w, cur.dw, step);
        const double err = error_norm(r.err, cur.w, r.w, opts);
        if (!std::isfinite(err) || err > 1.0) {
            h = step * std::max(0.2, 0.9 * std::pow(std::isfinite(err) ? err : 1e10, -0.2));
            if (h < opts.h_min)
                throw HybridError(ErrorCode::IntegratorStall, "step size underflow at t = " + std::to_string(cur.t));
            continue;
        }
        const double grow = err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
        h = std::max(step * grow, lands ? h : step * grow);

        Node next;
        next.t = lands ? target : cur.t + step;
        next.w = std::move(r.w);
        next.dw = std::move(r.dw);

        // Earliest armed event crossing inside the step.
        int hit = -1;
        Located hit_loc{};
        for (std::size_t k = 0; k < events.size(); ++k) {
            const double v1 = events[k].value(next.t, next.w);
            if (!armed[k] && !strict[k] && v1 > events[k].tol) {
                // crossed without ever arming (start inside the band): stop at the step start
                if (hit < 0 || cur.t < hit_loc.t) {
                    hit = static_cast<int>(k);
                    hit_loc = Located{cur.t, cur};
                }
            } else if (armed[k] && v1 > 0.0) {
                Located loc = locate_event(rhs, events[k], cur, next);
                if (hit < 0 || loc.t < hit_loc.t) {
                    hit = static_cast<int>(k);
                    hit_loc = std::move(loc);
                }
            }
        }
        if (hit >= 0) {
            if (hit_loc.t != out.nodes.back().t) out.nodes.push_back(hit_loc.node);
            out.stop = FlowStop::Event;
            out.event = hit;
            return out;
        }
        for (std::size_t k = 0; k < events.size(); ++k)
            if (!armed[k] && arms(k, events[k].value(next.t, next.w))) armed[k] = 1;

        cur = std::move(next);
        if (lands) out.nodes.push_back(cur);
        if (!(cur.w.norm() <= opts.escape_bound)) {
            if (!lands) out.nodes.push_back(cur);
            out.stop = FlowStop::Escape;
            return out;
        }
    }
    if (out.nodes.back().t != cur.t) out.nodes.push_back(cur);
    out.stop = FlowStop::Horizon;
    return out;
}

}  // namespace hybridtrack
