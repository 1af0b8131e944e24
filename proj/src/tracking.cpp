#include "hybridtrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>

namespace hybridtrack {

namespace {

Vec drift(const AffineHybridSystem& sys, const Vec& x, double u) { return sys.A * x + sys.B * u + sys.E; }

}  // namespace

void validate_controller(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl) {
    const Eigen::Index n = sys.dim();
    if (sys.B.norm() == 0.0) throw HybridError(ErrorCode::InvalidSystem, "B must be nonzero");
    for (const RowVec* c : {&ctrl.gains.c0, &ctrl.gains.c1, &ctrl.gains.c2})
        if (c->size() != n) throw HybridError(ErrorCode::InvalidDimension, "gains must have length " + std::to_string(n));
    const Vec b2 = beta2(sys, design);
    if (b2.norm() == 0.0) throw HybridError(ErrorCode::SingularDesign, "beta2 vanishes");
    gbar_inverse(sys, design, Vec::Zero(n));  // throws on singular L + MJ
}

Vec beta2(const AffineHybridSystem& sys, const LyapunovDesign& design) { return -jump_linear_part(sys, design) * sys.B; }

Vec beta4(const AffineHybridSystem& sys) { return -sys.B; }

Vec reference_selector(const HybridArc& reference, double t) {
    const auto& iv = reference.domain.intervals;
    if (iv.empty()) throw HybridError(ErrorCode::OutOfHorizon, "empty reference");
    const double slack = 1e-12 * std::max(1.0, std::abs(t));
    if (t < iv.front().t_begin - slack || t > iv.back().t_end + slack)
        throw HybridError(ErrorCode::OutOfHorizon, "t = " + std::to_string(t) + " is outside the reference arc");
    // first interval whose end reaches t: the minimal j at a jump instant
    const auto it = std::lower_bound(iv.begin(), iv.end(), t, [](const DomainInterval& d, double tt) { return d.t_end < tt; });
    const DomainInterval& d = it == iv.end() ? iv.back() : *it;
    const auto& samples = reference.samples[static_cast<std::size_t>(d.j)];
    return reference.state_at(std::clamp(t, samples.front().t, samples.back().t), d.j);
}

Betas betas_at(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl, double t,
               const Vec& xb) {
    const double uff = ctrl.u_ff(t);
    const Mat Lm = jump_linear_part(sys, design);
    const Vec fx = drift(sys, xb, uff);
    Betas b;
    b.beta1 = fx - Lm * drift(sys, gbar_inverse(sys, design, xb), uff);
    b.beta3 = Lm * fx - drift(sys, gbar(sys, design, xb), uff);
    return b;
}

Betas betas(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl, double t) {
    if (!ctrl.reference) throw HybridError(ErrorCode::OutOfHorizon, "controller has no reference arc");
    return betas_at(sys, design, ctrl, t, reference_selector(*ctrl.reference, t));
}

double span_condition_residual(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl,
                               const std::vector<double>& t_grid) {
    const Vec b2 = beta2(sys, design), b4 = beta4(sys);
    auto off_span = [](const Vec& v, const Vec& dir) { return (v - dir * (dir.dot(v) / dir.squaredNorm())).norm(); };
    double worst = 0.0;
    for (double t : t_grid) {
        const Betas b = betas(sys, design, ctrl, t);
        worst = std::max({worst, off_span(b.beta1, b2), off_span(b.beta3, b4)});
    }
    return worst;
}

double feedback_in_region(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl,
                          double t, const Vec& xb, const Vec& y, Region region) {
    switch (region) {
        case Region::S0:
            return -ctrl.gains.c0.dot(xb - y);
        case Region::S1: {
            const Vec b2 = beta2(sys, design);
            const Betas b = betas_at(sys, design, ctrl, t, xb);
            return -b2.dot(b.beta1) / b2.squaredNorm() + ctrl.gains.c1.dot(xb - gbar(sys, design, y));
        }
        case Region::S2: {
            const Vec b4 = beta4(sys);
            const Betas b = betas_at(sys, design, ctrl, t, xb);
            return -b4.dot(b.beta3) / b4.squaredNorm() - ctrl.gains.c2.dot(gbar(sys, design, xb) - y);
        }
    }
    return 0.0;
}

FeedbackValue feedback(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl, double t,
                       const Vec& y) {
    if (!ctrl.reference) throw HybridError(ErrorCode::OutOfHorizon, "controller has no reference arc");
    const Vec xb = reference_selector(*ctrl.reference, t);
    const Region region = lyapunov_value(sys, design, xb, y).region;
    return {feedback_in_region(sys, design, ctrl, t, xb, y, region), region};
}

std::vector<JumpPair> jump_time_pairs(const CombinedArc& arc) {
    std::vector<double> tx, ty;
    for (const auto& jmp : arc.jumps) (jmp.jumped == Component::X ? tx : ty).push_back(jmp.t);
    std::vector<JumpPair> out;
    if (ty.empty()) return out;
    for (double t : tx) {
        const auto it = std::lower_bound(ty.begin(), ty.end(), t);
        double best = it == ty.end() ? ty.back() : *it;
        if (it != ty.begin() && std::abs(*std::prev(it) - t) < std::abs(best - t)) best = *std::prev(it);
        out.push_back({t, best});
    }
    return out;
}

ClosedLoopResult closed_loop_simulate(const AffineHybridSystem& sys, const LyapunovDesign& design,
                                      const ControllerDesign& ctrl, const Vec& y0, double t0, double horizon,
                                      const ClosedLoopOptions& options) {
    validate_controller(sys, design, ctrl);
    if (!ctrl.reference) throw HybridError(ErrorCode::OutOfHorizon, "controller has no reference arc");
    const HybridArc& ref = *ctrl.reference;
    if (ref.samples.empty()) throw HybridError(ErrorCode::OutOfHorizon, "empty reference");

    const double h = options.hysteresis;
    ModeSwitcher modes;
    modes.classify = [&](double, const Vec& x, const Vec& y) {
        return static_cast<int>(lyapunov_value(sys, design, x, y).region);
    };
    modes.exit_value = [&, h](double, const Vec& x, const Vec& y, int mode) {
        const auto lv = lyapunov_value(sys, design, x, y);
        double other = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 3; ++k)
            if (k != mode) other = std::min(other, lv.branches[static_cast<std::size_t>(k)]);
        return lv.branches[static_cast<std::size_t>(mode)] - (1.0 + h) * other;
    };

    CombinedOptions copt;
    copt.policy = options.policy;
    copt.limits = options.limits;
    copt.integrator = options.integrator;
    copt.modes = modes;
    copt.reference = &ref;

    InputFn u_x = [&](double t, const Vec&) { return ctrl.u_ff(t); };
    PairInputFn u_y = [&](double t, const Vec& x, const Vec& y, int mode) {
        return ctrl.u_ff(t) + feedback_in_region(sys, design, ctrl, t, x, y, static_cast<Region>(mode));
    };

    ClosedLoopResult res;
    const Vec x0 = ref.samples.front().front().x;
    res.arc = simulate_combined(sys, x0, y0, t0, horizon, u_x, u_y, copt);
    res.distance = distance_profile(sys, res.arc);
    res.monitor = monitor_V_along_arc(sys, design, res.arc, options.monitor);
    for (std::size_t k = 0; k < res.arc.samples.size(); ++k) {
        const int j = res.arc.domain.intervals[k].j;
        for (const auto& s : res.arc.samples[k]) {
            const Region region = static_cast<Region>(s.mode);
            const double uff = ctrl.u_ff(s.t);
            res.control.push_back({s.t, j, region, uff, feedback_in_region(sys, design, ctrl, s.t, s.x, s.y, region)});
            if (lyapunov_value(sys, design, reference_selector(ref, s.t), s.y).region !=
                lyapunov_value(sys, design, s.x, s.y).region)
                ++res.selector_disagreements;
        }
    }
    return res;
}

}  // namespace hybridtrack
