#include "hybridtrack/models.hpp"

#include <cmath>

namespace hybridtrack {

namespace {

Mat m2(double a, double b, double c, double d) {
    Mat m(2, 2);
    m << a, b, c, d;
    return m;
}

Vec v2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

RowVec r2(double a, double b) {
    RowVec v(2);
    v << a, b;
    return v;
}

// height x1 >= 0, velocity x2; impacts at x1 = 0 with x2 <= -r reverse the velocity scaled by eps
AffineHybridSystem impact_plant(double eps, double r) {
    AffineHybridSystem s;
    s.A = m2(0, 1, 0, 0);
    s.B = v2(0, 1);
    s.E = v2(0, 0);
    s.L = -eps * Mat::Identity(2, 2);
    s.H = v2(0, 0);
    s.J = r2(-1, 0);
    s.K = 0.0;
    s.z1 = r2(0, 1);
    s.z2 = 0.0;
    s.s = -1;
    s.jump_margin = r;
    s.exclusion = ExclusionBall{v2(0, -(1 - eps) * r / 2), (1 + eps) * r / 2};
    return s;
}

}  // namespace

GuardGeometry impact_geometry(double eps, double r) {
    return {eps * r / 2, 0.99 * (r / 2) * std::sqrt(eps * eps + 2 * eps), 0.99 * std::sqrt(eps / (1 + eps))};
}

Scenario bouncing_ball(double r) {
    Scenario sc;
    sc.name = "bouncing_ball";
    sc.system = impact_plant(1.0, r);
    sc.system.E = v2(0, -9.81);
    sc.geometry = impact_geometry(1.0, r);

    LyapunovDesign d;
    d.P0 = m2(2.25, 0.5, 0.5, 2);
    d.Ps = d.P0;
    d.M = v2(0, 0);
    d.lambda_c = -0.25;
    d.lambda_d = 0.0;
    sc.design = derive_constants(sc.system, d, sc.geometry);

    const RowVec c = -r2(1, 0.5);
    sc.controller.gains = {c, c, c};
    sc.reference_start = v2(0, 10);
    sc.tracking_start = v2(0, 3);
    sc.horizon = 15.0;
    sc.expected = StabilityCase::Case1;
    sc.sampling_scales = {r / 2, r, 3 * r, 0.1, 10.0};
    return sc;
}

Scenario dissipative_oscillator(double r) {
    const double eps = 0.9, k = 1.0, c = 0.02, rest = 1.0;
    Scenario sc;
    sc.name = "dissipative_oscillator";
    sc.system = impact_plant(eps, r);
    sc.system.A = m2(0, 1, -k, -c);
    sc.system.E = v2(0, k * rest);
    sc.geometry = impact_geometry(eps, r);

    LyapunovDesign d;
    d.P0 = Mat::Identity(2, 2);
    d.Ps = d.P0 / eps;
    d.M = v2(0, 0);
    d.lambda_c = 0.0;
    d.lambda_d = std::log(eps);
    sc.design = derive_constants(sc.system, d, sc.geometry);

    sc.controller.gains = {r2(0, 0), r2(0, 0), r2(0, 0)};
    sc.controller.u_ff = {0.0, 100.0, 0.4};
    sc.reference_start = v2(50, 0);
    sc.tracking_start = v2(100, 0);
    sc.neighbor_start = v2(51, 0);
    sc.horizon = 60.0;
    sc.expected = StabilityCase::Case3;
    sc.sampling_scales = {r / 2, r, 3 * r, 0.1, 10.0, 100.0};
    sc.dwell = measure_maximal_dwell(simulate_open_loop(sc, sc.reference_start, sc.horizon).domain);
    return sc;
}

HybridArc simulate_open_loop(const Scenario& sc, const Vec& x0, double horizon) {
    const Feedforward uff = sc.controller.u_ff;
    return simulate(sc.system, x0, sc.t0, horizon, [uff](double t, const Vec&) { return uff(t); });
}

Scenario attach_reference(Scenario sc, double extra) {
    sc.controller.reference =
        std::make_shared<HybridArc>(simulate_open_loop(sc, sc.reference_start, sc.horizon + extra));
    return sc;
}

DwellTimeSpec measure_maximal_dwell(const HybridTimeDomain& domain, double N0) {
    const int jumps = domain.jump_count();
    if (jumps == 0) throw HybridError(ErrorCode::InvalidGeometry, "no jumps to measure a dwell time from");
    const double span = domain.intervals.back().t_end - domain.intervals.front().t_begin;
    DwellTimeSpec spec{span / jumps / 0.9, N0, DwellKind::MaximalAverage};
    for (int i = 0; i < 1000 && !check_inter_jump_time(domain, spec).holds; ++i) spec.tau *= 1.01;
    if (!check_inter_jump_time(domain, spec).holds)
        throw HybridError(ErrorCode::InvalidGeometry, "no maximal dwell time found for the domain");
    return spec;
}

bool ScenarioCheck::ok() const {
    return jump.ok && flow.ok && geometry.holds() && sublevel.delta1 > 0 && sublevel.vL > 0 &&
           (!dwell || dwell->holds) && verdict.which != StabilityCase::Inconclusive;
}

ScenarioCheck self_check(const Scenario& sc, int samples, unsigned seed) {
    sc.system.validate();
    validate_design(sc.system, sc.design);
    ScenarioCheck out;
    out.jump = check_jump_conditions(sc.system, sc.design);
    out.flow = check_flow_lmis(sc.system, sc.design, sc.controller.gains);
    const Vec center = Vec::Zero(sc.system.dim());
    out.geometry = assess_guard_geometry(sc.system, sc.geometry, multiscale_sampler(sc.system, center, sc.sampling_scales),
                                         samples, seed);
    out.sublevel = estimate_sublevel(sc.system, sc.design, sc.geometry);
    out.class_k = class_k_bounds(sc.system, sc.design);
    if (sc.dwell) {
        if (!sc.controller.reference)
            throw HybridError(ErrorCode::OutOfHorizon, "a reference arc is needed to check the dwell spec");
        out.dwell = check_inter_jump_time(sc.controller.reference->domain, *sc.dwell);
    }
    out.verdict = stability_verdict(sc.design, sc.dwell);
    return out;
}

}  // namespace hybridtrack
