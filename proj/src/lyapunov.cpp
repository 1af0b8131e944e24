#include "hybridtrack/lyapunov.hpp"

#include "hybridtrack/distance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hybridtrack {

namespace {

constexpr double kGuardBand = 1e-12;

double max_eig(const Mat& S) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

double min_eig(const Mat& S) {
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (S + S.transpose()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double max_singular(const Mat& A) {
    Eigen::JacobiSVD<Mat> svd(A);
    return svd.singularValues()(0);
}

double sq_norm(const Mat& P, const Vec& v) { return v.dot(P * v); }

Mat inverse_checked(const Mat& A, const char* what) {
    Eigen::JacobiSVD<Mat> svd(A);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-12 * sv(0)) throw HybridError(ErrorCode::SingularDesign, std::string(what) + " is singular");
    return A.inverse();
}

void check_symmetric_pd(const Mat& P, Eigen::Index n, const char* name) {
    if (P.rows() != n || P.cols() != n)
        throw HybridError(ErrorCode::InvalidDimension, std::string(name) + " must be " + std::to_string(n) + "x" + std::to_string(n));
    if ((P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, P.cwiseAbs().maxCoeff()))
        throw HybridError(ErrorCode::InvalidSystem, std::string(name) + " is not symmetric");
    if (min_eig(P) <= 0.0) throw HybridError(ErrorCode::InvalidSystem, std::string(name) + " is not positive definite");
}

}  // namespace

const char* to_string(Region r) {
    switch (r) {
        case Region::S0: return "S0";
        case Region::S1: return "S1";
        case Region::S2: return "S2";
    }
    return "?";
}

const char* to_string(StabilityCase c) {
    switch (c) {
        case StabilityCase::Case1: return "Case1";
        case StabilityCase::Case2: return "Case2";
        case StabilityCase::Case3: return "Case3";
        case StabilityCase::Inconclusive: return "Inconclusive";
    }
    return "?";
}

double gate_value(const AffineHybridSystem& sys, const LyapunovDesign& design) {
    const RowVec JLinv = sys.J * sys.L.inverse();
    return sys.s * (1.0 + JLinv.dot(design.M));
}

void validate_design(const AffineHybridSystem& sys, const LyapunovDesign& design) {
    const Eigen::Index n = sys.dim();
    check_symmetric_pd(design.P0, n, "P0");
    check_symmetric_pd(design.Ps, n, "Ps");
    if (design.M.size() != n) throw HybridError(ErrorCode::InvalidDimension, "M must have length " + std::to_string(n));
    if (!std::isfinite(design.lambda_c) || !std::isfinite(design.lambda_d))
        throw HybridError(ErrorCode::InvalidSystem, "rates must be finite");
    if (!(gate_value(sys, design) < 0.0))
        throw HybridError(ErrorCode::InvalidGeometry, "s(1 + J L^-1 M) must be negative");
}

Mat jump_linear_part(const AffineHybridSystem& sys, const LyapunovDesign& design) {
    return sys.L + design.M * sys.J;
}

Vec gbar(const AffineHybridSystem& sys, const LyapunovDesign& design, const Vec& x) {
    const double lift = std::max(0.0, sys.z1.dot(x) + sys.z2);
    Vec g = sys.L * x + sys.H + design.M * (sys.J.dot(x) + sys.K);
    if (lift > 0.0) g += (sys.s * lift) * (sys.L * sys.J.transpose());
    return g;
}

Vec gbar_inverse(const AffineHybridSystem& sys, const LyapunovDesign& design, const Vec& x) {
    const Mat Lm = jump_linear_part(sys, design);
    Eigen::JacobiSVD<Mat> svd(Lm);
    const auto& sv = svd.singularValues();
    if (sv(sv.size() - 1) < 1e-12 * sv(0)) throw HybridError(ErrorCode::SingularDesign, "L + MJ is singular");
    return Lm.fullPivLu().solve(x - sys.H - design.M * sys.K);
}

LyapunovValue lyapunov_value(const AffineHybridSystem& sys, const LyapunovDesign& design, const Vec& x, const Vec& y) {
    LyapunovValue out;
    out.branches[0] = sq_norm(design.P0, x - y);
    out.branches[1] = sq_norm(design.Ps, x - gbar(sys, design, y));
    out.branches[2] = sq_norm(design.Ps, gbar(sys, design, x) - y);
    const double vmin = *std::min_element(out.branches.begin(), out.branches.end());
    const double band = kGuardBand * std::max(1.0, vmin);
    for (int k = 0; k < 3; ++k)
        if (out.branches[static_cast<std::size_t>(k)] <= vmin + band) {
            out.region = static_cast<Region>(k);
            break;
        }
    out.V = vmin;
    return out;
}

MatrixCheck check_jump_conditions(const AffineHybridSystem& sys, const LyapunovDesign& design, double tol) {
    const Mat Lm = jump_linear_part(sys, design);
    const double ed = std::exp(design.lambda_d);
    MatrixCheck mc;
    mc.eig_margins = {max_eig(Lm.transpose() * design.Ps * Lm - ed * design.P0), max_eig(design.P0 - ed * design.Ps)};
    mc.ok = mc.eig_margins[0] <= tol && mc.eig_margins[1] <= tol;
    return mc;
}

MatrixCheck check_flow_lmis(const AffineHybridSystem& sys, const LyapunovDesign& design, const FlowGains& gains,
                            double tol) {
    const Eigen::Index n = sys.dim();
    for (const RowVec* c : {&gains.c0, &gains.c1, &gains.c2})
        if (c->size() != n) throw HybridError(ErrorCode::InvalidDimension, "gains must have length " + std::to_string(n));
    const Mat Lm = jump_linear_part(sys, design);
    const Mat Lminv = inverse_checked(Lm, "L + MJ");
    const Vec beta2 = -Lm * sys.B;
    const double lc = design.lambda_c;

    const Mat A0 = sys.A + sys.B * gains.c0;
    const Mat A1 = Lm * sys.A * Lminv + beta2 * gains.c1;
    const Mat A2 = sys.A + sys.B * gains.c2;
    MatrixCheck mc;
    mc.eig_margins = {
        max_eig(A0.transpose() * design.P0 + design.P0 * A0 - lc * design.P0),
        max_eig(design.Ps * A1 + A1.transpose() * design.Ps - lc * design.Ps),
        max_eig(design.Ps * A2 + A2.transpose() * design.Ps - lc * design.Ps),
    };
    mc.ok = std::all_of(mc.eig_margins.begin(), mc.eig_margins.end(), [tol](double m) { return m <= tol; });
    return mc;
}

double lyapunov_equation_residual(const Mat& Acl, const Mat& P, const Mat& Q) {
    if (Acl.rows() != Acl.cols() || P.rows() != Acl.rows() || P.cols() != Acl.cols() || Q.rows() != P.rows() ||
        Q.cols() != P.cols())
        throw HybridError(ErrorCode::InvalidDimension, "Acl, P and Q must be square of equal size");
    return (Acl.transpose() * P + P * Acl + Q).norm();
}

SublevelEstimate estimate_sublevel(const AffineHybridSystem& sys, const LyapunovDesign& design,
                                   const GuardGeometry& geometry) {
    if (!(geometry.z3 > 0.0 && geometry.z4 > 0.0 && geometry.z5 > 0.0))
        throw HybridError(ErrorCode::InvalidGeometry, "z3, z4, z5 must be positive");
    const RowVec JLinv = sys.J * sys.L.inverse();
    const double gate = sys.s * (1.0 + JLinv.dot(design.M));
    if (!(gate < 0.0)) throw HybridError(ErrorCode::InvalidGeometry, "s(1 + J L^-1 M) must be negative");
    const double gate_alt = sys.s * (1.0 - JLinv.dot(design.M));
    const double z1n = sys.z1.norm();
    const Mat Lm = jump_linear_part(sys, design);

    SublevelEstimate est;
    est.ell_g = max_singular(Lm);
    const double ngd = image_guard_normal(sys).norm();
    est.bound_guard = std::min(-gate * geometry.z4, sys.J.squaredNorm() * geometry.z3) / JLinv.norm();
    est.bound_image = -geometry.z5 * gate * geometry.z3 / (2.0 * z1n * est.ell_g * ngd);
    est.bound_image_alt = -geometry.z5 * gate_alt * geometry.z3 / (2.0 * z1n * est.ell_g * ngd);
    est.bound_level = geometry.z3 / (2.0 * z1n);
    double bound = std::min({est.bound_guard, est.bound_image, est.bound_level});
    if (est.bound_image_alt > 0.0) {
        if (est.bound_image_alt < est.bound_image) est.notes.push_back("image bound with s(1-JL^-1 M) is the smaller one");
        bound = std::min(bound, est.bound_image_alt);
    } else {
        est.notes.push_back("image bound with s(1-JL^-1 M) is nonpositive and ignored");
    }
    if (!(bound > 0.0)) throw HybridError(ErrorCode::InvalidGeometry, "nonpositive bound on delta1");
    est.delta1 = 0.99 * bound;
    est.lambda_lo = std::min(min_eig(design.P0), min_eig(design.Ps)) * (1.0 - kGuardBand);
    const double gap = 3.0 * geometry.z3 / (2.0 * z1n) - est.delta1;
    est.vL = 0.99 * est.lambda_lo * std::min(est.delta1 * est.delta1, gap * gap);
    return est;
}

ClassKBounds class_k_bounds(const AffineHybridSystem& sys, const LyapunovDesign& design) {
    const Eigen::Index n = sys.dim();
    const Mat I = Mat::Identity(n, n);
    const Mat Lm = jump_linear_part(sys, design);
    const Mat lifted = Lm + sys.s * sys.L * sys.J.transpose() * sys.z1;
    ClassKBounds kb;
    kb.lambda_lo = std::min(min_eig(design.P0), min_eig(design.Ps)) * (1.0 - kGuardBand);
    kb.lambda_hi = std::max(max_eig(design.P0), max_eig(design.Ps)) * (1.0 + kGuardBand);
    for (const Mat& right : {Mat(-I), Mat(-Lm), Mat(-lifted)}) {
        Mat stacked(n, 2 * n);
        stacked << I, right;
        kb.sigma = std::max(kb.sigma, max_singular(stacked));
    }
    kb.LV = std::sqrt(kb.lambda_hi) * kb.sigma;
    const RowVec JLinv = sys.J * sys.L.inverse();
    const double kappa = JLinv.norm() / std::abs(gate_value(sys, design));
    const double Jn2 = sys.J.squaredNorm();
    const double lead = 1.0 + kappa * (design.M + sys.L * sys.J.transpose() / Jn2).norm();
    kb.guard_factor = std::sqrt(lead * lead + kappa * kappa / Jn2);
    kb.alpha1 = kb.lambda_lo / std::max(1.0, kb.guard_factor * kb.guard_factor);
    kb.alpha2 = kb.LV * kb.LV;
    return kb;
}

LyapunovDesign derive_constants(const AffineHybridSystem& sys, LyapunovDesign design, const GuardGeometry& geometry) {
    validate_design(sys, design);
    const SublevelEstimate est = estimate_sublevel(sys, design, geometry);
    const ClassKBounds kb = class_k_bounds(sys, design);
    design.derived = {est.delta1, est.vL, kb.lambda_lo, kb.lambda_hi, kb.LV, kb.sigma, est.ell_g};
    return design;
}

SetSampler multiscale_sampler(const AffineHybridSystem& sys, const Vec& center, std::vector<double> half_widths) {
    check_dim(sys, center, "center");
    if (half_widths.empty()) throw HybridError(ErrorCode::InvalidGeometry, "no sampling scales");
    const Eigen::Index n = sys.dim();
    auto box = [n, center, half_widths](std::mt19937_64& rng) {
        std::uniform_int_distribution<std::size_t> pick(0, half_widths.size() - 1);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        const double w = half_widths[pick(rng)];
        Vec x(n);
        for (Eigen::Index i = 0; i < n; ++i) x(i) = center(i) + w * u(rng);
        return x;
    };
    constexpr int kMaxTries = 1000000;
    SetSampler s;
    s.flow_set = [sys, box](std::mt19937_64& rng) {
        for (int i = 0; i < kMaxTries; ++i) {
            const Vec x = box(rng);
            if (in_flow_set(sys, x, 0.0)) return x;
        }
        throw HybridError(ErrorCode::InvalidGeometry, "no flow-set point found in the sampling boxes");
    };
    s.jump_set = [sys, box](std::mt19937_64& rng) {
        for (int i = 0; i < kMaxTries; ++i) {
            Vec x = box(rng);
            x -= ((sys.J.dot(x) + sys.K) / sys.J.squaredNorm()) * sys.J.transpose();
            if (in_jump_set(sys, x, 1e-12)) return x;
        }
        throw HybridError(ErrorCode::InvalidGeometry, "no jump-set point found in the sampling boxes");
    };
    s.jump_image = [sys, jd = s.jump_set](std::mt19937_64& rng) { return jump_map(sys, jd(rng)); };
    return s;
}

AssumptionReport assess_guard_geometry(const AffineHybridSystem& sys, const GuardGeometry& geometry,
                                       const SetSampler& sampler, int samples, unsigned seed) {
    AssumptionReport rep;
    rep.worst_margin.fill(std::numeric_limits<double>::infinity());
    std::mt19937_64 rng(seed);
    auto record = [&](int b, double margin, const Vec& x) {
        const auto k = static_cast<std::size_t>(b);
        ++rep.checked[k];
        if (margin < rep.worst_margin[k]) {
            rep.worst_margin[k] = margin;
            rep.worst_point[k] = x;
        }
    };
    for (int i = 0; i < samples; ++i) {
        const Vec x = sampler.jump_image(rng);
        record(0, sys.z1.dot(x) + sys.z2 - geometry.z3, x);
    }
    const long max_draws = 200L * samples;
    for (long draw = 0; draw < max_draws && (rep.checked[1] < samples || rep.checked[2] < samples); ++draw) {
        const Vec x = sampler.flow_set(rng);
        const double h = sys.z1.dot(x) + sys.z2;
        const double g = sys.J.dot(x) + sys.K;
        if (std::abs(h) <= geometry.z3 && rep.checked[1] < samples) record(1, -g - geometry.z4, x);
        if (h <= 0.0 && rep.checked[2] < samples) record(2, -g - geometry.z5 * dist_to_jump_set(sys, x), x);
    }
    return rep;
}

AssumptionReport verify_guard_geometry(const AffineHybridSystem& sys, const GuardGeometry& geometry,
                                       const SetSampler& sampler, int samples, unsigned seed) {
    AssumptionReport rep = assess_guard_geometry(sys, geometry, sampler, samples, seed);
    // rounding slack for bullets that hold with equality on D
    for (std::size_t k : {0u, 2u})
        if (rep.worst_margin[k] < 0.0 && rep.worst_margin[k] > -1e-12) rep.worst_margin[k] = 0.0;
    static const char* names[3] = {"z1x+z2 >= z3 on G(D)", "Jx+K < -z4 where |z1x+z2| <= z3",
                                   "Jx+K <= -z5 dist(x, D) where z1x+z2 <= 0"};
    for (int b = 0; b < 3; ++b) {
        const auto k = static_cast<std::size_t>(b);
        const bool ok = b == 1 ? rep.worst_margin[k] > 0.0 : rep.worst_margin[k] >= 0.0;
        if (!ok) {
            std::ostringstream os;
            os.precision(17);
            os << names[b] << " fails at x = (" << rep.worst_point[k].transpose() << ") with margin " << rep.worst_margin[k];
            throw HybridError(ErrorCode::AssumptionViolated, os.str());
        }
    }
    return rep;
}

DwellTimeSpec combined_dwell(const DwellTimeSpec& per_trajectory) {
    return {per_trajectory.tau / 2.0, 2.0 * per_trajectory.N0, per_trajectory.kind};
}

StabilityVerdict stability_verdict(const LyapunovDesign& design, const std::optional<DwellTimeSpec>& per_trajectory) {
    StabilityVerdict v;
    const double lc = design.lambda_c, ld = design.lambda_d;
    v.flow_rate = lc;
    v.jump_rate = ld;
    std::ostringstream os;
    os.precision(17);
    if (lc < 0.0 && ld <= 0.0) {
        v.which = StabilityCase::Case1;
        os << "flow rate " << lc << " < 0, jump rate " << ld << " <= 0";
    }
    if (per_trajectory) {
        const DwellTimeSpec dw = combined_dwell(*per_trajectory);
        v.combined_dwell = dw;
        v.average_rate = ld + lc * dw.tau;
        v.kbar = std::exp(ld * dw.N0);
        if (v.which == StabilityCase::Inconclusive) {
            if (dw.kind == DwellKind::MinimalAverage && lc <= 0.0 && v.average_rate < 0.0) {
                v.which = StabilityCase::Case2;
                os << "flow rate " << lc << " <= 0, average rate " << v.average_rate << " < 0 with tau " << dw.tau;
            } else if (dw.kind == DwellKind::MaximalAverage && ld <= 0.0 && v.average_rate < 0.0) {
                v.which = StabilityCase::Case3;
                os << "jump rate " << ld << " <= 0, average rate " << v.average_rate << " < 0 with tau " << dw.tau;
            }
        }
    }
    if (v.which == StabilityCase::Inconclusive) os << "no case applies (flow rate " << lc << ", jump rate " << ld << ")";
    v.details = os.str();
    return v;
}

int MonitorReport::inadmissible_transitions() const {
    return static_cast<int>(
        std::count_if(transitions.begin(), transitions.end(), [](const Transition& tr) { return tr.checked && !tr.admissible; }));
}

int MonitorReport::checked_transitions() const {
    return static_cast<int>(std::count_if(transitions.begin(), transitions.end(), [](const Transition& tr) { return tr.checked; }));
}

MonitorReport monitor_V_along_arc(const AffineHybridSystem& sys, const LyapunovDesign& design, const CombinedArc& arc,
                                  const MonitorOptions& options) {
    MonitorReport rep;
    const double vL = design.derived.vL;
    const double lc = design.lambda_c, ld = design.lambda_d;
    const double check_level = std::min(1.0, std::exp(ld)) * vL;
    auto admissible = [](Region from, Region to, Component via) {
        return (from == Region::S0 && to == Region::S1 && via == Component::X) ||
               (from == Region::S1 && to == Region::S0 && via == Component::Y) ||
               (from == Region::S0 && to == Region::S2 && via == Component::Y) ||
               (from == Region::S2 && to == Region::S0 && via == Component::X);
    };

    double t0 = 0.0, V0 = 0.0;
    bool first = true;
    std::size_t next_jump = 0;
    for (std::size_t k = 0; k < arc.samples.size(); ++k) {
        const int j = arc.domain.intervals[k].j;
        const double t_start = arc.samples[k].empty() ? 0.0 : arc.samples[k].front().t;
        // decay between every ordered pair of samples: W(t) = V(t) e^(-lc (t - t_start)) must not exceed
        // its running minimum by more than the tolerance
        double w_min = std::numeric_limits<double>::infinity();
        Region prev_region = Region::S0;
        double prev_V = 0.0;
        bool have_prev = false;
        for (const auto& s : arc.samples[k]) {
            const LyapunovValue lv = lyapunov_value(sys, design, s.x, s.y);
            rep.series.push_back({s.t, j, lv.V, lv.region, lv.V <= vL});
            if (lv.V > vL) ++rep.outside_sublevel;
            if (first) {
                t0 = s.t;
                V0 = lv.V;
                first = false;
            }
            if (V0 > 0.0)
                rep.envelope_ratio = std::max(rep.envelope_ratio, lv.V / (std::exp(lc * (s.t - t0) + ld * j) * V0));
            const double scale = std::exp(-lc * (s.t - t_start));
            const double w = lv.V * scale;
            if (have_prev) {
                if (w > w_min * (1.0 + options.flow_tolerance) + options.floor * scale)
                    rep.flow_violations.push_back({s.t, j, w_min > 0.0 ? w / w_min : std::numeric_limits<double>::infinity()});
                if (lv.region != prev_region)
                    rep.transitions.push_back({s.t, j, prev_region, lv.region, Component::None, prev_V,
                                               prev_V <= check_level, false});
            }
            w_min = std::min(w_min, w);
            prev_region = lv.region;
            prev_V = lv.V;
            have_prev = true;
        }
        // the jump that ends this interval
        if (next_jump < arc.jumps.size() && arc.jumps[next_jump].j == j && k + 1 < arc.samples.size()) {
            const CombinedJump& jr = arc.jumps[next_jump++];
            const LyapunovValue pre = lyapunov_value(sys, design, jr.pre_x, jr.pre_y);
            const LyapunovValue post = lyapunov_value(sys, design, jr.post_x, jr.post_y);
            if (post.V > std::exp(ld) * pre.V * (1.0 + options.jump_tolerance) + options.floor)
                rep.jump_violations.push_back({jr.t, jr.j, pre.V, post.V});
            rep.transitions.push_back({jr.t, jr.j, pre.region, post.region, jr.jumped, pre.V, pre.V <= check_level,
                                       admissible(pre.region, post.region, jr.jumped)});
        }
    }
    return rep;
}

}  // namespace hybridtrack
