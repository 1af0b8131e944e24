#pragma once

#include "hybridtrack/combined.hpp"
#include "hybridtrack/system.hpp"
#include "hybridtrack/time_domain.hpp"

#include <array>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace hybridtrack {

/// Constants derived from a design and the guard geometry; zero until filled by derive_constants.
struct DerivedConstants {
    double delta1 = 0.0;
    double vL = 0.0;
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    double LV = 0.0;
    double sigma = 0.0;
    double ell_g = 0.0;
};

/**
 * Piecewise quadratic Lyapunov function
 *   V(x,y) = min(|x-y|^2_P0, |x-Gbar(y)|^2_Ps, |Gbar(x)-y|^2_Ps)
 * with Gbar(x) = Lx + H + M(Jx+K) + s L J^T max(0, z1 x + z2).
 */
struct LyapunovDesign {
    Mat P0;
    Mat Ps;
    Vec M;
    double lambda_c = 0.0;
    double lambda_d = 0.0;
    DerivedConstants derived;
};

/// Separation constants of the guard: z1x+z2 >= z3 on G(D); Jx+K < -z4 near the level z1x+z2 = 0;
/// Jx+K <= -z5 |x - D| below that level.
struct GuardGeometry {
    double z3 = 0.0;
    double z4 = 0.0;
    double z5 = 0.0;
};

struct FlowGains {
    RowVec c0, c1, c2;
};

enum class Region { S0 = 0, S1 = 1, S2 = 2 };

const char* to_string(Region r);

constexpr double kTolPsd = 1e-9;

/// Symmetry, definiteness, dimensions and the gate s(1 + J L^-1 M) < 0. Throws InvalidSystem / InvalidGeometry.
void validate_design(const AffineHybridSystem& sys, const LyapunovDesign& design);

/// s (1 + J L^-1 M); must be negative.
double gate_value(const AffineHybridSystem& sys, const LyapunovDesign& design);

/// L + M J
Mat jump_linear_part(const AffineHybridSystem& sys, const LyapunovDesign& design);

Vec gbar(const AffineHybridSystem& sys, const LyapunovDesign& design, const Vec& x);

/// (L+MJ)^-1 (x - H - MK); throws SingularDesign when L+MJ is singular.
Vec gbar_inverse(const AffineHybridSystem& sys, const LyapunovDesign& design, const Vec& x);

struct LyapunovValue {
    double V = 0.0;
    Region region = Region::S0;
    std::array<double, 3> branches{};  ///< quadratic forms of S0, S1, S2
};

/// Ties within 1e-12 (relative) resolve in the order S0, S1, S2.
LyapunovValue lyapunov_value(const AffineHybridSystem& sys, const LyapunovDesign& design, const Vec& x, const Vec& y);

struct MatrixCheck {
    bool ok = false;
    std::vector<double> eig_margins;  ///< largest eigenvalue of each tested matrix
};

/// (L+MJ)^T Ps (L+MJ) <= e^ld P0 and P0 <= e^ld Ps.
MatrixCheck check_jump_conditions(const AffineHybridSystem& sys, const LyapunovDesign& design, double tol = kTolPsd);

/**
 * Flow conditions with A1 = (L+MJ) A (L+MJ)^-1, beta2 = -(L+MJ) B:
 *   (A+B c0)^T P0 + P0 (A+B c0) - lc P0 <= 0
 *   Ps (A1 + beta2 c1) + (A1 + beta2 c1)^T Ps - lc Ps <= 0
 *   Ps (A+B c2) + (A+B c2)^T Ps - lc Ps <= 0
 */
MatrixCheck check_flow_lmis(const AffineHybridSystem& sys, const LyapunovDesign& design, const FlowGains& gains,
                            double tol = kTolPsd);

/// Frobenius norm of Acl^T P + P Acl + Q.
double lyapunov_equation_residual(const Mat& Acl, const Mat& P, const Mat& Q);

struct SublevelEstimate {
    double delta1 = 0.0;
    double vL = 0.0;
    double bound_guard = 0.0;       ///< (1/|J L^-1|) min(-s(1+JL^-1 M) z4, J J^T z3)
    double bound_image = 0.0;       ///< -z5 s(1+JL^-1 M) z3 / (2 |z1| l_g |n_gd|)
    double bound_image_alt = 0.0;   ///< same with s(1-JL^-1 M); ignored when nonpositive
    double bound_level = 0.0;       ///< z3 / (2 |z1|)
    double lambda_lo = 0.0;
    double ell_g = 0.0;
    std::vector<std::string> notes;
};

/// delta1 = 0.99 min(bounds), vL = 0.99 lambda_lo min(delta1^2, (3 z3 / (2|z1|) - delta1)^2).
SublevelEstimate estimate_sublevel(const AffineHybridSystem& sys, const LyapunovDesign& design,
                                   const GuardGeometry& geometry);

/**
 * alpha2 = LV^2 with LV = sqrt(lambda_hi) sigma. alpha1 = lambda_lo / max(1, guard_factor^2), where
 * guard_factor bounds d by |x - Gbar(y)| on the jump branches:
 *   kappa = |J L^-1| / |s(1 + J L^-1 M)|,
 *   guard_factor^2 = (1 + kappa |M + L J^T / |J|^2|)^2 + kappa^2 / |J|^2.
 */
struct ClassKBounds {
    double alpha1 = 0.0;  ///< alpha1(r) = alpha1 r^2
    double alpha2 = 0.0;  ///< alpha2(r) = alpha2 r^2
    double lambda_lo = 0.0;
    double lambda_hi = 0.0;
    double sigma = 0.0;
    double LV = 0.0;
    double guard_factor = 0.0;
};

ClassKBounds class_k_bounds(const AffineHybridSystem& sys, const LyapunovDesign& design);

/// Fills design.derived from estimate_sublevel and class_k_bounds.
LyapunovDesign derive_constants(const AffineHybridSystem& sys, LyapunovDesign design, const GuardGeometry& geometry);

/// Draws points of C, D and G(D).
struct SetSampler {
    std::function<Vec(std::mt19937_64&)> flow_set;
    std::function<Vec(std::mt19937_64&)> jump_set;
    std::function<Vec(std::mt19937_64&)> jump_image;
};

/**
 * Uniform draws from boxes of several half-widths around `center`, kept when they lie in C.
 * Jump-set draws are projected onto the guard hyperplane and kept when they lie in D.
 */
SetSampler multiscale_sampler(const AffineHybridSystem& sys, const Vec& center, std::vector<double> half_widths);

struct AssumptionReport {
    std::array<double, 3> worst_margin{};  ///< smallest slack of each bullet (negative: violated)
    std::array<int, 3> checked{};          ///< samples meeting each bullet's premise
    std::array<Vec, 3> worst_point;
    bool holds() const { return worst_margin[0] >= 0 && worst_margin[1] > 0 && worst_margin[2] >= 0; }
};

/// Evaluates the three separation inequalities on sampled points; never throws on violation.
AssumptionReport assess_guard_geometry(const AffineHybridSystem& sys, const GuardGeometry& geometry,
                                       const SetSampler& sampler, int samples = 10000, unsigned seed = 1);

/// As assess_guard_geometry, but throws AssumptionViolated naming the witness point.
AssumptionReport verify_guard_geometry(const AffineHybridSystem& sys, const GuardGeometry& geometry,
                                       const SetSampler& sampler, int samples = 10000, unsigned seed = 1);

enum class StabilityCase { Case1, Case2, Case3, Inconclusive };

const char* to_string(StabilityCase c);

struct StabilityVerdict {
    StabilityCase which = StabilityCase::Inconclusive;
    double flow_rate = 0.0;         ///< lambda_c
    double jump_rate = 0.0;         ///< lambda_d
    double average_rate = 0.0;      ///< lambda_d + lambda_c tau on the combined domain (when dwell given)
    std::optional<DwellTimeSpec> combined_dwell;
    double kbar = 1.0;              ///< e^(lambda_d N0) on the combined domain
    std::string details;
};

/// Dwell bounds of each trajectory, restated for the combined domain (twice the jumps).
DwellTimeSpec combined_dwell(const DwellTimeSpec& per_trajectory);

/// First applicable case: (1) lc<0, ld<=0; (2) lc<=0, ld+lc tau<0, minimal dwell; (3) ld<=0, ld+lc tau<0, maximal dwell.
StabilityVerdict stability_verdict(const LyapunovDesign& design, const std::optional<DwellTimeSpec>& per_trajectory);

struct VSample {
    double t = 0.0;
    int j = 0;
    double V = 0.0;
    Region region = Region::S0;
    bool inside = false;  ///< V <= vL
};

struct FlowViolation {
    double t = 0.0;
    int j = 0;
    double ratio = 0.0;  ///< V(t) / min over earlier s in the interval of e^(lc (t-s)) V(s)
};

struct JumpViolation {
    double t = 0.0;
    int j = 0;
    double V_pre = 0.0;
    double V_post = 0.0;
};

struct Transition {
    double t = 0.0;
    int j = 0;
    Region from = Region::S0;
    Region to = Region::S0;
    Component via = Component::None;  ///< None for a change during flow
    double V_pre = 0.0;
    bool checked = false;  ///< pre-transition V small enough for the admissible set to apply
    bool admissible = false;
};

struct MonitorOptions {
    double flow_tolerance = 0.05;
    double jump_tolerance = 1e-8;
    double floor = 1e-14;  ///< absolute slack for V near zero
};

struct MonitorReport {
    std::vector<VSample> series;
    std::vector<FlowViolation> flow_violations;
    std::vector<JumpViolation> jump_violations;
    std::vector<Transition> transitions;
    double envelope_ratio = 0.0;  ///< max of V(t,j) / (e^(lc (t-t0) + ld j) V(t0,0))
    int outside_sublevel = 0;
    int inadmissible_transitions() const;
    int checked_transitions() const;
};

/**
 * V along a combined arc: decay V(t') <= e^(lc (t'-t)) V(t) for every pair of samples of a flow interval,
 * V+ <= e^ld V at jumps, and region transitions against the admissible set
 * {S0->S1 by x, S1->S0 by y, S0->S2 by y, S2->S0 by x}, checked when V_pre <= min(1, e^ld) vL.
 */
MonitorReport monitor_V_along_arc(const AffineHybridSystem& sys, const LyapunovDesign& design,
                                  const CombinedArc& arc, const MonitorOptions& options = {});

}  // namespace hybridtrack
