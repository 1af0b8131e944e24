#pragma once

#include "hybridtrack/combined.hpp"
#include "hybridtrack/lyapunov.hpp"
#include "hybridtrack/simulate.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace hybridtrack {

/// u_ff(t) = constant + amplitude cos(omega t)
struct Feedforward {
    double constant = 0.0;
    double amplitude = 0.0;
    double omega = 0.0;
    double operator()(double t) const { return constant + amplitude * std::cos(omega * t); }
};

/**
 * Switching tracking law around a stored reference x_d. With xb = x_d(t) (minimal j at jumps),
 *   S0: u_fb = -c0 (xb - y)
 *   S1: u_fb = -beta2^T beta1 / |beta2|^2 + c1 (xb - Gbar(y))
 *   S2: u_fb = -beta4^T beta3 / |beta4|^2 - c2 (Gbar(xb) - y)
 * where beta2 = -(L+MJ) B, beta4 = -B and
 *   beta1 = (A xb + B u_ff + E) - (L+MJ)(A Gbar^-1(xb) + B u_ff + E)
 *   beta3 = (L+MJ)(A xb + B u_ff + E) - (A Gbar(xb) + B u_ff + E).
 */
struct ControllerDesign {
    FlowGains gains;
    Feedforward u_ff;
    std::shared_ptr<const HybridArc> reference;
};

/// Throws InvalidSystem for B = 0, SingularDesign for singular L+MJ, InvalidDimension for bad gains.
void validate_controller(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl);

Vec beta2(const AffineHybridSystem& sys, const LyapunovDesign& design);
Vec beta4(const AffineHybridSystem& sys);

/// x_d(t, min j); throws OutOfHorizon outside the stored arc.
Vec reference_selector(const HybridArc& reference, double t);

struct Betas {
    Vec beta1;
    Vec beta3;
};

/// Betas at reference state xb and time t.
Betas betas_at(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl, double t,
               const Vec& xb);

/// Betas along the stored reference.
Betas betas(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl, double t);

/// Largest component of beta1 orthogonal to beta2 (or beta3 to beta4) over the grid.
double span_condition_residual(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl,
                               const std::vector<double>& t_grid);

double feedback_in_region(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl,
                          double t, const Vec& xb, const Vec& y, Region region);

struct FeedbackValue {
    double u = 0.0;
    Region region = Region::S0;
};

/// Region by lyapunov_value(xb, y) with xb from the selector, then the matching case.
FeedbackValue feedback(const AffineHybridSystem& sys, const LyapunovDesign& design, const ControllerDesign& ctrl, double t,
                       const Vec& y);

struct ClosedLoopOptions {
    BranchPolicy policy = BranchPolicy::XFirst;
    SimulationLimits limits;
    IntegratorOptions integrator;
    double hysteresis = 1e-9;  ///< relative band before the active case is abandoned
    MonitorOptions monitor;
};

struct ControlSample {
    double t = 0.0;
    int j = 0;
    Region region = Region::S0;  ///< case applied by the controller
    double u_ff = 0.0;
    double u_fb = 0.0;
};

struct ClosedLoopResult {
    CombinedArc arc;
    std::vector<DistanceSample> distance;
    MonitorReport monitor;
    std::vector<ControlSample> control;
    /// Samples where the selector value x_d(t, min j) and the stored sample give different regions
    /// (only at reference jump instants).
    int selector_disagreements = 0;
};

struct JumpPair {
    double t_x = 0.0;
    double t_y = 0.0;
    double mismatch() const { return std::abs(t_x - t_y); }
};

/// Each jump of x paired with the nearest jump of y; empty when y never jumps.
std::vector<JumpPair> jump_time_pairs(const CombinedArc& arc);

/// y' = f(y, u_ff + u_fb) against the stored reference, with the case switched by the argmin region.
ClosedLoopResult closed_loop_simulate(const AffineHybridSystem& sys, const LyapunovDesign& design,
                                      const ControllerDesign& ctrl, const Vec& y0, double t0, double horizon,
                                      const ClosedLoopOptions& options = {});

}  // namespace hybridtrack
