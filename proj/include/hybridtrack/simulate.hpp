#pragma once

#include "hybridtrack/integrator.hpp"
#include "hybridtrack/system.hpp"
#include "hybridtrack/time_domain.hpp"

#include <optional>
#include <vector>

namespace hybridtrack {

struct Sample {
    double t = 0.0;
    Vec x;
    Vec dx;  ///< flow vector at the sample, used for Hermite interpolation
};

struct JumpRecord {
    double t = 0.0;
    int j = 0;  ///< counter before the jump
    Vec pre;
    Vec post;
};

enum class Termination { HorizonReached, LeftFlowSet, ZenoLimit, EscapeDetected };

const char* to_string(Termination t);

struct HybridArc {
    HybridTimeDomain domain;
    std::vector<std::vector<Sample>> samples;  ///< one dense grid per interval
    std::vector<JumpRecord> jumps;
    Termination termination = Termination::HorizonReached;

    double t_begin() const { return domain.intervals.front().t_begin; }
    double t_end() const { return domain.intervals.back().t_end; }
    /// State at (t, j) by Hermite interpolation on interval j.
    Vec state_at(double t, int j) const;
};

struct SimulationLimits {
    int max_jumps = 10000;
    double zeno_window = 1e-9;
};

struct GuardEvent {
    double t = 0.0;
    Vec x;
    GuardValues values;
};

enum class SegmentEnd { Horizon, Guard, LeftFlowSet, Escape };

struct FlowSegment {
    std::vector<Sample> samples;
    SegmentEnd end = SegmentEnd::Horizon;
    std::optional<GuardEvent> event;
};

/**
 * Flows from x0 until t_max, a guard crossing inside D, or departure from C.
 * Crossing the guard hyperplane with h > tol continues the flow.
 */
FlowSegment integrate_flow(const AffineHybridSystem& sys, const Vec& x0, double t0, double t_max,
                           const InputFn& u, const IntegratorOptions& opts = {}, double grid_origin = 0.0);

HybridArc simulate(const AffineHybridSystem& sys, const Vec& x0, double t0, double horizon, const InputFn& u,
                   const SimulationLimits& limits = {}, const IntegratorOptions& opts = {});

/// Max over interior samples of ||central difference - f(t,x)|| / (1 + ||x||).
double flow_residual(const AffineHybridSystem& sys, const HybridArc& arc, const InputFn& u);

}  // namespace hybridtrack
