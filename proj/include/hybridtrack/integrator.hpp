#pragma once

#include "hybridtrack/types.hpp"

#include <functional>
#include <vector>

namespace hybridtrack {

struct IntegratorOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_min = 1e-14;
    double sample_dt = 1e-2;      ///< output grid spacing; also the largest step taken
    double escape_bound = 1e9;
};

using RhsFn = std::function<void(double t, const Vec& w, Vec& dw)>;

/// Event fires when value crosses from <= 0 to > 0. An event arms once its value is negative;
/// events listed as disarmed at the start arm only after the value drops below -tol.
struct EventSpec {
    std::function<double(double t, const Vec& w)> value;
    double tol = 1e-10;
};

struct Node {
    double t = 0.0;
    Vec w;
    Vec dw;
};

enum class FlowStop { Horizon, Event, Escape };

struct FlowOutcome {
    FlowStop stop = FlowStop::Horizon;
    std::vector<Node> nodes;  ///< start node, grid nodes, final node
    int event = -1;
};

/// Cubic Hermite interpolation between two nodes.
Vec hermite(const Node& a, const Node& b, double t);

/**
 * Dormand-Prince 5(4) integration from (t0, w0) to t_end with steps landing on the grid
 * grid_origin + k*sample_dt. Events are bracketed on the dense interpolant and then refined
 * with exact re-steps and Newton iterations until |value| <= tol.
 */
FlowOutcome integrate_until(const RhsFn& rhs, double t0, const Vec& w0, double t_end,
                            const std::vector<EventSpec>& events, const IntegratorOptions& opts,
                            double grid_origin, const std::vector<int>& disarmed = {});

}  // namespace hybridtrack
