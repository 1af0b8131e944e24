#pragma once

#include "hybridtrack/lyapunov.hpp"
#include "hybridtrack/tracking.hpp"

#include <optional>
#include <string>
#include <vector>

namespace hybridtrack {

/// A plant, its certified design and tracking controller, and the runs it is meant for.
struct Scenario {
    std::string name;
    AffineHybridSystem system;
    LyapunovDesign design;
    ControllerDesign controller;  ///< reference left empty; see attach_reference
    GuardGeometry geometry;
    Vec reference_start;              ///< x_d(t0, 0)
    Vec tracking_start;               ///< y(t0, 0)
    std::optional<Vec> neighbor_start;  ///< open-loop start next to the reference
    double t0 = 0.0;
    double horizon = 0.0;
    std::optional<DwellTimeSpec> dwell;  ///< per trajectory
    StabilityCase expected = StabilityCase::Inconclusive;
    std::vector<double> sampling_scales;  ///< box half-widths for the guard-geometry check
};

/// Lossless ball, flow set {height >= 0}, jump set truncated by r.
Scenario bouncing_ball(double r = 0.01);

/// Damped mass on a spring against a wall with restitution 0.9, driven by 100 cos(0.4 t).
Scenario dissipative_oscillator(double r = 0.01);

/// Separation constants of a planar impact plant with restitution eps and truncation r.
GuardGeometry impact_geometry(double eps, double r);

/// Open-loop arc from `x0` under the scenario's feedforward input.
HybridArc simulate_open_loop(const Scenario& sc, const Vec& x0, double horizon);

/// Stores the reference arc from reference_start, `extra` seconds past the horizon.
Scenario attach_reference(Scenario sc, double extra = 1.0);

/// Maximal average dwell spec from a reference: tau = (span / jumps) / 0.9, raised until the domain satisfies it.
DwellTimeSpec measure_maximal_dwell(const HybridTimeDomain& domain, double N0 = 2.0);

struct ScenarioCheck {
    MatrixCheck jump;
    MatrixCheck flow;
    AssumptionReport geometry;
    SublevelEstimate sublevel;
    ClassKBounds class_k;
    std::optional<DwellCheck> dwell;  ///< the dwell spec against the reference domain
    StabilityVerdict verdict;
    bool ok() const;
};

/// Runs the full certificate pipeline; needs a reference when a dwell spec is set.
ScenarioCheck self_check(const Scenario& sc, int samples = 10000, unsigned seed = 1);

}  // namespace hybridtrack
