#pragma once

#include "hybridtrack/distance.hpp"
#include "hybridtrack/simulate.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hybridtrack {

/// Input to the second component; may depend on the first component and on a discrete mode.
using PairInputFn = std::function<double(double t, const Vec& x, const Vec& y, int mode)>;

/**
 * Optional discrete mode carried along the flow (e.g. the controller region).
 * classify picks the mode at the start of each flow segment; exit_value(t, x, y, mode)
 * is negative while the mode stays valid and the flow is stopped when it reaches zero.
 */
struct ModeSwitcher {
    std::function<int(double t, const Vec& x, const Vec& y)> classify;
    std::function<double(double t, const Vec& x, const Vec& y, int mode)> exit_value;
};

enum class BranchPolicy {
    XFirst,         ///< both in D: jump x at counter j, y at j + 1
    YFirst,
    EnumerateBoth,  ///< follow CombinedOptions::decisions, mark such jumps BothEnumerated
    Strict          ///< both in D: throw AttributionAmbiguous
};

enum class Attribution { XJumped, YJumped, BothEnumerated };

const char* to_string(Attribution a);

enum class Component { None, X, Y };

struct CombinedSample {
    double t = 0.0;
    Vec x, y;
    Vec dx, dy;
    double u_y = 0.0;
    int mode = 0;
};

struct CombinedJump {
    double t = 0.0;
    int j = 0;  ///< combined counter before the jump
    Attribution attribution = Attribution::XJumped;
    Component jumped = Component::X;
    Vec pre_x, pre_y, post_x, post_y;
};

struct CombinedArc {
    HybridTimeDomain domain;
    std::vector<std::vector<CombinedSample>> samples;
    std::vector<CombinedJump> jumps;
    std::vector<int> jx, jy;  ///< original jump counters per combined interval
    Termination termination = Termination::HorizonReached;
    Component terminated_by = Component::None;
    /// Simultaneous-jump decisions taken under EnumerateBoth (0: x first, 1: y first).
    std::vector<int> decisions;
};

struct CombinedOptions {
    BranchPolicy policy = BranchPolicy::XFirst;
    std::vector<int> decisions;  ///< consumed in order under EnumerateBoth; x first once exhausted
    SimulationLimits limits;
    IntegratorOptions integrator;
    std::optional<ModeSwitcher> modes;
    /// When set, x is read from this stored arc (its jumps included) instead of being integrated.
    const HybridArc* reference = nullptr;
};

/**
 * Joint simulation of x' = f(x, u_x), y' = f(y, u_y) on a shared clock. A jump of one component
 * leaves the other frozen and increments the shared counter.
 */
CombinedArc simulate_combined(const AffineHybridSystem& sys, const Vec& x0, const Vec& y0, double t0,
                              double horizon, const InputFn& u_x, const PairInputFn& u_y,
                              const CombinedOptions& options = {});

struct Enumeration {
    std::vector<CombinedArc> arcs;
    bool depth_capped = false;  ///< some branch met more simultaneous jumps than max_depth
};

/// Every resolution order of simultaneous jumps, up to max_depth binary choices per run.
Enumeration enumerate_combined(const AffineHybridSystem& sys, const Vec& x0, const Vec& y0, double t0,
                               double horizon, const InputFn& u_x, const PairInputFn& u_y,
                               CombinedOptions options = {}, int max_depth = 8);

struct Reparameterized {
    HybridArc arc_x;
    HybridArc arc_y;
    std::vector<int> jx, jy;
};

/// Collapses the shared counter back onto each component's own jumps.
Reparameterized reparameterize(const CombinedArc& combined);

struct DistanceSample {
    double t = 0.0;
    int j = 0;
    double d = 0.0;
};

std::vector<DistanceSample> distance_profile(const AffineHybridSystem& sys, const CombinedArc& combined);

}  // namespace hybridtrack
