#pragma once

#include "hybridtrack/scenario_io.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hybridtrack {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitAbnormal = 4;

struct CommandResult {
    int exit_code = kExitOk;
    std::vector<std::filesystem::path> files;  ///< in the order written
    std::string summary;                       ///< plain-text report
};

/**
 * Open-loop arcs of the reference, the tracking start and (if set) the neighbour start:
 * <name>.csv with columns t, j, x1..xn, jump rows repeated at equal t with j and j+1.
 * With a neighbour, pair_error.csv holds t, j, e, d of reference against neighbour.
 */
CommandResult cmd_simulate(const RunConfig& config, const std::filesystem::path& out);

/// Jump conditions, flow LMIs, guard geometry, sublevel constants, dwell and verdict; exit 3 when any fails.
CommandResult cmd_certify(const RunConfig& config, const std::filesystem::path& out);

/// Closed loop against the stored reference: states, euclidean_error, distance_d, lyapunov_V, control_u, region CSVs.
CommandResult cmd_track(const RunConfig& config, const std::filesystem::path& out);

/// Every built-in scenario through simulate, certify and track into out/v1/<name>/..., one thread per scenario.
CommandResult cmd_figures(const std::filesystem::path& out);

/// Rows "t,j,..." with every number at 17 significant digits.
std::string arc_csv(const HybridArc& arc);

}  // namespace hybridtrack
