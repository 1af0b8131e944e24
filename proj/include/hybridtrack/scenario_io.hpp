#pragma once

#include "hybridtrack/models.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace hybridtrack {

/// A scenario plus everything a batch run needs.
struct RunConfig {
    Scenario scenario;
    SimulationLimits limits;
    IntegratorOptions integrator;
    MonitorOptions monitor;
    double hysteresis = 1e-9;
    int samples = 10000;  ///< guard-geometry samples
    unsigned seed = 1;
    std::string output_dir;  ///< empty: chosen by the caller
};

/// Schema or syntax problem in a config; `key` is the dotted path, `line` is 1-based (0 when unknown).
class ConfigError : public HybridError {
public:
    ConfigError(const std::string& key, int line, const std::string& what);
    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

/// Parses a YAML document; unknown keys and dimension mismatches throw ConfigError.
/// Derived design constants are recomputed from the geometry.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// YAML with every number written to 17 significant digits.
std::string dump_config(const RunConfig& config);

/// The two built-in scenarios as configs.
RunConfig builtin_config(const std::string& name);
std::vector<std::string> builtin_names();

/// KEY=VAL with KEY one of event, membership, rtol, atol, sample_dt, flow_tolerance, jump_tolerance, hysteresis.
void apply_override(RunConfig& config, const std::string& assignment);

/// %.17g
std::string format_number(double v);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace hybridtrack
