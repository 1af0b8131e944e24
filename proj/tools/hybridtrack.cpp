#include "hybridtrack/runner.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace hybridtrack;

namespace {

struct Args {
    std::string config;
    std::string out;
    std::vector<std::string> overrides;
    std::optional<unsigned> seed;
    std::optional<int> max_jumps;
};

RunConfig load(const Args& a) {
    RunConfig cfg = load_config(a.config);
    for (const auto& o : a.overrides) apply_override(cfg, o);
    if (a.seed) cfg.seed = *a.seed;
    if (a.max_jumps) cfg.limits.max_jumps = *a.max_jumps;
    return cfg;
}

std::filesystem::path out_dir(const Args& a, const RunConfig& cfg, const char* sub) {
    if (!a.out.empty()) return a.out;
    if (!cfg.output_dir.empty()) return std::filesystem::path(cfg.output_dir) / sub;
    return std::filesystem::path("out") / cfg.scenario.name / sub;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulate, certify and track hybrid reference trajectories"};
    app.require_subcommand(1);
    Args a;

    auto add_common = [&a](CLI::App* sub) {
        sub->add_option("--config", a.config, "scenario YAML")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", a.out, "output directory");
        sub->add_option("--tol-override", a.overrides, "KEY=VALUE (event, membership, rtol, atol, sample_dt, ...)");
        sub->add_option("--seed", a.seed, "seed of the guard-geometry sampler");
        sub->add_option("--max-jumps", a.max_jumps, "jump limit per trajectory");
    };
    CLI::App* sim = app.add_subcommand("simulate", "open-loop arcs as CSV");
    CLI::App* cert = app.add_subcommand("certify", "matrix conditions, sublevel constants and verdict");
    CLI::App* track = app.add_subcommand("track", "closed-loop tracking profiles");
    CLI::App* figs = app.add_subcommand("figures", "every built-in scenario into <out>/v1");
    for (CLI::App* s : {sim, cert, track}) add_common(s);
    figs->add_option("--out", a.out, "output root")->default_val("out/figures");
    CLI::App* dump = app.add_subcommand("dump", "print a built-in scenario as YAML");
    std::string builtin;
    dump->add_option("name", builtin, "bouncing_ball or dissipative_oscillator")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        CommandResult r;
        if (*dump) {
            std::cout << dump_config(builtin_config(builtin));
            return kExitOk;
        }
        if (*figs) {
            r = cmd_figures(a.out);
        } else {
            const RunConfig cfg = load(a);
            if (*sim) r = cmd_simulate(cfg, out_dir(a, cfg, "simulate"));
            if (*cert) r = cmd_certify(cfg, out_dir(a, cfg, "certify"));
            if (*track) r = cmd_track(cfg, out_dir(a, cfg, "track"));
        }
        std::cout << r.summary;
        for (const auto& f : r.files) std::cout << "wrote " << f.string() << "\n";
        return r.exit_code;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const HybridError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::AssumptionViolated || e.code() == ErrorCode::SingularDesign ? kExitInfeasible
                                                                                                 : kExitAbnormal;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitAbnormal;
    }
}
