#include "hybridtrack/runner.hpp"

#include <gtest/gtest.h>

#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

using namespace hybridtrack;
namespace fs = std::filesystem;

namespace {

fs::path scratch_root() { return fs::temp_directory_path() / ("hybridtrack_cli_" + std::to_string(::getpid())); }

struct ScratchCleanup : ::testing::Environment {
    void TearDown() override { fs::remove_all(scratch_root()); }
};
const auto* const cleanup = ::testing::AddGlobalTestEnvironment(new ScratchCleanup);

fs::path scratch(const std::string& name) {
    const fs::path p = scratch_root() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(slurp(p));
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string c;
        while (std::getline(ls, c, ',')) cells.push_back(c);
        rows.push_back(cells);
    }
    return rows;
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
    const auto at = s.find(from);
    EXPECT_NE(at, std::string::npos) << from;
    return at == std::string::npos ? s : s.replace(at, from.size(), to);
}

int line_of(const std::string& text, const std::string& needle) {
    const auto at = text.find(needle);
    return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(at), '\n'));
}

int run_tool(const std::string& args) {
    const int status = std::system((std::string(HYBRIDTRACK_EXE) + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST(Config, RoundTripIsBitExact) {
    for (const auto& name : builtin_names()) {
        const RunConfig a = builtin_config(name);
        const std::string text = dump_config(a);
        const RunConfig b = parse_config(text);
        EXPECT_EQ(dump_config(b), text);
        EXPECT_EQ(b.scenario.system.A, a.scenario.system.A);
        EXPECT_EQ(b.scenario.system.E, a.scenario.system.E);
        EXPECT_EQ(b.scenario.design.Ps, a.scenario.design.Ps);
        EXPECT_EQ(b.scenario.design.lambda_d, a.scenario.design.lambda_d);
        EXPECT_EQ(b.scenario.design.derived.vL, a.scenario.design.derived.vL);
        EXPECT_EQ(b.scenario.geometry.z4, a.scenario.geometry.z4);
        EXPECT_EQ(b.scenario.dwell.has_value(), a.scenario.dwell.has_value());
        if (a.scenario.dwell) EXPECT_EQ(b.scenario.dwell->tau, a.scenario.dwell->tau);
        EXPECT_EQ(b.scenario.expected, a.scenario.expected);
    }
}

TEST(Config, NumbersUseSeventeenDigits) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(u(rng)) % 20);
        EXPECT_EQ(std::stod(format_number(v)), v);
    }
    EXPECT_EQ(format_number(0.1), "0.10000000000000001");
}

TEST(Config, BundledFilesMatchBuiltins) {
    for (const auto& name : builtin_names()) {
        const RunConfig cfg = load_config(fs::path(HYBRIDTRACK_SCENARIOS) / (name + ".yaml"));
        EXPECT_EQ(dump_config(cfg), dump_config(builtin_config(name))) << name;
    }
}

TEST(Config, UnknownKeyIsRejectedWithLine) {
    const std::string text = replace(dump_config(builtin_config("bouncing_ball")), "  z2: 0\n", "  z2: 0\n  z7: 1\n");
    try {
        parse_config(text);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "system.z7");
        EXPECT_EQ(e.line(), line_of(text, "z7"));
    }
}

TEST(Config, WrongMatrixSizeNamesTheKey) {
    const std::string text =
        replace(dump_config(builtin_config("bouncing_ball")), "  L: [[-1, -0], [-0, -1]]", "  L: [[-1, 0, 0], [0, -1, 0]]");
    try {
        parse_config(text);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.key(), "system.L");
        EXPECT_NE(std::string(e.what()).find("system.L"), std::string::npos);
        EXPECT_EQ(e.line(), line_of(text, "  L:"));
    }
}

TEST(Config, MissingAndMalformedValues) {
    const std::string base = dump_config(builtin_config("bouncing_ball"));
    EXPECT_THROW(parse_config(replace(base, "horizon: 15\n", "")), ConfigError);
    EXPECT_THROW(parse_config(replace(base, "horizon: 15", "horizon: soon")), ConfigError);
    EXPECT_THROW(parse_config(replace(base, "horizon: 15", "horizon: -1")), ConfigError);
    EXPECT_THROW(parse_config(replace(base, "  s: -1", "  s: 2")), ConfigError);
    EXPECT_THROW(parse_config(replace(base, "expected: Case1", "expected: Case9")), ConfigError);
    EXPECT_THROW(parse_config("name: [unclosed"), ConfigError);
    // indefinite P0 is caught by the design validation
    EXPECT_THROW(parse_config(replace(base, "  P0: [[2.25, 0.5], [0.5, 2]]", "  P0: [[-1, 0], [0, 1]]")), ConfigError);
}

TEST(Config, Overrides) {
    RunConfig cfg = builtin_config("bouncing_ball");
    apply_override(cfg, "rtol=1e-8");
    apply_override(cfg, "event=1e-9");
    EXPECT_EQ(cfg.integrator.rtol, 1e-8);
    EXPECT_EQ(cfg.scenario.system.tol.event, 1e-9);
    EXPECT_THROW(apply_override(cfg, "rtol"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "rtol=abc"), ConfigError);
    EXPECT_THROW(apply_override(cfg, "colour=1"), ConfigError);
}

TEST(Simulate, ZeroHorizonGivesOneRow) {
    RunConfig cfg = builtin_config("bouncing_ball");
    cfg.scenario.horizon = 0.0;
    const fs::path out = scratch("zero");
    const CommandResult r = cmd_simulate(cfg, out);
    EXPECT_EQ(r.exit_code, kExitOk);
    const auto rows = csv_rows(out / "reference.csv");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"0", "0", "0", "10"}));
}

TEST(Simulate, JumpRowsRepeatTheTime) {
    const RunConfig cfg = builtin_config("bouncing_ball");
    const fs::path out = scratch("ball_sim");
    ASSERT_EQ(cmd_simulate(cfg, out).exit_code, kExitOk);
    EXPECT_EQ(slurp(out / "reference.csv").substr(0, 11), "t,j,x1,x2\n0");
    const auto rows = csv_rows(out / "reference.csv");
    int jumps = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const int j0 = std::stoi(rows[i - 1][1]), j1 = std::stoi(rows[i][1]);
        if (j1 != j0) {
            ++jumps;
            EXPECT_EQ(j1, j0 + 1);
            EXPECT_EQ(rows[i][0], rows[i - 1][0]);
            EXPECT_EQ(std::stod(rows[i][3]), -std::stod(rows[i - 1][3]));
        }
        EXPECT_GE(std::stod(rows[i][0]), std::stod(rows[i - 1][0]));
    }
    EXPECT_EQ(jumps, 7);  // impacts every 20/9.81 s up to 15 s
    EXPECT_TRUE(fs::exists(out / "report.json"));
}

TEST(Certify, ScenariosPass) {
    const fs::path out = scratch("cert");
    const CommandResult ball = cmd_certify(builtin_config("bouncing_ball"), out / "ball");
    EXPECT_EQ(ball.exit_code, kExitOk);
    EXPECT_NE(ball.summary.find("verdict Case1"), std::string::npos);
    const CommandResult osc = cmd_certify(builtin_config("dissipative_oscillator"), out / "osc");
    EXPECT_EQ(osc.exit_code, kExitOk);
    EXPECT_NE(osc.summary.find("verdict Case3"), std::string::npos);
    EXPECT_NE(slurp(out / "osc" / "report.json").find("\"holds_on_reference\": true"), std::string::npos);
}

TEST(Certify, PerturbedJumpMapIsInfeasible) {
    RunConfig cfg = builtin_config("bouncing_ball");
    cfg.scenario.system.L *= 1.5;
    const fs::path out = scratch("cert_bad");
    const CommandResult r = cmd_certify(cfg, out);
    EXPECT_EQ(r.exit_code, kExitInfeasible);
    const double expected = 1.25 * (4.25 + std::sqrt(4.25 * 4.25 - 17)) / 2;
    EXPECT_NE(r.summary.find("jump conditions: FAILED, max eigenvalues " + format_number(expected).substr(0, 8)),
              std::string::npos)
        << r.summary;
}

TEST(Track, IdenticalStartGivesZeroProfiles) {
    RunConfig cfg = builtin_config("bouncing_ball");
    cfg.scenario.tracking_start = cfg.scenario.reference_start;
    cfg.scenario.horizon = 7.0;
    const fs::path out = scratch("track_same");
    ASSERT_EQ(cmd_track(cfg, out).exit_code, kExitOk);
    const auto e = csv_rows(out / "euclidean_error.csv"), d = csv_rows(out / "distance_d.csv"),
               V = csv_rows(out / "lyapunov_V.csv"), u = csv_rows(out / "control_u.csv"), reg = csv_rows(out / "region.csv");
    ASSERT_EQ(e.size(), d.size());
    int between = 0;
    for (std::size_t i = 0; i < e.size(); ++i) {
        EXPECT_LE(std::stod(d[i][2]), 1e-8) << d[i][0];
        EXPECT_LE(std::stod(V[i][2]), 1e-8) << V[i][0];
        // the only nonzero Euclidean error is the instant where x has jumped and y has not yet
        const bool x_jumped_only = std::stoi(e[i][1]) % 2 == 1;
        if (x_jumped_only) {
            ++between;
            EXPECT_NE(reg[i][2], "S0");  // both jump branches vanish there
        } else {
            EXPECT_LE(std::stod(e[i][2]), 1e-8) << e[i][0];
            EXPECT_EQ(reg[i][2], "S0");
            EXPECT_LE(std::abs(std::stod(u[i][3])), 1e-8) << u[i][0];
        }
    }
    EXPECT_GE(between, 3);  // one zero-length interval per impact
}

TEST(Track, OscillatorFeedbackIsOffInS0) {
    const fs::path out = scratch("track_osc");
    ASSERT_EQ(cmd_track(builtin_config("dissipative_oscillator"), out).exit_code, kExitOk);
    const auto region = csv_rows(out / "region.csv"), ctrl = csv_rows(out / "control_u.csv");
    ASSERT_EQ(region.size(), ctrl.size());
    int s0 = 0;
    for (std::size_t i = 0; i < region.size(); ++i)
        if (region[i][2] == "S0") {
            ++s0;
            EXPECT_EQ(std::stod(ctrl[i][3]), 0.0);
        }
    EXPECT_GT(s0, 100);
    const auto d = csv_rows(out / "distance_d.csv");
    EXPECT_LE(std::stod(d.back()[2]), 0.1 * std::stod(d.front()[2]));
}

TEST(Figures, DeterministicAndRestorable) {
    const fs::path a = scratch("figs_a"), b = scratch("figs_b");
    const CommandResult ra = cmd_figures(a);
    ASSERT_EQ(ra.exit_code, kExitOk) << ra.summary;
    ASSERT_EQ(cmd_figures(b).exit_code, kExitOk);
    ASSERT_GT(ra.files.size(), 20u);
    for (const auto& f : ra.files) {
        const fs::path rel = fs::relative(f, a);
        EXPECT_EQ(slurp(f), slurp(b / rel)) << rel;
    }
    fs::remove_all(a / "v1");
    cmd_figures(a);
    for (const auto& f : ra.files) EXPECT_EQ(slurp(f), slurp(b / fs::relative(f, a)));
    for (const auto& f : ra.files) EXPECT_FALSE(fs::exists(fs::path(f.string() + ".tmp")));
}

TEST(Tool, ExitCodes) {
    const fs::path dir = scratch("tool");
    const std::string good = (fs::path(HYBRIDTRACK_SCENARIOS) / "bouncing_ball.yaml").string();
    EXPECT_EQ(run_tool("certify --config " + good + " --out " + (dir / "c").string()), kExitOk);

    std::ofstream(dir / "bad.yaml") << replace(slurp(good), "horizon: 15", "horizon: 15\ncolour: red");
    EXPECT_EQ(run_tool("simulate --config " + (dir / "bad.yaml").string() + " --out " + (dir / "s").string()), kExitConfig);
    EXPECT_EQ(run_tool("simulate --nonsense"), kExitConfig);

    std::ofstream(dir / "infeasible.yaml") << replace(slurp(good), "  L: [[-1, -0], [-0, -1]]", "  L: [[-1.5, 0], [0, -1.5]]");
    EXPECT_EQ(run_tool("certify --config " + (dir / "infeasible.yaml").string() + " --out " + (dir / "i").string()),
              kExitInfeasible);

    EXPECT_EQ(run_tool("simulate --config " + good + " --max-jumps 2 --out " + (dir / "z").string()), kExitAbnormal);
    EXPECT_EQ(run_tool("track --config " + good + " --tol-override rtol=1e-9 --seed 4 --out " + (dir / "t").string()),
              kExitOk);
}
