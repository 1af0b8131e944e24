#include "hybridtrack/scenario_io.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

namespace hybridtrack {

ConfigError::ConfigError(const std::string& key, int line, const std::string& what)
    : HybridError(ErrorCode::ConfigError,
                  (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + (key.empty() ? "" : key + ": ") + what),
      key_(key),
      line_(line) {}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

int line_of(const YAML::Node& n) { return n.Mark().is_null() ? 0 : n.Mark().line + 1; }

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Map node with a fixed key set.
class Section {
public:
    Section(const YAML::Node& node, std::string path, std::initializer_list<const char*> allowed)
        : node_(node), path_(std::move(path)) {
        if (!node_.IsMap()) throw ConfigError(path_, line_of(node_), "expected a mapping");
        std::set<std::string> ok(allowed.begin(), allowed.end());
        for (const auto& kv : node_) {
            const std::string k = kv.first.as<std::string>();
            if (!ok.count(k)) throw ConfigError(join(path_, k), line_of(kv.first), "unknown key");
        }
    }

    bool has(const char* key) const { return static_cast<bool>(node_[key]); }

    YAML::Node get(const char* key) const {
        const YAML::Node n = node_[key];
        if (!n) throw ConfigError(join(path_, key), line_of(node_), "missing key");
        return n;
    }

    Section section(const char* key, std::initializer_list<const char*> allowed) const {
        return Section(get(key), join(path_, key), allowed);
    }

    double number(const char* key) const { return as_number(get(key), join(path_, key)); }
    double number(const char* key, double fallback) const { return has(key) ? number(key) : fallback; }

    std::string text(const char* key) const {
        const YAML::Node n = get(key);
        if (!n.IsScalar()) throw ConfigError(join(path_, key), line_of(n), "expected a string");
        return n.Scalar();
    }

    Vec vec(const char* key, Eigen::Index n) const {
        const YAML::Node v = get(key);
        const std::string p = join(path_, key);
        if (!v.IsSequence()) throw ConfigError(p, line_of(v), "expected a list of numbers");
        if (n >= 0 && static_cast<Eigen::Index>(v.size()) != n)
            throw ConfigError(p, line_of(v), "expected " + std::to_string(n) + " entries, got " + std::to_string(v.size()));
        Vec out(static_cast<Eigen::Index>(v.size()));
        for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = as_number(v[i], p);
        return out;
    }

    Mat mat(const char* key, Eigen::Index rows, Eigen::Index cols) const {
        const YAML::Node m = get(key);
        const std::string p = join(path_, key);
        if (!m.IsSequence() || m.size() == 0) throw ConfigError(p, line_of(m), "expected a list of rows");
        if (rows >= 0 && static_cast<Eigen::Index>(m.size()) != rows)
            throw ConfigError(p, line_of(m), "expected " + std::to_string(rows) + " rows, got " + std::to_string(m.size()));
        const Eigen::Index nr = static_cast<Eigen::Index>(m.size());
        const Eigen::Index nc = cols >= 0 ? cols : (m[0].IsSequence() ? static_cast<Eigen::Index>(m[0].size()) : 0);
        Mat out(nr, nc);
        for (Eigen::Index i = 0; i < nr; ++i) {
            const YAML::Node r = m[static_cast<std::size_t>(i)];
            if (!r.IsSequence() || static_cast<Eigen::Index>(r.size()) != nc)
                throw ConfigError(p, line_of(r), "row " + std::to_string(i) + " must have " + std::to_string(nc) + " entries");
            for (Eigen::Index k = 0; k < nc; ++k) out(i, k) = as_number(r[static_cast<std::size_t>(k)], p);
        }
        return out;
    }

    const std::string& path() const { return path_; }
    int line() const { return line_of(node_); }

private:
    static double as_number(const YAML::Node& n, const std::string& path) {
        if (!n.IsScalar()) throw ConfigError(path, line_of(n), "expected a number");
        try {
            return n.as<double>();
        } catch (const YAML::Exception&) {
            throw ConfigError(path, line_of(n), "'" + n.Scalar() + "' is not a number");
        }
    }

    YAML::Node node_;
    std::string path_;
};

StabilityCase parse_case(const std::string& s, const std::string& path, int line) {
    for (auto c : {StabilityCase::Case1, StabilityCase::Case2, StabilityCase::Case3, StabilityCase::Inconclusive})
        if (s == to_string(c)) return c;
    throw ConfigError(path, line, "unknown verdict '" + s + "'");
}

template <typename F>
void rethrow_as_config(const std::string& key, int line, F&& f) {
    try {
        f();
    } catch (const ConfigError&) {
        throw;
    } catch (const HybridError& e) {
        throw ConfigError(key, line, e.what());
    }
}

RunConfig parse_root(const YAML::Node& root) {
    const Section top(root, "",
                      {"name", "system", "design", "geometry", "controller", "initial", "t0", "horizon", "dwell", "expected",
                       "sampling_scales", "simulation", "monitor", "certificate", "output_dir"});
    RunConfig cfg;
    Scenario& sc = cfg.scenario;
    sc.name = top.text("name");

    const Section sys = top.section("system", {"A", "B", "E", "L", "H", "J", "K", "z1", "z2", "s", "r", "exclusion", "tolerances"});
    AffineHybridSystem& p = sc.system;
    p.A = sys.mat("A", -1, -1);
    const Eigen::Index n = p.A.rows();
    if (p.A.cols() != n) throw ConfigError("system.A", sys.line(), "must be square");
    p.B = sys.vec("B", n);
    p.E = sys.vec("E", n);
    p.L = sys.mat("L", n, n);
    p.H = sys.vec("H", n);
    p.J = sys.vec("J", n).transpose();
    p.K = sys.number("K");
    p.z1 = sys.vec("z1", n).transpose();
    p.z2 = sys.number("z2");
    const double s = sys.number("s");
    if (s != 1.0 && s != -1.0) throw ConfigError("system.s", line_of(sys.get("s")), "must be 1 or -1");
    p.s = static_cast<int>(s);
    p.jump_margin = sys.number("r");
    if (sys.has("exclusion")) {
        const Section ex = sys.section("exclusion", {"center", "radius"});
        p.exclusion = ExclusionBall{ex.vec("center", n), ex.number("radius")};
    }
    if (sys.has("tolerances")) {
        const Section tol = sys.section("tolerances", {"event", "membership"});
        p.tol.event = tol.number("event", p.tol.event);
        p.tol.membership = tol.number("membership", p.tol.membership);
    }
    rethrow_as_config("system", sys.line(), [&] { p.validate(); });

    const Section des = top.section("design", {"P0", "Ps", "M", "lambda_c", "lambda_d"});
    sc.design.P0 = des.mat("P0", n, n);
    sc.design.Ps = des.mat("Ps", n, n);
    sc.design.M = des.vec("M", n);
    sc.design.lambda_c = des.number("lambda_c");
    sc.design.lambda_d = des.number("lambda_d");

    const Section geo = top.section("geometry", {"z3", "z4", "z5"});
    sc.geometry = {geo.number("z3"), geo.number("z4"), geo.number("z5")};
    rethrow_as_config("design", des.line(), [&] { sc.design = derive_constants(p, sc.design, sc.geometry); });

    const Section ctl = top.section("controller", {"c0", "c1", "c2", "feedforward"});
    sc.controller.gains = {ctl.vec("c0", n).transpose(), ctl.vec("c1", n).transpose(), ctl.vec("c2", n).transpose()};
    if (ctl.has("feedforward")) {
        const Section ff = ctl.section("feedforward", {"constant", "amplitude", "omega"});
        sc.controller.u_ff = {ff.number("constant", 0.0), ff.number("amplitude", 0.0), ff.number("omega", 0.0)};
    }

    const Section init = top.section("initial", {"reference", "tracking", "neighbor"});
    sc.reference_start = init.vec("reference", n);
    sc.tracking_start = init.vec("tracking", n);
    if (init.has("neighbor")) sc.neighbor_start = init.vec("neighbor", n);

    sc.t0 = top.number("t0", 0.0);
    sc.horizon = top.number("horizon");
    if (!(sc.horizon >= 0.0)) throw ConfigError("horizon", line_of(top.get("horizon")), "must be nonnegative");

    if (top.has("dwell")) {
        const Section dw = top.section("dwell", {"tau", "N0", "kind"});
        const std::string kind = dw.text("kind");
        DwellTimeSpec spec{dw.number("tau"), dw.number("N0"), DwellKind::MinimalAverage};
        if (kind == "maximal")
            spec.kind = DwellKind::MaximalAverage;
        else if (kind != "minimal")
            throw ConfigError("dwell.kind", line_of(dw.get("kind")), "must be 'minimal' or 'maximal'");
        if (!(spec.tau > 0.0)) throw ConfigError("dwell.tau", line_of(dw.get("tau")), "must be positive");
        sc.dwell = spec;
    }
    if (top.has("expected")) sc.expected = parse_case(top.text("expected"), "expected", line_of(top.get("expected")));
    const Vec scales = top.vec("sampling_scales", -1);
    sc.sampling_scales.assign(scales.data(), scales.data() + scales.size());

    if (top.has("simulation")) {
        const Section sim =
            top.section("simulation", {"max_jumps", "zeno_window", "rtol", "atol", "h_min", "sample_dt", "escape_bound"});
        cfg.limits.max_jumps = static_cast<int>(sim.number("max_jumps", cfg.limits.max_jumps));
        cfg.limits.zeno_window = sim.number("zeno_window", cfg.limits.zeno_window);
        cfg.integrator.rtol = sim.number("rtol", cfg.integrator.rtol);
        cfg.integrator.atol = sim.number("atol", cfg.integrator.atol);
        cfg.integrator.h_min = sim.number("h_min", cfg.integrator.h_min);
        cfg.integrator.sample_dt = sim.number("sample_dt", cfg.integrator.sample_dt);
        cfg.integrator.escape_bound = sim.number("escape_bound", cfg.integrator.escape_bound);
        if (!(cfg.integrator.sample_dt > 0.0))
            throw ConfigError("simulation.sample_dt", line_of(sim.get("sample_dt")), "must be positive");
    }
    if (top.has("monitor")) {
        const Section mon = top.section("monitor", {"flow_tolerance", "jump_tolerance", "floor", "hysteresis"});
        cfg.monitor.flow_tolerance = mon.number("flow_tolerance", cfg.monitor.flow_tolerance);
        cfg.monitor.jump_tolerance = mon.number("jump_tolerance", cfg.monitor.jump_tolerance);
        cfg.monitor.floor = mon.number("floor", cfg.monitor.floor);
        cfg.hysteresis = mon.number("hysteresis", cfg.hysteresis);
    }
    if (top.has("certificate")) {
        const Section cert = top.section("certificate", {"samples", "seed"});
        cfg.samples = static_cast<int>(cert.number("samples", cfg.samples));
        cfg.seed = static_cast<unsigned>(cert.number("seed", cfg.seed));
    }
    if (top.has("output_dir")) cfg.output_dir = top.text("output_dir");
    return cfg;
}

std::string list(const Vec& v) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + format_number(v(i));
    return s + "]";
}

std::string list(const Mat& m) {
    std::string s = "[";
    for (Eigen::Index i = 0; i < m.rows(); ++i) s += (i ? ", " : "") + list(Vec(m.row(i).transpose()));
    return s + "]";
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError("", e.mark.line + 1, e.msg);
    }
    return parse_root(root);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", 0, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const ConfigError& e) {
        throw ConfigError(e.key(), e.line(), std::string(e.what()) + " (in " + path.string() + ")");
    }
}

std::string dump_config(const RunConfig& cfg) {
    const Scenario& sc = cfg.scenario;
    const AffineHybridSystem& p = sc.system;
    std::ostringstream o;
    auto num = format_number;
    o << "name: " << sc.name << "\n";
    o << "system:\n";
    o << "  A: " << list(p.A) << "\n";
    o << "  B: " << list(p.B) << "\n";
    o << "  E: " << list(p.E) << "\n";
    o << "  L: " << list(p.L) << "\n";
    o << "  H: " << list(p.H) << "\n";
    o << "  J: " << list(Vec(p.J.transpose())) << "\n";
    o << "  K: " << num(p.K) << "\n";
    o << "  z1: " << list(Vec(p.z1.transpose())) << "\n";
    o << "  z2: " << num(p.z2) << "\n";
    o << "  s: " << p.s << "\n";
    o << "  r: " << num(p.jump_margin) << "\n";
    if (p.exclusion) o << "  exclusion: {center: " << list(p.exclusion->center) << ", radius: " << num(p.exclusion->radius) << "}\n";
    o << "  tolerances: {event: " << num(p.tol.event) << ", membership: " << num(p.tol.membership) << "}\n";
    o << "design:\n";
    o << "  P0: " << list(sc.design.P0) << "\n";
    o << "  Ps: " << list(sc.design.Ps) << "\n";
    o << "  M: " << list(sc.design.M) << "\n";
    o << "  lambda_c: " << num(sc.design.lambda_c) << "\n";
    o << "  lambda_d: " << num(sc.design.lambda_d) << "\n";
    o << "geometry: {z3: " << num(sc.geometry.z3) << ", z4: " << num(sc.geometry.z4) << ", z5: " << num(sc.geometry.z5)
      << "}\n";
    const auto& g = sc.controller.gains;
    o << "controller:\n";
    o << "  c0: " << list(Vec(g.c0.transpose())) << "\n";
    o << "  c1: " << list(Vec(g.c1.transpose())) << "\n";
    o << "  c2: " << list(Vec(g.c2.transpose())) << "\n";
    const auto& ff = sc.controller.u_ff;
    o << "  feedforward: {constant: " << num(ff.constant) << ", amplitude: " << num(ff.amplitude)
      << ", omega: " << num(ff.omega) << "}\n";
    o << "initial:\n";
    o << "  reference: " << list(sc.reference_start) << "\n";
    o << "  tracking: " << list(sc.tracking_start) << "\n";
    if (sc.neighbor_start) o << "  neighbor: " << list(*sc.neighbor_start) << "\n";
    o << "t0: " << num(sc.t0) << "\n";
    o << "horizon: " << num(sc.horizon) << "\n";
    if (sc.dwell)
        o << "dwell: {tau: " << num(sc.dwell->tau) << ", N0: " << num(sc.dwell->N0)
          << ", kind: " << (sc.dwell->kind == DwellKind::MaximalAverage ? "maximal" : "minimal") << "}\n";
    o << "expected: " << to_string(sc.expected) << "\n";
    o << "sampling_scales: "
      << list(Vec(Eigen::Map<const Vec>(sc.sampling_scales.data(), static_cast<Eigen::Index>(sc.sampling_scales.size()))))
      << "\n";
    o << "simulation:\n";
    o << "  max_jumps: " << cfg.limits.max_jumps << "\n";
    o << "  zeno_window: " << num(cfg.limits.zeno_window) << "\n";
    o << "  rtol: " << num(cfg.integrator.rtol) << "\n";
    o << "  atol: " << num(cfg.integrator.atol) << "\n";
    o << "  h_min: " << num(cfg.integrator.h_min) << "\n";
    o << "  sample_dt: " << num(cfg.integrator.sample_dt) << "\n";
    o << "  escape_bound: " << num(cfg.integrator.escape_bound) << "\n";
    o << "monitor:\n";
    o << "  flow_tolerance: " << num(cfg.monitor.flow_tolerance) << "\n";
    o << "  jump_tolerance: " << num(cfg.monitor.jump_tolerance) << "\n";
    o << "  floor: " << num(cfg.monitor.floor) << "\n";
    o << "  hysteresis: " << num(cfg.hysteresis) << "\n";
    o << "certificate: {samples: " << cfg.samples << ", seed: " << cfg.seed << "}\n";
    if (!cfg.output_dir.empty()) o << "output_dir: " << cfg.output_dir << "\n";
    return o.str();
}

std::vector<std::string> builtin_names() { return {"bouncing_ball", "dissipative_oscillator"}; }

RunConfig builtin_config(const std::string& name) {
    RunConfig cfg;
    if (name == "bouncing_ball")
        cfg.scenario = bouncing_ball();
    else if (name == "dissipative_oscillator")
        cfg.scenario = dissipative_oscillator();
    else
        throw ConfigError("name", 0, "no built-in scenario '" + name + "'");
    cfg.output_dir = "out/" + name;
    return cfg;
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError(assignment, 0, "override must look like KEY=VALUE");
    const std::string key = assignment.substr(0, eq), val = assignment.substr(eq + 1);
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(val, &used);
        if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
        throw ConfigError(key, 0, "'" + val + "' is not a number");
    }
    if (key == "event")
        cfg.scenario.system.tol.event = v;
    else if (key == "membership")
        cfg.scenario.system.tol.membership = v;
    else if (key == "rtol")
        cfg.integrator.rtol = v;
    else if (key == "atol")
        cfg.integrator.atol = v;
    else if (key == "sample_dt")
        cfg.integrator.sample_dt = v;
    else if (key == "flow_tolerance")
        cfg.monitor.flow_tolerance = v;
    else if (key == "jump_tolerance")
        cfg.monitor.jump_tolerance = v;
    else if (key == "hysteresis")
        cfg.hysteresis = v;
    else
        throw ConfigError(key, 0, "unknown override key");
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace hybridtrack
