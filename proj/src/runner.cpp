#include "hybridtrack/runner.hpp"

#include <json.hpp>

#include <future>
#include <sstream>

namespace hybridtrack {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string header(const char* prefix, Eigen::Index n) {
    std::string h;
    for (Eigen::Index i = 1; i <= n; ++i) h += std::string(",") + prefix + std::to_string(i);
    return h;
}

void append(std::string& row, const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) row += "," + format_number(v(i));
}

std::string row_tj(double t, int j) { return format_number(t) + "," + std::to_string(j); }

ordered_json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

class Writer {
public:
    explicit Writer(fs::path dir) : dir_(std::move(dir)) {}
    void write(const std::string& name, const std::string& content) {
        const fs::path p = dir_ / name;
        write_file_atomic(p, content);
        files.push_back(p);
    }
    void report(const ordered_json& doc, const std::string& text) {
        write("report.json", doc.dump(2) + "\n");
        write("report.txt", text);
    }
    std::vector<fs::path> files;

private:
    fs::path dir_;
};

InputFn feedforward_input(const Scenario& sc) {
    const Feedforward uff = sc.controller.u_ff;
    return [uff](double t, const Vec&) { return uff(t); };
}

ordered_json jump_table(const HybridArc& arc) {
    ordered_json rows = ordered_json::array();
    for (const auto& jr : arc.jumps) rows.push_back({{"t", jr.t}, {"j", jr.j}, {"pre", to_json(jr.pre)}, {"post", to_json(jr.post)}});
    return rows;
}

std::string margins_text(const std::vector<double>& m) {
    std::string s;
    for (double v : m) s += " " + format_number(v);
    return s;
}

}  // namespace

std::string arc_csv(const HybridArc& arc) {
    const Eigen::Index n = arc.samples.empty() ? 0 : arc.samples.front().front().x.size();
    std::string out = "t,j" + header("x", n) + "\n";
    for (std::size_t k = 0; k < arc.samples.size(); ++k) {
        const int j = arc.domain.intervals[k].j;
        for (const auto& s : arc.samples[k]) {
            std::string row = row_tj(s.t, j);
            append(row, s.x);
            out += row + "\n";
        }
    }
    return out;
}

CommandResult cmd_simulate(const RunConfig& cfg, const fs::path& out) {
    const Scenario& sc = cfg.scenario;
    Writer w(out);
    ordered_json doc;
    doc["scenario"] = sc.name;
    std::ostringstream txt;
    txt << "scenario " << sc.name << "\n";
    CommandResult res;

    std::vector<std::pair<std::string, Vec>> starts = {{"reference", sc.reference_start}, {"tracking_open_loop", sc.tracking_start}};
    if (sc.neighbor_start) starts.emplace_back("neighbor", *sc.neighbor_start);
    for (const auto& [label, x0] : starts) {
        ordered_json entry;
        entry["start"] = to_json(x0);
        try {
            const HybridArc arc = simulate(sc.system, x0, sc.t0, sc.horizon, feedforward_input(sc), cfg.limits, cfg.integrator);
            w.write(label + ".csv", arc_csv(arc));
            entry["termination"] = to_string(arc.termination);
            entry["jumps"] = jump_table(arc);
            txt << label << ": " << to_string(arc.termination) << ", " << arc.jumps.size() << " jumps, t_end "
                << format_number(arc.t_end()) << "\n";
            if (arc.termination != Termination::HorizonReached) res.exit_code = kExitAbnormal;
        } catch (const HybridError& e) {
            entry["error"] = e.what();
            txt << label << ": error " << e.what() << "\n";
            res.exit_code = kExitAbnormal;
        }
        doc["simulation"][label] = entry;
    }

    if (sc.neighbor_start) {
        try {
            const InputFn u = feedforward_input(sc);
            CombinedOptions copt;
            copt.limits = cfg.limits;
            copt.integrator = cfg.integrator;
            const CombinedArc pair =
                simulate_combined(sc.system, sc.reference_start, *sc.neighbor_start, sc.t0, sc.horizon, u,
                                  [u](double t, const Vec& x, const Vec&, int) { return u(t, x); }, copt);
            const auto d = distance_profile(sc.system, pair);
            std::string csv = "t,j,e,d\n";
            std::size_t i = 0;
            for (std::size_t k = 0; k < pair.samples.size(); ++k)
                for (const auto& s : pair.samples[k]) {
                    csv += row_tj(s.t, pair.domain.intervals[k].j) + "," + format_number((s.x - s.y).norm()) + "," +
                           format_number(d[i++].d) + "\n";
                }
            w.write("pair_error.csv", csv);
            const double e0 = (sc.reference_start - *sc.neighbor_start).norm();
            const auto& last = pair.samples.back().back();
            doc["pair"] = {{"initial_error", e0}, {"final_error", (last.x - last.y).norm()}, {"termination", to_string(pair.termination)}};
            txt << "reference vs neighbor: error " << format_number(e0) << " -> " << format_number((last.x - last.y).norm()) << "\n";
        } catch (const HybridError& e) {
            doc["pair"] = {{"error", e.what()}};
            res.exit_code = kExitAbnormal;
        }
    }
    w.report(doc, txt.str());
    res.files = w.files;
    res.summary = txt.str();
    return res;
}

CommandResult cmd_certify(const RunConfig& cfg, const fs::path& out) {
    Scenario sc = cfg.scenario;
    if (sc.dwell) sc = attach_reference(sc);
    const ScenarioCheck chk = self_check(sc, cfg.samples, cfg.seed);
    const auto& d = sc.design.derived;

    ordered_json doc;
    doc["scenario"] = sc.name;
    auto& cert = doc["certificate"];
    cert["jump_conditions"] = {{"ok", chk.jump.ok}, {"eig_margins", chk.jump.eig_margins}};
    cert["flow_lmis"] = {{"ok", chk.flow.ok}, {"eig_margins", chk.flow.eig_margins}};
    ordered_json geo = {{"ok", chk.geometry.holds()},
                        {"z", {sc.geometry.z3, sc.geometry.z4, sc.geometry.z5}},
                        {"worst_margin", chk.geometry.worst_margin},
                        {"checked", chk.geometry.checked},
                        {"samples", cfg.samples},
                        {"seed", cfg.seed}};
    cert["guard_geometry"] = geo;
    cert["sublevel"] = {{"delta1", chk.sublevel.delta1},
                        {"vL", chk.sublevel.vL},
                        {"bound_guard", chk.sublevel.bound_guard},
                        {"bound_image", chk.sublevel.bound_image},
                        {"bound_image_alt", chk.sublevel.bound_image_alt},
                        {"bound_level", chk.sublevel.bound_level},
                        {"lambda_lo", chk.sublevel.lambda_lo},
                        {"ell_g", chk.sublevel.ell_g},
                        {"notes", chk.sublevel.notes}};
    cert["class_k"] = {{"alpha1", chk.class_k.alpha1}, {"alpha2", chk.class_k.alpha2}, {"lambda_lo", chk.class_k.lambda_lo},
                       {"lambda_hi", chk.class_k.lambda_hi}, {"sigma", chk.class_k.sigma}, {"LV", d.LV}};
    if (sc.dwell) {
        cert["dwell"] = {{"tau", sc.dwell->tau},
                         {"N0", sc.dwell->N0},
                         {"kind", sc.dwell->kind == DwellKind::MaximalAverage ? "maximal" : "minimal"},
                         {"holds_on_reference", chk.dwell->holds},
                         {"margin", chk.dwell->margin}};
    }
    ordered_json verdict = {{"case", to_string(chk.verdict.which)},
                            {"expected", to_string(sc.expected)},
                            {"flow_rate", chk.verdict.flow_rate},
                            {"jump_rate", chk.verdict.jump_rate},
                            {"details", chk.verdict.details}};
    if (chk.verdict.combined_dwell) {
        verdict["average_rate"] = chk.verdict.average_rate;
        verdict["kbar"] = chk.verdict.kbar;
    }
    cert["verdict"] = verdict;
    cert["ok"] = chk.ok();

    std::ostringstream txt;
    txt << "scenario " << sc.name << "\n";
    txt << "jump conditions: " << (chk.jump.ok ? "ok" : "FAILED") << ", max eigenvalues" << margins_text(chk.jump.eig_margins) << "\n";
    txt << "flow LMIs: " << (chk.flow.ok ? "ok" : "FAILED") << ", max eigenvalues" << margins_text(chk.flow.eig_margins) << "\n";
    txt << "guard geometry: " << (chk.geometry.holds() ? "ok" : "FAILED") << ", worst margins"
        << margins_text({chk.geometry.worst_margin.begin(), chk.geometry.worst_margin.end()}) << "\n";
    txt << "delta1 " << format_number(chk.sublevel.delta1) << ", vL " << format_number(chk.sublevel.vL) << "\n";
    if (chk.dwell)
        txt << "dwell tau " << format_number(sc.dwell->tau) << ", N0 " << format_number(sc.dwell->N0) << ": "
            << (chk.dwell->holds ? "holds" : "FAILS") << " on the reference\n";
    txt << "verdict " << to_string(chk.verdict.which) << " (expected " << to_string(sc.expected) << "): " << chk.verdict.details
        << "\n";

    Writer w(out);
    w.report(doc, txt.str());
    CommandResult res;
    res.exit_code = chk.ok() ? kExitOk : kExitInfeasible;
    res.files = w.files;
    res.summary = txt.str();
    return res;
}

CommandResult cmd_track(const RunConfig& cfg, const fs::path& out) {
    const Scenario sc = attach_reference(cfg.scenario);
    ClosedLoopOptions opt;
    opt.limits = cfg.limits;
    opt.integrator = cfg.integrator;
    opt.hysteresis = cfg.hysteresis;
    opt.monitor = cfg.monitor;

    Writer w(out);
    CommandResult res;
    ordered_json doc;
    doc["scenario"] = sc.name;
    std::ostringstream txt;
    txt << "scenario " << sc.name << "\n";

    ClosedLoopResult cl;
    try {
        cl = closed_loop_simulate(sc.system, sc.design, sc.controller, sc.tracking_start, sc.t0, sc.horizon, opt);
    } catch (const HybridError& e) {
        doc["error"] = e.what();
        txt << "error " << e.what() << "\n";
        w.report(doc, txt.str());
        return {kExitAbnormal, w.files, txt.str()};
    }

    const Eigen::Index n = sc.system.dim();
    std::string states = "t,j" + header("x", n) + header("y", n) + "\n";
    std::string err = "t,j,e\n", dist = "t,j,d\n", lyap = "t,j,V,region\n", ctrl = "t,j,u_ff,u_fb,u\n", reg = "t,j,region\n";
    std::size_t i = 0;
    for (std::size_t k = 0; k < cl.arc.samples.size(); ++k) {
        const int j = cl.arc.domain.intervals[k].j;
        for (const auto& s : cl.arc.samples[k]) {
            const std::string tj = row_tj(s.t, j);
            std::string row = tj;
            append(row, s.x);
            append(row, s.y);
            states += row + "\n";
            err += tj + "," + format_number((s.x - s.y).norm()) + "\n";
            dist += tj + "," + format_number(cl.distance[i].d) + "\n";
            const VSample& v = cl.monitor.series[i];
            lyap += tj + "," + format_number(v.V) + "," + to_string(v.region) + "\n";
            const ControlSample& c = cl.control[i];
            ctrl += tj + "," + format_number(c.u_ff) + "," + format_number(c.u_fb) + "," + format_number(c.u_ff + c.u_fb) + "\n";
            reg += tj + "," + to_string(c.region) + "\n";
            ++i;
        }
    }
    w.write("states.csv", states);
    w.write("euclidean_error.csv", err);
    w.write("distance_d.csv", dist);
    w.write("lyapunov_V.csv", lyap);
    w.write("control_u.csv", ctrl);
    w.write("region.csv", reg);

    ordered_json jumps = ordered_json::array();
    for (const auto& jp : cl.arc.jumps)
        jumps.push_back({{"t", jp.t}, {"j", jp.j}, {"component", jp.jumped == Component::X ? "x" : "y"}});
    ordered_json pairs = ordered_json::array();
    for (const auto& p : jump_time_pairs(cl.arc)) pairs.push_back({{"t_x", p.t_x}, {"t_y", p.t_y}, {"mismatch", p.mismatch()}});
    const auto& m = cl.monitor;
    doc["simulation"] = {{"termination", to_string(cl.arc.termination)}, {"jumps", jumps}, {"jump_pairs", pairs}};
    doc["tracking"] = {{"d_initial", cl.distance.front().d},
                       {"d_final", cl.distance.back().d},
                       {"V_initial", m.series.front().V},
                       {"V_final", m.series.back().V},
                       {"selector_disagreements", cl.selector_disagreements}};
    doc["monitor"] = {{"flow_violations", m.flow_violations.size()},
                      {"jump_violations", m.jump_violations.size()},
                      {"envelope_ratio", m.envelope_ratio},
                      {"outside_sublevel", m.outside_sublevel},
                      {"transitions", m.transitions.size()},
                      {"checked_transitions", m.checked_transitions()},
                      {"inadmissible_transitions", m.inadmissible_transitions()}};

    txt << "closed loop: " << to_string(cl.arc.termination) << ", " << cl.arc.jumps.size() << " jumps\n";
    txt << "d " << format_number(cl.distance.front().d) << " -> " << format_number(cl.distance.back().d) << "\n";
    txt << "V " << format_number(m.series.front().V) << " -> " << format_number(m.series.back().V) << "\n";
    txt << "monitor: " << m.flow_violations.size() << " flow, " << m.jump_violations.size() << " jump violations, envelope ratio "
        << format_number(m.envelope_ratio) << ", " << m.inadmissible_transitions() << " of " << m.checked_transitions()
        << " checked transitions inadmissible\n";

    w.report(doc, txt.str());
    if (cl.arc.termination != Termination::HorizonReached) res.exit_code = kExitAbnormal;
    res.files = w.files;
    res.summary = txt.str();
    return res;
}

CommandResult cmd_figures(const fs::path& out) {
    const fs::path root = out / "v1";
    std::vector<std::future<CommandResult>> jobs;
    for (const auto& name : builtin_names()) {
        jobs.push_back(std::async(std::launch::async, [root, name] {
            const RunConfig cfg = builtin_config(name);
            CommandResult all;
            for (const auto& [sub, cmd] : {std::pair{"simulate", &cmd_simulate}, {"certify", &cmd_certify}, {"track", &cmd_track}}) {
                CommandResult r = cmd(cfg, root / name / sub);
                all.exit_code = std::max(all.exit_code, r.exit_code);
                all.files.insert(all.files.end(), r.files.begin(), r.files.end());
                all.summary += r.summary;
            }
            write_file_atomic(root / name / "scenario.yaml", dump_config(cfg));
            all.files.push_back(root / name / "scenario.yaml");
            return all;
        }));
    }
    CommandResult res;
    for (auto& f : jobs) {
        CommandResult r = f.get();
        res.exit_code = std::max(res.exit_code, r.exit_code);
        res.files.insert(res.files.end(), r.files.begin(), r.files.end());
        res.summary += r.summary;
    }
    return res;
}

}  // namespace hybridtrack
