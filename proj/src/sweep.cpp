#include "cpq/sweep.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <set>
#include <variant>

#include "cpq/constants.hpp"
#include "cpq/effective_spin.hpp"
#include "cpq/giant_spin.hpp"
#include "cpq/parallel.hpp"

namespace cpq {

using nlohmann::json;

std::string to_string(SweepMode mode) {
    switch (mode) {
        case SweepMode::spectrum: return "spectrum";
        case SweepMode::sweep_charge: return "sweep-charge";
        case SweepMode::sweep_flux: return "sweep-flux";
        case SweepMode::fit_tb: return "fit-tb";
        case SweepMode::lmg_scan: return "lmg-scan";
        case SweepMode::capmat: return "capmat";
    }
    return "?";
}

namespace {

// ---------------------------------------------------------------- parameter paths

struct PathTarget {
    enum class Field { c_big, c_small, flux, offset_charge, ej } field;
    int loop = -1; // -1: every loop
    int arm = 0;   // 1 or 2 for Field::ej
    int harmonic = 0;
};

PathTarget parse_path(const std::string& path, int n_loops, const std::string& key) {
    PathTarget t;
    if (path == "c_big") {
        t.field = PathTarget::Field::c_big;
        return t;
    }
    if (path == "c_small") {
        t.field = PathTarget::Field::c_small;
        return t;
    }
    const std::string prefix = "loops[";
    if (path.rfind(prefix, 0) != 0)
        throw ConfigError(key, "unknown parameter path '" + path + "'");
    const auto close = path.find(']');
    if (close == std::string::npos || path.size() < close + 2 || path[close + 1] != '.')
        throw ConfigError(key, "malformed parameter path '" + path + "'");
    const std::string idx = path.substr(prefix.size(), close - prefix.size());
    if (idx == "*") {
        t.loop = -1;
    } else {
        try {
            t.loop = std::stoi(idx);
        } catch (...) {
            throw ConfigError(key, "bad loop index in '" + path + "'");
        }
        if (t.loop < 0 || t.loop >= n_loops)
            throw ConfigError(key, "loop index out of range in '" + path + "'");
    }
    const std::string field = path.substr(close + 2);
    if (field == "flux") {
        t.field = PathTarget::Field::flux;
    } else if (field == "offset_charge") {
        t.field = PathTarget::Field::offset_charge;
    } else if (field == "arm1.ej1" || field == "arm1.ej2" || field == "arm2.ej1" ||
               field == "arm2.ej2") {
        t.field = PathTarget::Field::ej;
        t.arm = field[3] - '0';
        t.harmonic = field.back() - '0';
    } else {
        throw ConfigError(key, "unknown loop field in '" + path + "'");
    }
    return t;
}

void apply_path(CircuitSpec& spec, const PathTarget& t, double v) {
    auto set_loop = [&](InterferometerLoop& loop) {
        switch (t.field) {
            case PathTarget::Field::flux: loop.flux = v; break;
            case PathTarget::Field::offset_charge: loop.offset_charge = v; break;
            case PathTarget::Field::ej: {
                JunctionArm& arm = t.arm == 1 ? loop.arm1 : loop.arm2;
                (t.harmonic == 1 ? arm.ej1 : arm.ej2) = v;
                break;
            }
            default: break;
        }
    };
    if (t.field == PathTarget::Field::c_big) {
        spec.c_big = v;
        return;
    }
    if (t.field == PathTarget::Field::c_small) {
        spec.c_small = v;
        return;
    }
    if (t.loop >= 0) {
        set_loop(spec.loops[t.loop]);
    } else {
        for (auto& loop : spec.loops) set_loop(loop);
    }
}

// ---------------------------------------------------------------- validation

struct Issues {
    std::vector<std::string> list;
    void add(const std::string& key, const std::string& msg) { list.push_back(key + ": " + msg); }
};

void check_keys(const json& obj, const std::string& ctx,
                const std::set<std::string>& allowed, Issues& out) {
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            out.add(ctx.empty() ? item.key() : ctx + "." + item.key(), "unknown key");
}

bool get_number(const json& obj, const std::string& ctx, const char* key, double& dst,
                Issues& out) {
    if (!obj.contains(key)) return false;
    if (!obj[key].is_number()) {
        out.add(ctx + "." + key, "must be a number");
        return false;
    }
    dst = obj[key].get<double>();
    return true;
}

bool get_int(const json& obj, const std::string& ctx, const char* key, long& dst, Issues& out) {
    if (!obj.contains(key)) return false;
    if (!obj[key].is_number_integer()) {
        out.add(ctx + "." + key, "must be an integer");
        return false;
    }
    dst = obj[key].get<long>();
    return true;
}

bool mode_from_string(const std::string& s, SweepMode& mode) {
    for (SweepMode m : {SweepMode::spectrum, SweepMode::sweep_charge, SweepMode::sweep_flux,
                        SweepMode::fit_tb, SweepMode::lmg_scan, SweepMode::capmat}) {
        if (to_string(m) == s) {
            mode = m;
            return true;
        }
    }
    return false;
}

void validate_circuit(const json& c, Issues& out) {
    if (!c.is_object()) {
        out.add("circuit", "must be an object");
        return;
    }
    check_keys(c, "circuit", {"c_big", "c_small", "loops"}, out);
    double v = 0.0;
    if (get_number(c, "circuit", "c_small", v, out)) {
        if (!(v > 0.0)) out.add("circuit.c_small", "must be > 0 fF (C_S > 0)");
    } else if (!c.contains("c_small")) {
        out.add("circuit.c_small", "required");
    }
    if (get_number(c, "circuit", "c_big", v, out) && v < 0.0)
        out.add("circuit.c_big", "must be >= 0 fF");
    if (!c.contains("loops") || !c["loops"].is_array() || c["loops"].empty()) {
        out.add("circuit.loops", "required non-empty array");
        return;
    }
    int i = 0;
    for (const auto& loop : c["loops"]) {
        const std::string ctx = "circuit.loops[" + std::to_string(i++) + "]";
        if (!loop.is_object()) {
            out.add(ctx, "must be an object");
            continue;
        }
        check_keys(loop, ctx, {"arm1", "arm2", "flux", "offset_charge"}, out);
        for (const char* arm : {"arm1", "arm2"}) {
            if (!loop.contains(arm)) continue;
            const std::string actx = ctx + "." + arm;
            if (!loop[arm].is_object()) {
                out.add(actx, "must be an object");
                continue;
            }
            check_keys(loop[arm], actx, {"ej1", "ej2"}, out);
            for (const char* h : {"ej1", "ej2"})
                if (get_number(loop[arm], actx, h, v, out) && v < 0.0)
                    out.add(actx + "." + h, "must be >= 0 GHz");
        }
        get_number(loop, ctx, "flux", v, out);
        get_number(loop, ctx, "offset_charge", v, out);
    }
}

} // namespace

std::vector<std::string> validate_config(const json& doc) {
    Issues out;
    if (!doc.is_object()) {
        out.add("config", "top level must be an object");
        return out.list;
    }
    check_keys(doc, "",
               {"mode", "circuit", "truncation", "eigenvalues", "sweep", "fit", "lmg", "flags",
                "output", "workers"},
               out);

    SweepMode mode = SweepMode::spectrum;
    if (!doc.contains("mode") || !doc["mode"].is_string()) {
        out.add("mode", "required string");
    } else if (!mode_from_string(doc["mode"].get<std::string>(), mode)) {
        out.add("mode", "unknown mode '" + doc["mode"].get<std::string>() + "'");
    }

    const bool needs_circuit = mode != SweepMode::lmg_scan;
    int n_loops = 0;
    if (doc.contains("circuit")) {
        validate_circuit(doc["circuit"], out);
        if (doc["circuit"].is_object() && doc["circuit"].contains("loops") &&
            doc["circuit"]["loops"].is_array())
            n_loops = static_cast<int>(doc["circuit"]["loops"].size());
    } else if (needs_circuit) {
        out.add("circuit", "required in mode " + to_string(mode));
    }

    if (doc.contains("truncation")) {
        const auto& t = doc["truncation"];
        if (!t.is_object()) {
            out.add("truncation", "must be an object");
        } else {
            check_keys(t, "truncation", {"n_max", "convergence_tol", "dim_ceiling"}, out);
            long iv = 0;
            double dv = 0.0;
            if (get_int(t, "truncation", "n_max", iv, out) && iv < 2)
                out.add("truncation.n_max", "must be >= 2");
            if (get_number(t, "truncation", "convergence_tol", dv, out) && !(dv > 0.0))
                out.add("truncation.convergence_tol", "must be > 0 GHz");
            if (get_int(t, "truncation", "dim_ceiling", iv, out) && iv < 5)
                out.add("truncation.dim_ceiling", "must be >= 5");
        }
    }

    long k = 6;
    if (get_int(doc, "config", "eigenvalues", k, out) && k < 2)
        out.add("eigenvalues", "must be >= 2");

    const bool sweep_mode = mode == SweepMode::spectrum || mode == SweepMode::sweep_charge ||
                            mode == SweepMode::sweep_flux;
    if (doc.contains("sweep")) {
        if (!sweep_mode) {
            out.add("sweep", "not used in mode " + to_string(mode));
        } else if (!doc["sweep"].is_array()) {
            out.add("sweep", "must be an array of axes");
        } else {
            int a = 0;
            for (const auto& axis : doc["sweep"]) {
                const std::string ctx = "sweep[" + std::to_string(a++) + "]";
                if (!axis.is_object()) {
                    out.add(ctx, "must be an object");
                    continue;
                }
                check_keys(axis, ctx, {"name", "paths", "start", "stop", "points"}, out);
                long points = 0;
                if (!get_int(axis, ctx, "points", points, out) && !axis.contains("points"))
                    out.add(ctx + ".points", "required");
                else if (points < 2)
                    out.add(ctx + ".points", "must be >= 2");
                double dv = 0.0;
                if (!axis.contains("start")) out.add(ctx + ".start", "required");
                else get_number(axis, ctx, "start", dv, out);
                if (!axis.contains("stop")) out.add(ctx + ".stop", "required");
                else get_number(axis, ctx, "stop", dv, out);
                if (!axis.contains("paths") || !axis["paths"].is_array() || axis["paths"].empty()) {
                    out.add(ctx + ".paths", "required non-empty array of parameter paths");
                    continue;
                }
                int pi = 0;
                for (const auto& p : axis["paths"]) {
                    const std::string pctx = ctx + ".paths[" + std::to_string(pi++) + "]";
                    if (!p.is_string()) {
                        out.add(pctx, "must be a string");
                        continue;
                    }
                    const std::string path = p.get<std::string>();
                    try {
                        parse_path(path, n_loops, pctx);
                    } catch (const ConfigError& e) {
                        out.add(pctx, e.what());
                        continue;
                    }
                    if (mode == SweepMode::sweep_charge &&
                        path.find("offset_charge") == std::string::npos)
                        out.add(pctx, "sweep-charge axes must target offset_charge");
                    if (mode == SweepMode::sweep_flux && path.find("flux") == std::string::npos)
                        out.add(pctx, "sweep-flux axes must target flux");
                }
            }
        }
    } else if (mode == SweepMode::sweep_charge || mode == SweepMode::sweep_flux) {
        out.add("sweep", "required in mode " + to_string(mode));
    }

    if (doc.contains("fit")) {
        const auto& f = doc["fit"];
        if (!f.is_object()) {
            out.add("fit", "must be an object");
        } else {
            check_keys(f, "fit", {"grid_points", "bands"}, out);
            long iv = 0;
            if (get_int(f, "fit", "grid_points", iv, out) && (iv < 5 || iv % 2 == 0))
                out.add("fit.grid_points", "must be odd and >= 5");
            if (get_int(f, "fit", "bands", iv, out) && iv < 2)
                out.add("fit.bands", "must be >= 2");
        }
    }
    if (mode == SweepMode::fit_tb && n_loops != 0 && n_loops > 2)
        out.add("circuit.loops", "fit-tb supports 1 or 2 loops");

    if (doc.contains("lmg")) {
        const auto& l = doc["lmg"];
        if (!l.is_object()) {
            out.add("lmg", "must be an object");
        } else {
            check_keys(l, "lmg", {"n", "j", "eps_start", "eps_stop", "eps_points"}, out);
            long iv = 0;
            double dv = 0.0;
            if (get_int(l, "lmg", "n", iv, out) && iv < 1)
                out.add("lmg.n", "must be >= 1");
            if (get_number(l, "lmg", "j", dv, out) && dv < 0.0)
                out.add("lmg.j", "must be >= 0 GHz");
            double start = 0.0, stop = 0.0;
            get_number(l, "lmg", "eps_start", start, out);
            get_number(l, "lmg", "eps_stop", stop, out);
            if (stop < start) out.add("lmg.eps_stop", "must be >= eps_start");
            if (get_int(l, "lmg", "eps_points", iv, out) && iv < 2)
                out.add("lmg.eps_points", "must be >= 2");
        }
    } else if (mode == SweepMode::lmg_scan) {
        out.add("lmg", "required in mode lmg-scan");
    }
    if (mode == SweepMode::lmg_scan && doc.contains("lmg") && doc["lmg"].is_object()) {
        for (const char* req : {"n", "j", "eps_start", "eps_stop", "eps_points"})
            if (!doc["lmg"].contains(req)) out.add(std::string("lmg.") + req, "required");
    }

    if (doc.contains("flags")) {
        const auto& f = doc["flags"];
        if (!f.is_object()) {
            out.add("flags", "must be an object");
        } else {
            check_keys(f, "flags",
                       {"linearized_flux_error", "store_eigenvectors", "gap_threshold"}, out);
            for (const char* b : {"linearized_flux_error", "store_eigenvectors"})
                if (f.contains(b) && !f[b].is_boolean())
                    out.add(std::string("flags.") + b, "must be a boolean");
            double dv = 0.0;
            if (get_number(f, "flags", "gap_threshold", dv, out) && !(dv > 0.0 && dv < 1.0))
                out.add("flags.gap_threshold", "must be in (0, 1)");
        }
    }

    if (doc.contains("output") && !doc["output"].is_string())
        out.add("output", "must be a string");
    long workers = 0;
    if (get_int(doc, "config", "workers", workers, out) && workers < 0)
        out.add("workers", "must be >= 0");

    return out.list;
}

SweepConfig parse_config(const json& doc) {
    const auto issues = validate_config(doc);
    if (!issues.empty()) {
        const std::string& first = issues.front();
        const auto colon = first.find(':');
        throw ConfigError(first.substr(0, colon), first.substr(colon + 2));
    }

    SweepConfig cfg;
    mode_from_string(doc["mode"].get<std::string>(), cfg.mode);

    if (doc.contains("circuit")) {
        const auto& c = doc["circuit"];
        cfg.circuit.c_big = c.value("c_big", 0.0);
        cfg.circuit.c_small = c.value("c_small", 0.0);
        for (const auto& l : c["loops"]) {
            InterferometerLoop loop;
            if (l.contains("arm1")) {
                loop.arm1.ej1 = l["arm1"].value("ej1", 0.0);
                loop.arm1.ej2 = l["arm1"].value("ej2", 0.0);
            }
            if (l.contains("arm2")) {
                loop.arm2.ej1 = l["arm2"].value("ej1", 0.0);
                loop.arm2.ej2 = l["arm2"].value("ej2", 0.0);
            }
            loop.flux = l.value("flux", 0.5);
            loop.offset_charge = l.value("offset_charge", 0.0);
            cfg.circuit.loops.push_back(loop);
        }
    }

    if (doc.contains("truncation")) {
        const auto& t = doc["truncation"];
        cfg.truncation.n_max = t.value("n_max", cfg.truncation.n_max);
        cfg.truncation.convergence_tol = t.value("convergence_tol", cfg.truncation.convergence_tol);
        cfg.truncation.dim_ceiling = t.value("dim_ceiling", cfg.truncation.dim_ceiling);
    }
    cfg.eigenvalues = static_cast<int>(doc.value("eigenvalues", 6));

    if (doc.contains("sweep")) {
        for (const auto& a : doc["sweep"]) {
            SweepAxis axis;
            for (const auto& p : a["paths"]) axis.paths.push_back(p.get<std::string>());
            axis.name = a.value("name", axis.paths.front());
            axis.start = a["start"].get<double>();
            axis.stop = a["stop"].get<double>();
            axis.points = static_cast<int>(a["points"].get<long>());
            cfg.axes.push_back(axis);
        }
    }

    if (doc.contains("fit")) {
        cfg.fit.grid_points = static_cast<int>(doc["fit"].value("grid_points", 9L));
        cfg.fit.bands = static_cast<int>(doc["fit"].value("bands", 0L));
    }
    if (cfg.mode == SweepMode::fit_tb && cfg.fit.bands == 0)
        cfg.fit.bands = cfg.circuit.n_loops() == 1 ? 2 : 4;

    if (doc.contains("lmg")) {
        const auto& l = doc["lmg"];
        cfg.lmg.n = static_cast<int>(l.value("n", 0L));
        cfg.lmg.j = l.value("j", 0.0);
        cfg.lmg.eps_start = l.value("eps_start", 0.0);
        cfg.lmg.eps_stop = l.value("eps_stop", 0.0);
        cfg.lmg.eps_points = static_cast<int>(l.value("eps_points", 0L));
    }

    if (doc.contains("flags")) {
        const auto& f = doc["flags"];
        cfg.flags.linearized_flux_error = f.value("linearized_flux_error", false);
        cfg.flags.store_eigenvectors = f.value("store_eigenvectors", false);
        cfg.flags.gap_threshold = f.value("gap_threshold", 0.05);
    }
    cfg.output = doc.value("output", std::string());
    cfg.workers = static_cast<int>(doc.value("workers", 0L));
    return cfg;
}

SweepConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("config", "cannot open '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw ConfigError("config", std::string("JSON parse error: ") + e.what());
    }
    return parse_config(doc);
}

json config_to_json(const SweepConfig& cfg) {
    json doc;
    doc["mode"] = to_string(cfg.mode);
    if (!cfg.circuit.loops.empty()) {
        json c;
        c["c_big"] = cfg.circuit.c_big;
        c["c_small"] = cfg.circuit.c_small;
        c["loops"] = json::array();
        for (const auto& l : cfg.circuit.loops) {
            json loop;
            loop["arm1"] = {{"ej1", l.arm1.ej1}, {"ej2", l.arm1.ej2}};
            loop["arm2"] = {{"ej1", l.arm2.ej1}, {"ej2", l.arm2.ej2}};
            loop["flux"] = l.flux;
            loop["offset_charge"] = l.offset_charge;
            c["loops"].push_back(loop);
        }
        doc["circuit"] = c;
    }
    doc["truncation"] = {{"n_max", cfg.truncation.n_max},
                         {"convergence_tol", cfg.truncation.convergence_tol},
                         {"dim_ceiling", cfg.truncation.dim_ceiling}};
    doc["eigenvalues"] = cfg.eigenvalues;
    if (!cfg.axes.empty()) {
        doc["sweep"] = json::array();
        for (const auto& a : cfg.axes) {
            json axis;
            axis["name"] = a.name;
            axis["paths"] = a.paths;
            axis["start"] = a.start;
            axis["stop"] = a.stop;
            axis["points"] = a.points;
            doc["sweep"].push_back(axis);
        }
    }
    if (cfg.mode == SweepMode::fit_tb)
        doc["fit"] = {{"grid_points", cfg.fit.grid_points}, {"bands", cfg.fit.bands}};
    if (cfg.mode == SweepMode::lmg_scan)
        doc["lmg"] = {{"n", cfg.lmg.n},
                      {"j", cfg.lmg.j},
                      {"eps_start", cfg.lmg.eps_start},
                      {"eps_stop", cfg.lmg.eps_stop},
                      {"eps_points", cfg.lmg.eps_points}};
    doc["flags"] = {{"linearized_flux_error", cfg.flags.linearized_flux_error},
                    {"store_eigenvectors", cfg.flags.store_eigenvectors},
                    {"gap_threshold", cfg.flags.gap_threshold}};
    doc["output"] = cfg.output;
    doc["workers"] = cfg.workers;
    return doc;
}

// ---------------------------------------------------------------- output files

namespace {

using Cell = std::variant<double, long, bool, std::string>;

std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::string cell_to_string(const Cell& c) {
    if (std::holds_alternative<double>(c)) return format_double(std::get<double>(c));
    if (std::holds_alternative<long>(c)) return std::to_string(std::get<long>(c));
    if (std::holds_alternative<bool>(c)) return std::get<bool>(c) ? "true" : "false";
    return csv_escape(std::get<std::string>(c));
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<Cell>> rows;
};

void write_csv(const std::string& path, const Table& table) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    for (std::size_t i = 0; i < table.header.size(); ++i)
        f << (i ? "," : "") << csv_escape(table.header[i]);
    f << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            f << (i ? "," : "") << cell_to_string(row[i]);
        f << "\n";
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot write " + path);
    f << text;
}

std::vector<double> linspace(double start, double stop, int points) {
    std::vector<double> v(points);
    for (int i = 0; i < points; ++i)
        v[i] = points == 1 ? start : start + (stop - start) * i / (points - 1);
    return v;
}

std::string gnuplot_header(const std::string& csv) {
    std::string s;
    s += "# gnuplot script, data in " + csv + "\n";
    s += "set datafile separator ','\n";
    s += "set key autotitle columnhead\n";
    return s;
}

} // namespace

RunOutputs run_sweep(const SweepConfig& cfg) {
    if (cfg.output.empty())
        throw ConfigError("output", "output prefix must not be empty");

    RunOutputs out;
    out.csv_path = cfg.output + ".csv";
    out.gnuplot_path = cfg.output + ".gp";
    out.meta_path = cfg.output + ".meta.json";

    Table table;
    std::string gp = gnuplot_header(out.csv_path);
    json results;
    const FluxErrorModel model = cfg.flags.linearized_flux_error ? FluxErrorModel::linearized
                                                                 : FluxErrorModel::exact;

    switch (cfg.mode) {
        case SweepMode::spectrum:
        case SweepMode::sweep_charge:
        case SweepMode::sweep_flux: {
            cfg.circuit.validate();
            const int k = cfg.eigenvalues;
            const int n_axes = static_cast<int>(cfg.axes.size());

            std::vector<std::vector<PathTarget>> targets(n_axes);
            std::vector<std::vector<double>> values(n_axes);
            long total = 1;
            for (int a = 0; a < n_axes; ++a) {
                for (const auto& p : cfg.axes[a].paths)
                    targets[a].push_back(parse_path(p, cfg.circuit.n_loops(), "sweep"));
                values[a] = linspace(cfg.axes[a].start, cfg.axes[a].stop, cfg.axes[a].points);
                total *= cfg.axes[a].points;
            }

            for (int a = 0; a < n_axes; ++a) table.header.push_back(cfg.axes[a].name);
            for (int i = 0; i < k; ++i) table.header.push_back("e" + std::to_string(i));
            table.header.push_back("e01");
            table.header.push_back("converged");
            table.header.push_back("n_max_used");
            if (cfg.flags.store_eigenvectors)
                for (int i = 0; i < k; ++i) table.header.push_back("parity" + std::to_string(i));

            table.rows.assign(total, {});
            std::vector<char> ok(total, 1);
            parallel_for_index(total, cfg.workers, [&](long p) {
                CircuitSpec local = cfg.circuit;
                std::vector<Cell> row;
                long rem = p;
                std::vector<double> axis_val(n_axes);
                for (int a = n_axes - 1; a >= 0; --a) {
                    axis_val[a] = values[a][rem % cfg.axes[a].points];
                    rem /= cfg.axes[a].points;
                }
                for (int a = 0; a < n_axes; ++a) {
                    for (const auto& t : targets[a]) apply_path(local, t, axis_val[a]);
                    row.emplace_back(axis_val[a]);
                }
                try {
                    SpectrumResult res = converged_spectrum(local, cfg.truncation, k, model,
                                                            cfg.flags.store_eigenvectors);
                    for (int i = 0; i < k; ++i) row.emplace_back(res.energies[i]);
                    row.emplace_back(res.e01);
                    row.emplace_back(res.converged);
                    row.emplace_back(static_cast<long>(res.n_max_used));
                    if (!res.converged) ok[p] = 0;
                    if (cfg.flags.store_eigenvectors) {
                        ChargeOperator shell;
                        shell.n_islands = local.n_loops();
                        shell.n_max = res.n_max_used;
                        shell.window.assign(local.n_loops(), 0);
                        shell.dim = res.vectors.rows();
                        for (int i = 0; i < k; ++i)
                            row.emplace_back(parity_expectation(shell, res, i));
                    }
                } catch (const NoConvergence&) {
                    const double nan = std::numeric_limits<double>::quiet_NaN();
                    for (int i = 0; i < k; ++i) row.emplace_back(nan);
                    row.emplace_back(nan);
                    row.emplace_back(false);
                    row.emplace_back(0L);
                    if (cfg.flags.store_eigenvectors)
                        for (int i = 0; i < k; ++i) row.emplace_back(nan);
                    ok[p] = 0;
                }
                table.rows[p] = std::move(row);
            });
            for (char c : ok)
                if (!c) out.all_converged = false;

            const int e01_col = n_axes + k + 1;
            if (n_axes == 1) {
                gp += "set xlabel '" + cfg.axes[0].name + "'\n";
                gp += "set ylabel 'E01 (GHz)'\n";
                gp += "plot '" + out.csv_path + "' using 1:" + std::to_string(e01_col) +
                      " with lines\n";
            } else if (n_axes >= 2) {
                gp += "set xlabel '" + cfg.axes[0].name + "'\n";
                gp += "set ylabel '" + cfg.axes[1].name + "'\n";
                gp += "set dgrid3d " + std::to_string(cfg.axes[0].points) + "," +
                      std::to_string(cfg.axes[1].points) + "\n";
                gp += "splot '" + out.csv_path + "' using 1:2:" + std::to_string(e01_col) +
                      " with lines\n";
            }
            break;
        }

        case SweepMode::fit_tb: {
            cfg.circuit.validate();
            const int n = cfg.circuit.n_loops();
            const BandGrid grid = band_structure(cfg.circuit, cfg.fit.grid_points, cfg.fit.bands,
                                                 cfg.truncation, model, 0.0, 0.5, cfg.workers);
            for (int a = 0; a < n; ++a)
                table.header.push_back("ng_" + std::to_string(a + 1));
            for (int b = 0; b < cfg.fit.bands; ++b)
                table.header.push_back("band" + std::to_string(b));
            table.header.push_back("converged");

            const long points = grid.n_points();
            for (long p = 0; p < points; ++p) {
                std::vector<Cell> row;
                long rem = p;
                std::vector<double> ng(n);
                for (int a = n - 1; a >= 0; --a) {
                    ng[a] = grid.axes[a][rem % grid.axes[a].size()];
                    rem /= grid.axes[a].size();
                }
                for (int a = 0; a < n; ++a) row.emplace_back(ng[a]);
                for (int b = 0; b < cfg.fit.bands; ++b) row.emplace_back(grid.energy(p, b));
                row.emplace_back(static_cast<bool>(grid.point_converged[p]));
                if (!grid.point_converged[p]) out.all_converged = false;
                table.rows.push_back(std::move(row));
            }

            const SpinModelFit fit = n == 1 ? extract_single_loop(grid) : extract_two_loop(grid);
            results["fit"] = {{"t", fit.t},           {"t_in", fit.t_in},
                              {"t_out", fit.t_out},   {"t_plus", fit.t_plus},
                              {"t_minus", fit.t_minus}, {"j", fit.j},
                              {"epsilon", fit.epsilon}, {"residual_rms", fit.residual_rms}};

            if (n == 1) {
                gp += "set xlabel 'ng_1'\nset ylabel 'E (GHz)'\n";
                gp += "plot '" + out.csv_path + "' using 1:2 with lines, '' using 1:3 with lines\n";
            } else {
                gp += "set xlabel 'ng_1'\nset ylabel 'ng_2'\n";
                gp += "set dgrid3d " + std::to_string(cfg.fit.grid_points) + "," +
                      std::to_string(cfg.fit.grid_points) + "\n";
                gp += "splot '" + out.csv_path + "' using 1:2:($4-$3) with lines\n";
            }
            break;
        }

        case SweepMode::lmg_scan: {
            const std::vector<double> grid =
                linspace(cfg.lmg.eps_start, cfg.lmg.eps_stop, cfg.lmg.eps_points);
            const TransitionScan scan = transition_scan(cfg.lmg.n, cfg.lmg.j, grid,
                                                        cfg.flags.gap_threshold, cfg.workers);
            table.header = {"eps", "eps_over_2j", "gap_e10", "gap_over_4j", "sz_mean"};
            for (const auto& r : scan.rows)
                table.rows.push_back(
                    {Cell(r.eps), Cell(r.eps_over_2j), Cell(r.gap_e10), Cell(r.gap_over_4j),
                     Cell(r.sz_mean)});
            results["eps_star"] = scan.eps_star;
            results["gap_threshold"] = cfg.flags.gap_threshold;

            gp += "set xlabel 'eps / 2J'\nset ylabel 'E10 / 4J'\n";
            gp += "plot '" + out.csv_path + "' using 2:4 with lines, '' using 2:5 with lines\n";
            break;
        }

        case SweepMode::capmat: {
            cfg.circuit.validate();
            const int n = cfg.circuit.n_loops();
            const ChargingMatrix cm = charging_matrix(cfg.circuit);
            const Eigen::MatrixXd closed =
                closed_form_inverse(n, cfg.circuit.c_big, cfg.circuit.c_small);
            table.header = {"i", "j", "inv_cap_numeric", "inv_cap_closed_form", "abs_dev",
                            "ec_ghz"};
            double max_dev = 0.0;
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    const double dev = std::abs(cm.inv_cap(i, j) - closed(i, j));
                    max_dev = std::max(max_dev, dev);
                    table.rows.push_back({Cell(static_cast<long>(i)), Cell(static_cast<long>(j)),
                                          Cell(cm.inv_cap(i, j)), Cell(closed(i, j)), Cell(dev),
                                          Cell(cm.ec(i, j))});
                }
            }
            results["max_abs_deviation"] = max_dev;
            gp += "# capacitance table, nothing to plot\n";
            break;
        }
    }

    write_csv(out.csv_path, table);
    write_text(out.gnuplot_path, gp);

    json meta;
    meta["version"] = kVersion;
    meta["config"] = config_to_json(cfg);
    meta["outputs"] = {{"csv", out.csv_path}, {"gnuplot", out.gnuplot_path}};
    meta["all_converged"] = out.all_converged;
    if (!results.is_null()) meta["results"] = results;
    write_text(out.meta_path, meta.dump(2) + "\n");
    return out;
}

} // namespace cpq
