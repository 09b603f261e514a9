#include "emckt/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "emckt/errors.hpp"

namespace emckt {

namespace {
std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}
}  // namespace

KeyValueFile KeyValueFile::parse(const std::string& text) {
    KeyValueFile kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("config: expected key = value", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ParseError("config: empty key", line_no);
        if (kv.entries_.count(key)) throw ParseError("config: duplicate key `" + key + "`", line_no);
        kv.entries_[key] = value;
    }
    return kv;
}

KeyValueFile KeyValueFile::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

bool KeyValueFile::has(const std::string& key) const { return entries_.count(key) != 0; }

std::string KeyValueFile::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("config: missing required key `" + key + "`");
    touched_[key] = true;
    return it->second;
}

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    touched_[key] = true;
    return it->second;
}

double KeyValueFile::get_number(const std::string& key) const {
    try {
        return parse_si_value(get_string(key));
    } catch (const ParseError& e) {
        throw ConfigError("config: key `" + key + "`: " + e.what());
    }
}

double KeyValueFile::get_number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return get_number(key);
}

int KeyValueFile::get_int(const std::string& key, int fallback) const {
    if (!has(key)) return fallback;
    const double v = get_number(key);
    return static_cast<int>(v);
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    std::string v = get_string(key);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config: key `" + key + "` is not a boolean");
}

std::vector<double> KeyValueFile::get_numbers(const std::string& key) const {
    std::istringstream in(get_string(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(parse_si_value(tok));
    return out;
}

std::vector<std::string> KeyValueFile::keys_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
        if (k.rfind(prefix, 0) == 0) out.push_back(k);
    return out;
}

std::vector<std::string> KeyValueFile::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries_)
        if (!touched_.count(k)) out.push_back(k);
    return out;
}

double RunConfig::resolved_dt() const {
    if (dt > 0.0) return dt;
    if (!(f_max > 0.0)) throw ConfigError("config: time.dt = auto requires time.f_max");
    return 1.0 / (30.0 * f_max);
}

RunConfig parse_run_config(const KeyValueFile& kv) {
    RunConfig rc;
    rc.mode = kv.get_string("mode", "");

    rc.mesh_kind = kv.get_string("mesh.kind", "box");
    if (rc.mesh_kind == "box") {
        rc.nx = kv.get_int("mesh.nx", 1);
        rc.ny = kv.get_int("mesh.ny", 1);
        rc.nz = kv.get_int("mesh.nz", 1);
        const auto dims = kv.get_numbers("mesh.dims");
        if (dims.size() != 3) throw ConfigError("config: mesh.dims needs three lengths");
        rc.dims = {dims[0], dims[1], dims[2]};
    } else if (rc.mesh_kind == "file") {
        rc.mesh_file = kv.get_string("mesh.file");
    } else {
        throw ConfigError("config: mesh.kind must be box or file");
    }
    rc.eps_r = kv.get_number("material.eps_r", 1.0);
    rc.mu_r = kv.get_number("material.mu_r", 1.0);
    rc.pec_boundary = kv.get_bool("pec.boundary", true);

    rc.pml.enabled = kv.get_bool("pml.enable", false);
    if (rc.pml.enabled) {
        rc.pml.thickness_cells = kv.get_int("pml.thickness_cells", 8);
        rc.pml.order = kv.get_int("pml.order", 3);
        rc.pml.r0 = kv.get_number("pml.r0", 1e-4);
        std::istringstream faces(kv.get_string("pml.faces", "+x -x +y -y +z -z"));
        std::string tok;
        while (faces >> tok) {
            static const std::map<std::string, int> lut = {{"-x", 0}, {"+x", 1}, {"-y", 2},
                                                           {"+y", 3}, {"-z", 4}, {"+z", 5}};
            auto it = lut.find(tok);
            if (it == lut.end()) throw ConfigError("config: bad pml.faces token `" + tok + "`");
            rc.pml.faces[static_cast<std::size_t>(it->second)] = true;
        }
    }

    for (int i = 0;; ++i) {
        const std::string base = "port." + std::to_string(i) + ".";
        if (!kv.has(base + "a")) break;
        PortConfig pc;
        pc.label = kv.get_string(base + "label", "p" + std::to_string(i));
        const auto a = kv.get_numbers(base + "a");
        const auto b = kv.get_numbers(base + "b");
        if (a.size() != 3 || b.size() != 3)
            throw ConfigError("config: port endpoints need three coordinates");
        pc.a = {a[0], a[1], a[2]};
        pc.b = {b[0], b[1], b[2]};
        rc.ports.push_back(std::move(pc));
    }

    const std::string dt_str = kv.get_string("time.dt", "auto");
    if (dt_str != "auto") rc.dt = parse_si_value(dt_str);
    rc.f_max = kv.get_number("time.f_max", 0.0);
    rc.n_steps = kv.get_int("time.n_steps", 0);
    if (rc.n_steps < 2) throw ConfigError("config: time.n_steps must be >= 2");
    rc.t_delta = kv.get_int("time.t_delta", 2);

    rc.netlist_path = kv.get_string("netlist", "");
    rc.archive_path = kv.get_string("archive", "");
    rc.out_dir = kv.get_string("out", ".");

    rc.gmres.tol = kv.get_number("solver.tol", 1e-12);
    rc.gmres.restart = kv.get_int("solver.restart", 60);
    rc.gmres.max_iterations = kv.get_int("solver.max_iter", 20000);
    rc.gmres.jacobi = kv.get_bool("solver.jacobi", true);
    rc.newton.tol = kv.get_number("newton.tol", 1e-12);
    rc.newton.max_iterations = kv.get_int("newton.max_iter", 60);
    rc.gummel_tol = kv.get_number("gummel.tol", 1e-8);
    rc.compare_tol = kv.get_number("compare.tol", 1e-9);
    rc.extract_workers = kv.get_int("extract.workers", 1);
    rc.bench_steps = kv.get_int("bench.steps", 0);

    const auto unused = kv.unused_keys();
    if (!unused.empty()) throw ConfigError("config: unknown key `" + unused.front() + "`");
    return rc;
}

RunConfig load_run_config(const std::string& path) {
    return parse_run_config(KeyValueFile::load(path));
}

}  // namespace emckt
