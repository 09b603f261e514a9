#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emckt/circuit.hpp"
#include "emckt/gmres.hpp"
#include "emckt/mesh.hpp"

namespace emckt {

/// Flat `key = value` configuration with dotted section names and `#`
/// comments. Every knob is explicit; unknown keys are rejected so typos
/// cannot silently fall back to defaults.
class KeyValueFile {
public:
    static KeyValueFile parse(const std::string& text);
    static KeyValueFile load(const std::string& path);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_number(const std::string& key) const;
    double get_number(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_numbers(const std::string& key) const;  ///< whitespace-separated

    /// Keys beginning with `prefix.`.
    std::vector<std::string> keys_with_prefix(const std::string& prefix) const;
    const std::map<std::string, std::string>& entries() const { return entries_; }

    /// Keys never read by the consumer; call after building a RunConfig.
    std::vector<std::string> unused_keys() const;

private:
    std::map<std::string, std::string> entries_;
    mutable std::map<std::string, bool> touched_;
};

struct PortConfig {
    std::string label;
    Vec3 a, b;  ///< segment endpoints (meters)
};

struct PmlConfig {
    bool enabled = false;
    int thickness_cells = 8;
    int order = 3;
    double r0 = 1e-4;
    std::array<bool, 6> faces{};  ///< -x,+x,-y,+y,-z,+z
};

/// Fully explicit run description; all modes share it.
struct RunConfig {
    std::string mode;  ///< extract | replay | coupled | compare | bench

    // mesh
    std::string mesh_kind = "box";  ///< box | file
    int nx = 1, ny = 1, nz = 1;
    Vec3 dims{1.0, 1.0, 1.0};
    std::string mesh_file;
    double eps_r = 1.0, mu_r = 1.0;
    bool pec_boundary = true;

    PmlConfig pml;
    std::vector<PortConfig> ports;

    // time
    double dt = 0.0;        ///< seconds; 0 means `auto`
    double f_max = 0.0;     ///< required when dt is auto: dt = 1/(30 f_max)
    int n_steps = 0;
    int t_delta = 2;

    std::string netlist_path;
    std::string archive_path;
    std::string out_dir = ".";

    GmresConfig gmres;
    NewtonConfig newton;
    double gummel_tol = 1e-8;
    double compare_tol = 1e-9;
    int extract_workers = 1;
    int bench_steps = 0;    ///< 0: reuse n_steps

    double resolved_dt() const;  ///< applies the auto rule
};

RunConfig parse_run_config(const KeyValueFile& kv);
RunConfig load_run_config(const std::string& path);

}  // namespace emckt
