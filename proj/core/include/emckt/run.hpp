#pragma once

#include <iosfwd>
#include <memory>
#include <string>

#include "emckt/config.hpp"
#include "emckt/coupling.hpp"
#include "emckt/device_dd.hpp"
#include "emckt/portx.hpp"

namespace emckt {

/// Everything derived from a RunConfig's EM side, built once per run.
struct Scene {
    std::unique_ptr<TetMesh> mesh;
    MixedSystem sys;
    std::vector<PortSpec> port_specs;
    CouplingMap coupling;
    PmlOperators pml;
    bool has_pml = false;
    TimeBasis basis;
};

Scene build_scene(const RunConfig& rc);

/// Netlist plus any drift-diffusion devices it references, ready to march.
struct CircuitBundle {
    Netlist netlist;
    std::vector<std::unique_ptr<DDDevice>> devices;
    std::vector<std::unique_ptr<DDPortAdapter>> adapters;
    std::vector<std::string> device_elements;  ///< element name per adapter

    std::unique_ptr<MnaSystem> make_mna(double dt, const NewtonConfig& cfg,
                                        const std::vector<std::string>& port_labels) const;
    void reset_devices();
};

CircuitBundle load_circuit(const std::string& netlist_path, double gummel_tol);

struct CostReport {
    long n_em = 0, n_ckt = 0, n_p = 0, n_t = 0;
    double avg_newton_coupled = 0.0;
    double avg_gmres_coupled = 0.0;
    double avg_gmres_extract = 0.0;
    double per_step_coupled_s = 0.0;
    double per_step_extract_s = 0.0;
    double per_step_replay_s = 0.0;
};

/// Exit codes shared by the library-level runner and the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitSolverFailure = 3;
inline constexpr int kExitCompareFailure = 4;

/// Runs one mode (extract | replay | coupled | compare | bench). Artifacts
/// land under rc.out_dir. Returns an exit code; configuration and solver
/// errors are reported by exception (the CLI maps them to codes 2/3).
int run_mode(const RunConfig& rc, std::ostream& log);

void write_waveform_csv(const std::string& path, const TransientRecord& rec);
void write_cost_report_csv(const std::string& path, const CostReport& report);

/// Relative L2 recomputed from two waveform CSV files (self-consistency
/// check for compare mode).
double waveform_csv_relative_l2(const std::string& path_a, const std::string& path_b);

}  // namespace emckt
