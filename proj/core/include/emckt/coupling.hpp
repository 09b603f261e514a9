#pragma once

#include <span>
#include <string>
#include <vector>

#include "emckt/circuit.hpp"
#include "emckt/emfem.hpp"
#include "emckt/mesh.hpp"

namespace emckt {

/// Per-port edge/coefficient pairs relating lumped branch quantities to edge
/// coefficients. Identical coefficients serve current impression and voltage
/// readback (Whitney duality makes each coefficient the oriented edge sign).
struct CouplingMap {
    struct PortEntry {
        int port_id = -1;
        std::string label;
        std::vector<std::pair<int, double>> edge_coeffs;
    };
    std::vector<PortEntry> ports;

    int n_ports() const { return static_cast<int>(ports.size()); }
    std::vector<std::string> labels() const;
};

/// Builds the map by evaluating the Whitney line integrals along each port
/// edge. Ports must be disjoint and must not touch PEC-masked edges.
CouplingMap build_coupling(const TetMesh& mesh, const MixedSystem& sys,
                           const std::vector<PortSpec>& ports);

/// Edge-space load with entries C_kq * I_q on port edges, zero elsewhere.
std::vector<double> impress_current(const CouplingMap& map, std::span<const double> port_currents,
                                    int n_edges);

/// V_q = sum_k C_qk e_k per port.
std::vector<double> read_port_voltage(const CouplingMap& map, const FieldState& state);

/// Per-step port waveform log shared by the coupled and replay solvers.
struct TransientRecord {
    double dt = 0.0;
    /// [port][step]; step 0 is t = 0 (all zeros by the quiet-start contract)
    std::vector<std::vector<double>> voltage;  ///< port readback (V)
    std::vector<std::vector<double>> current;  ///< port branch current (A)
    std::vector<int> newton_iterations;        ///< per step
    std::vector<long> gmres_iterations;        ///< per step (linear work)
    std::vector<double> step_seconds;          ///< wall clock per step (not part of any determinism contract)
    std::vector<std::vector<double>> probe;    ///< [step][probe edge] field samples, when requested
    std::vector<std::string> port_labels;

    int n_steps() const { return voltage.empty() ? 0 : static_cast<int>(voltage[0].size()); }
};

/// Relative L2 distance over all port voltage waveforms: ||a-b|| / ||b||.
double relative_l2(const TransientRecord& a, const TransientRecord& b);

struct CoupledOptions {
    GmresConfig gmres;      ///< joint linear solves
    NewtonConfig newton;
    bool equilibrate = true;  ///< row-scale the joint system before GMRES
    std::vector<int> probe_edges;  ///< edge coefficients sampled every step
};

/// Self-consistent marching of the EM system and the circuit: each Newton
/// iteration solves the full block system over (e, V^CKT) with GMRES. The
/// EM block is linear, so linear circuits converge in one iteration.
TransientRecord coupled_transient_solve(Stepper& stepper, MnaSystem& mna, const CouplingMap& map,
                                        int n_steps, const CoupledOptions& opts = {});

}  // namespace emckt
