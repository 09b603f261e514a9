#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emckt/coupling.hpp"
#include "emckt/emfem.hpp"

namespace emckt {

/// Extracted transient port parameters: per-port voltage readback responses
/// to a unit temporal-basis (hat) current at each port, coupling
/// coefficients folded in at extraction so replay needs no mesh access.
class ImpulseArchive {
public:
    ImpulseArchive() = default;
    ImpulseArchive(int n_ports, int n_lags, double dt, int t_delta,
                   std::vector<std::string> labels);

    int n_ports() const { return n_ports_; }
    int n_lags() const { return n_lags_; }  ///< N_t
    double dt() const { return dt_; }
    int t_delta() const { return t_delta_; }
    const std::vector<std::string>& labels() const { return labels_; }
    const std::string& temporal_basis() const { return basis_; }

    double at(int k, int q, int lag) const;
    double& at(int k, int q, int lag);
    const std::vector<double>& raw() const { return g_; }

    void write_file(const std::string& path) const;
    static ImpulseArchive read_file(const std::string& path);

private:
    int n_ports_ = 0;
    int n_lags_ = 0;
    double dt_ = 0.0;
    int t_delta_ = 0;
    std::string basis_ = "hat";
    std::vector<std::string> labels_;
    std::vector<double> g_;  ///< [k][q][lag], port-major, lag-minor
};

struct ExtractOptions {
    int t_delta = 2;  ///< excitation step; >= circuit history order
    int workers = 1;  ///< ports marched concurrently (independent instances)
    GmresConfig gmres;
};

/// Marches one EM run per port with a unit hat current on that port's edges
/// and records the voltage readback at every port for every lag.
/// Per-run GMRES iteration totals are reported through stats_out when given.
ImpulseArchive extract(const MixedSystem& sys, const TimeBasis& basis, const CouplingMap& map,
                       int n_lags, const ExtractOptions& opts = {},
                       const PmlOperators* pml = nullptr, std::vector<long>* gmres_per_port = nullptr);

/// Causal convolution readback: V_k(t_i) = sum_q sum_{j<=i} G[k][q][i-j] I_q[j].
/// currents: [port][step 0..i]. Throws HorizonError when i >= N_t.
std::vector<double> reconstruct_port_voltage(const ImpulseArchive& archive,
                                             const std::vector<std::vector<double>>& currents,
                                             int step);

struct ReplayOptions {
    NewtonConfig newton;
};

/// Standalone device-system solve against the archive: the EM side enters
/// the circuit Jacobian only through the lag-0 block and the right-hand side
/// through the convolution history. The archive is never modified.
TransientRecord replay_transient_solve(const ImpulseArchive& archive, MnaSystem& mna, int n_steps,
                                       const ReplayOptions& opts = {});

}  // namespace emckt
