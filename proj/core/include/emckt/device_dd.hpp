#pragma once

#include <string>
#include <vector>

#include "emckt/circuit.hpp"

namespace emckt {

/// 1D Schottky-diode device description. Key=value file format:
///   length, nodes, area, epsilon_r, n_i, mu_n0, mu_p0, vsat_n, vsat_p,
///   tau_n, tau_p, vt, barrier_height,
///   doping.<k>.from / .to / .value   (signed donors - acceptors, m^-3)
/// Contacts: Schottky (fixed-barrier Dirichlet) at x = 0, ohmic at x = L.
struct DDDeviceSpec {
    double length = 1e-6;        ///< m
    int nodes = 101;
    double area = 1e-12;         ///< m^2
    double epsilon_r = 11.7;
    double n_i = 1.5e16;         ///< m^-3
    double mu_n0 = 0.14;         ///< m^2/Vs
    double mu_p0 = 0.045;
    double vsat_n = 1.0e5;       ///< m/s
    double vsat_p = 1.0e5;
    double tau_n = 1e-7;         ///< s (SRH)
    double tau_p = 1e-7;
    double v_t = 0.0256;         ///< V
    double barrier_height = 0.25;  ///< V
    struct DopingSegment {
        double from = 0.0, to = 0.0, value = 0.0;
    };
    std::vector<DopingSegment> doping;
};

DDDeviceSpec parse_device_spec(const std::string& text);
DDDeviceSpec load_device_spec(const std::string& path);

struct DDState {
    std::vector<double> n, p, phi;  ///< nodal densities (m^-3) and potential (V)
    double terminal_current = 0.0;  ///< A, positive flowing in at the Schottky contact
    double time = 0.0;
};

struct GummelConfig {
    double tol = 1e-8;
    int max_iterations = 400;
};

/// Uniform-grid 1D drift-diffusion device with Scharfetter-Gummel fluxes.
class DDDevice {
public:
    explicit DDDevice(const DDDeviceSpec& spec);

    const DDDeviceSpec& spec() const { return spec_; }
    int n_nodes() const { return spec_.nodes; }
    double h() const { return h_; }
    double doping(int i) const { return doping_[static_cast<std::size_t>(i)]; }
    double eps() const { return eps_; }

    /// Zero-bias self-consistent solution (flat Fermi level reference).
    DDState solve_equilibrium(const GummelConfig& cfg = {}) const;

    /// One backward-Euler step under a lumped port field (V/m along the
    /// device). The applied terminal voltage is e_port * length; the same
    /// field sets the mobility saturation argument.
    DDState transient_step(const DDState& state, double dt, double e_port,
                           const GummelConfig& cfg = {}) const;

    /// Electron/hole mobilities at a lumped field magnitude.
    double mu_n(double e_mag) const;
    double mu_p(double e_mag) const;

    /// Conduction + displacement current (A) through the slab between nodes
    /// i and i+1, given the previous potential for the displacement term.
    double slab_current(const DDState& state, const std::vector<double>& phi_prev, double dt,
                        double e_port, int i) const;

    /// Space charge integral q * sum (p - n + N) dx * area (C).
    double total_charge(const DDState& state) const;

private:
    friend class DDPortAdapter;
    void continuity_step(std::vector<double>& density, bool electrons, const DDState& old,
                         const std::vector<double>& phi, double dt, double mu,
                         const std::vector<double>& other) const;

    DDDeviceSpec spec_;
    double h_;
    double eps_;
    std::vector<double> doping_;
    double phi_schottky_eq_ = 0.0;  ///< equilibrium contact potentials
    double phi_ohmic_eq_ = 0.0;
    double n0_schottky_ = 0.0, p0_schottky_ = 0.0;
    double n0_ohmic_ = 0.0, p0_ohmic_ = 0.0;
};

/// Bernoulli function x/(e^x - 1), series-stabilized near 0.
double bernoulli(double x);

/// Uniform device-operator contract consumed by the circuit solvers: trial
/// current and conductance at a port voltage, commit on Newton acceptance.
class DDPortAdapter : public DeviceAdapter {
public:
    DDPortAdapter(const DDDevice& device, GummelConfig cfg = {});

    void set_timestep(double dt) override;
    std::pair<double, double> eval(double v) override;
    void commit(double v) override;

    const DDState& state() const { return state_; }
    void reset();

private:
    const DDDevice* device_;
    GummelConfig cfg_;
    double dt_ = 0.0;
    DDState state_;        ///< committed state
    bool cache_valid_ = false;
    double cached_v_ = 0.0;
    double cached_g_ = 0.0;
    DDState cached_step_;
};

}  // namespace emckt
