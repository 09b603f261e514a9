#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emckt/dense.hpp"

namespace emckt {

/// Source time functions. Modulated gaussian uses sigma = 3/(2 pi f_bw) and a
/// default delay of 6 sigma so the signal is negligible at t <= 0.
struct Waveform {
    enum class Kind { Dc, Sine, ModulatedGaussian };
    Kind kind = Kind::Dc;
    double amplitude = 0.0;
    double f0 = 0.0;       ///< carrier / sine frequency (Hz)
    double f_bw = 0.0;     ///< gaussian bandwidth (Hz)
    double phase = 0.0;    ///< sine phase (rad)
    double delay = 0.0;    ///< gaussian center (s)

    static Waveform dc(double v);
    static Waveform sine(double f, double amp, double phase = 0.0);
    static Waveform modulated_gaussian(double f0, double f_bw, double amp, double delay = -1.0);

    double operator()(double t) const;
    double sigma() const;   ///< gaussian width, 0 for other kinds
    double f_max() const;   ///< f0 + f_bw
};

struct DiodeParams {
    double i_s = 0.0;      ///< saturation current (A)
    double eta = 1.0;      ///< emission coefficient
    double v_t = 0.0;      ///< thermal voltage (V)
};

/// Shockley current and its exact derivative. The exponent is clamped at 40
/// with linear extrapolation beyondit so Newton iterates cannot overflow.
std::pair<double, double> diode_current(double v, const DiodeParams& p);

struct Element {
    enum class Kind { Resistor, Capacitor, Inductor, VSource, ISource, Diode, EmPort, DDDevice };
    Kind kind;
    std::string name;
    int node_a = -1;            ///< netlist node numbers (0 = ground)
    int node_b = -1;
    double value = 0.0;         ///< R (ohm), C (F), L (H)
    Waveform waveform;          ///< V/I sources
    DiodeParams diode;
    std::string port_ref;       ///< EmPort: port label or numeric id
    std::string device_file;    ///< DDDevice: device description path
};

struct Netlist {
    std::vector<Element> elements;
    std::vector<int> nodes;     ///< non-ground node numbers, ascending

    int node_index(int node_number) const;  ///< -1 for ground
    int n_nodes() const { return static_cast<int>(nodes.size()); }
};

/// Grammar (one element per line, `#` comments):
///   R|L|C <name> <n+> <n-> <value>
///   V|I   <name> <n+> <n-> dc <v> | sine <f> <amp> [<phase>]
///                          | gauss <f0> <fbw> <amp> [<delay>]
///   D     <name> <n+> <n-> is=<A> n=<val> vt=<V>
///   P     <name> <n+> <n-> port=<q>
///   DD    <name> <n+> <n-> file=<path>
/// Values accept SI suffixes p, n, u, m, k, meg.
Netlist parse_netlist(const std::string& text);

double parse_si_value(const std::string& token);  ///< throws ParseError

struct NewtonConfig {
    double tol = 1e-12;       ///< relative residual target
    int max_iterations = 60;
    int max_halvings = 4;
};

/// Row/col sink so the same stamps serve the dense standalone Jacobian and
/// an embedding block inside a larger sparse system.
struct MatrixAdder {
    virtual void add(int row, int col, double value) = 0;
    virtual ~MatrixAdder() = default;
};

/// Nonlinear element with one-step internal state, evaluated at a trial
/// branch voltage. eval() must not commit state; commit() advances it.
class DeviceAdapter {
public:
    virtual ~DeviceAdapter() = default;
    virtual void set_timestep(double dt) = 0;
    /// (terminal current A, d current / d voltage S) at trial voltage v.
    virtual std::pair<double, double> eval(double v) = 0;
    virtual void commit(double v) = 0;
};

/// Transient MNA engine. Unknowns: node voltages then branch currents
/// (voltage sources, inductors, EM ports). History differentiation is
/// second-order backward Lagrange, first-order on the startup step.
class MnaSystem {
public:
    MnaSystem(const Netlist& netlist, double dt, NewtonConfig cfg = {},
              const std::vector<std::string>* port_labels = nullptr);

    int n_unknowns() const { return n_unknowns_; }
    int n_nodes() const { return static_cast<int>(netlist_.nodes.size()); }
    int n_branches() const { return n_branches_; }
    int n_ports() const { return static_cast<int>(port_elements_.size()); }
    double dt() const { return dt_; }

    /// Unknown-vector index of a port's branch current.
    int port_branch_unknown(int port_id) const;
    /// Netlist element index of a port.
    int port_element(int port_id) const;
    /// Global (EM-side) port id referenced by local port slot k.
    int port_global_id(int k) const;

    void attach_device(const std::string& element_name, DeviceAdapter* adapter);

    /// Per-step injected port relation: branch equation of port k reads
    /// (v+ - v-) + sum_q response0[k][q] I_q + history[k] = 0.
    void set_port_term(std::vector<double> response0, std::vector<double> history);

    /// Shift history and freeze companion sources for the step ending at t.
    void begin_step(double t);

    /// Residual and Jacobian at iterate x for the pending step.
    /// with_port_terms: include the injected dense port relation (standalone
    /// and replay); the coupled solver adds its own coupling instead.
    void assemble(const std::vector<double>& x, MatrixAdder* jacobian,
                  std::vector<double>& residual, bool with_port_terms);

    /// Commit the pending step: push history, advance devices.
    void commit_step(const std::vector<double>& x);

    /// Standalone Newton solve of the pending step (begin_step + iterate +
    /// commit). Returns Newton iteration count.
    int solve_step(double t);

    const std::vector<double>& solution() const { return x_; }
    double node_voltage(int node_number) const;
    double branch_current(const std::string& element_name) const;

    /// Largest |element current| at the last committed step and the largest
    /// KCL imbalance over nodes, for conservation checks.
    std::pair<double, double> kcl_report() const;

    /// Scale used for the relative Newton residual test (see assemble()).
    double residual_scale() const { return residual_scale_; }

    int last_newton_iterations() const { return last_newton_iterations_; }
    long total_newton_iterations() const { return total_newton_iterations_; }

private:
    struct BranchInfo {
        int element = -1;
        int unknown = -1;
    };

    double history_voltage_term(int elem_idx) const;
    double deriv_coeff0() const;

    Netlist netlist_;
    double dt_;
    NewtonConfig cfg_;
    int n_unknowns_ = 0;
    int n_branches_ = 0;
    std::vector<int> branch_of_element_;   ///< -1 if element has no branch unknown
    std::vector<int> port_elements_;       ///< element index per local port slot
    std::vector<int> port_global_ids_;     ///< EM-side port id per local slot
    std::vector<DeviceAdapter*> devices_;  ///< per element, null if none

    std::vector<double> x_;        ///< committed solution at the last step
    std::vector<std::vector<double>> history_;  ///< x at t_i, t_{i-1}, t_{i-2}
    int committed_steps_ = 0;
    double t_now_ = 0.0;
    bool step_pending_ = false;

    std::vector<double> port_response0_;   ///< N_p x N_p row-major
    std::vector<double> port_history_;

    double residual_scale_ = 1.0;
    int last_newton_iterations_ = 0;
    long total_newton_iterations_ = 0;
};

}  // namespace emckt
