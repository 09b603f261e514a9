#include "emckt/device_dd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "emckt/errors.hpp"

namespace emckt {

namespace {
constexpr double kQ = 1.602176634e-19;      // C
constexpr double kEps0 = 8.8541878128e-12;  // F/m

// Thomas algorithm; diag/lower/upper are consumed.
std::vector<double> tridiag_solve(std::vector<double> lower, std::vector<double> diag,
                                  std::vector<double> upper, std::vector<double> rhs) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> x(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

}  // namespace

double bernoulli(double x) {
    if (std::abs(x) < 1e-4) {
        // x/(e^x-1) = 1 - x/2 + x^2/12 - x^4/720 + ...
        return 1.0 - x / 2.0 + x * x / 12.0 - x * x * x * x / 720.0;
    }
    if (x > 700.0) return 0.0;
    if (x < -700.0) return -x;
    return x / std::expm1(x);
}

DDDeviceSpec parse_device_spec(const std::string& text) {
    DDDeviceSpec spec;
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::istringstream probe(line);
            std::string tok;
            if (probe >> tok) throw ParseError("device: expected key = value", line_no);
            continue;
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    auto get = [&](const char* key, double& out) {
        auto it = kv.find(key);
        if (it != kv.end()) out = parse_si_value(it->second);
    };
    get("length", spec.length);
    get("area", spec.area);
    get("epsilon_r", spec.epsilon_r);
    get("n_i", spec.n_i);
    get("mu_n0", spec.mu_n0);
    get("mu_p0", spec.mu_p0);
    get("vsat_n", spec.vsat_n);
    get("vsat_p", spec.vsat_p);
    get("tau_n", spec.tau_n);
    get("tau_p", spec.tau_p);
    get("vt", spec.v_t);
    get("barrier_height", spec.barrier_height);
    if (kv.count("nodes")) spec.nodes = static_cast<int>(parse_si_value(kv["nodes"]));
    for (int k = 0;; ++k) {
        const std::string base = "doping." + std::to_string(k) + ".";
        if (!kv.count(base + "value")) break;
        DDDeviceSpec::DopingSegment seg;
        seg.from = kv.count(base + "from") ? parse_si_value(kv[base + "from"]) : 0.0;
        seg.to = kv.count(base + "to") ? parse_si_value(kv[base + "to"]) : spec.length;
        seg.value = parse_si_value(kv[base + "value"]);
        spec.doping.push_back(seg);
    }
    return spec;
}

DDDeviceSpec load_device_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("device: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_device_spec(ss.str());
}

DDDevice::DDDevice(const DDDeviceSpec& spec) : spec_(spec) {
    if (spec.nodes < 5) throw InvalidArgument("device: need at least 5 grid nodes");
    if (!(spec.length > 0.0 && spec.area > 0.0 && spec.n_i > 0.0 && spec.v_t > 0.0))
        throw InvalidArgument("device: length, area, n_i, vt must be positive");
    h_ = spec.length / (spec.nodes - 1);
    eps_ = spec.epsilon_r * kEps0;
    doping_.assign(static_cast<std::size_t>(spec.nodes), 0.0);
    for (int i = 0; i < spec.nodes; ++i) {
        const double x = i * h_;
        for (const auto& seg : spec.doping)
            if (x >= seg.from - 0.5 * h_ && x <= seg.to + 0.5 * h_)
                doping_[static_cast<std::size_t>(i)] = seg.value;
    }
    const double vt = spec.v_t;
    auto neutral_phi = [&](double dop) { return vt * std::asinh(dop / (2.0 * spec.n_i)); };
    phi_ohmic_eq_ = neutral_phi(doping_.back());
    phi_schottky_eq_ = neutral_phi(doping_.front()) - spec.barrier_height;
    n0_schottky_ = spec.n_i * std::exp(phi_schottky_eq_ / vt);
    p0_schottky_ = spec.n_i * std::exp(-phi_schottky_eq_ / vt);
    n0_ohmic_ = spec.n_i * std::exp(phi_ohmic_eq_ / vt);
    p0_ohmic_ = spec.n_i * std::exp(-phi_ohmic_eq_ / vt);
}

double DDDevice::mu_n(double e_mag) const {
    return spec_.mu_n0 / (1.0 + spec_.mu_n0 * std::abs(e_mag) / spec_.vsat_n);
}

double DDDevice::mu_p(double e_mag) const {
    return spec_.mu_p0 / (1.0 + spec_.mu_p0 * std::abs(e_mag) / spec_.vsat_p);
}

DDState DDDevice::solve_equilibrium(const GummelConfig& cfg) const {
    const int n = spec_.nodes;
    const double vt = spec_.v_t;
    DDState st;
    st.phi.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        st.phi[static_cast<std::size_t>(i)] =
            vt * std::asinh(doping_[static_cast<std::size_t>(i)] / (2.0 * spec_.n_i));
    st.phi.front() = phi_schottky_eq_;
    st.phi.back() = phi_ohmic_eq_;

    // nonlinear Poisson with Boltzmann carriers n = n_i e^{phi/vt}, p = n_i e^{-phi/vt}
    const double a = eps_ / (h_ * h_);
    double residual = 0.0;
    for (int iter = 0; iter < cfg.max_iterations; ++iter) {
        std::vector<double> lower(static_cast<std::size_t>(n), 0.0), diag(static_cast<std::size_t>(n), 1.0),
            upper(static_cast<std::size_t>(n), 0.0), rhs(static_cast<std::size_t>(n), 0.0);
        for (int i = 1; i + 1 < n; ++i) {
            const double phi = st.phi[static_cast<std::size_t>(i)];
            const double nn = spec_.n_i * std::exp(phi / vt);
            const double pp = spec_.n_i * std::exp(-phi / vt);
            const double res = a * (st.phi[static_cast<std::size_t>(i) - 1] - 2.0 * phi +
                                    st.phi[static_cast<std::size_t>(i) + 1]) +
                               kQ * (pp - nn + doping_[static_cast<std::size_t>(i)]);
            lower[static_cast<std::size_t>(i)] = a;
            upper[static_cast<std::size_t>(i)] = a;
            diag[static_cast<std::size_t>(i)] = -2.0 * a - kQ * (nn + pp) / vt;
            rhs[static_cast<std::size_t>(i)] = -res;
        }
        auto delta = tridiag_solve(std::move(lower), std::move(diag), std::move(upper), std::move(rhs));
        double dmax = 0.0;
        for (int i = 1; i + 1 < n; ++i) {
            double d = delta[static_cast<std::size_t>(i)];
            d = std::clamp(d, -5.0 * vt, 5.0 * vt);
            st.phi[static_cast<std::size_t>(i)] += d;
            dmax = std::max(dmax, std::abs(d));
        }
        residual = dmax;
        if (dmax < 1e-13) break;
        if (iter + 1 == cfg.max_iterations)
            throw SolverFailure("device: equilibrium Poisson did not converge", residual);
    }
    st.n.resize(static_cast<std::size_t>(n));
    st.p.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        st.n[static_cast<std::size_t>(i)] = spec_.n_i * std::exp(st.phi[static_cast<std::size_t>(i)] / vt);
        st.p[static_cast<std::size_t>(i)] = spec_.n_i * std::exp(-st.phi[static_cast<std::size_t>(i)] / vt);
    }
    st.terminal_current = 0.0;
    st.time = 0.0;
    return st;
}

void DDDevice::continuity_step(std::vector<double>& density, bool electrons, const DDState& old,
                               const std::vector<double>& phi, double dt, double mu,
                               const std::vector<double>& other) const {
    const int n = spec_.nodes;
    const double vt = spec_.v_t;
    const double diff = mu * vt;  // Einstein relation
    const double f = diff / (h_ * h_);
    const double ni = spec_.n_i;

    std::vector<double> lower(static_cast<std::size_t>(n), 0.0), diag(static_cast<std::size_t>(n), 1.0),
        upper(static_cast<std::size_t>(n), 0.0), rhs(static_cast<std::size_t>(n), 0.0);
    // Dirichlet contacts
    diag[0] = 1.0;
    rhs[0] = electrons ? n0_schottky_ : p0_schottky_;
    diag[static_cast<std::size_t>(n - 1)] = 1.0;
    rhs[static_cast<std::size_t>(n - 1)] = electrons ? n0_ohmic_ : p0_ohmic_;

    for (int i = 1; i + 1 < n; ++i) {
        const double dp = (phi[static_cast<std::size_t>(i) + 1] - phi[static_cast<std::size_t>(i)]) / vt;
        const double dm = (phi[static_cast<std::size_t>(i)] - phi[static_cast<std::size_t>(i) - 1]) / vt;
        const double n_old = old.n[static_cast<std::size_t>(i)];
        const double p_old = old.p[static_cast<std::size_t>(i)];
        const double srh_den = spec_.tau_p * (n_old + ni) + spec_.tau_n * (p_old + ni);
        const double oth = other[static_cast<std::size_t>(i)];
        if (electrons) {
            diag[static_cast<std::size_t>(i)] = 1.0 / dt + f * (bernoulli(-dp) + bernoulli(dm)) + oth / srh_den;
            upper[static_cast<std::size_t>(i)] = -f * bernoulli(dp);
            lower[static_cast<std::size_t>(i)] = -f * bernoulli(-dm);
        } else {
            diag[static_cast<std::size_t>(i)] = 1.0 / dt + f * (bernoulli(dp) + bernoulli(-dm)) + oth / srh_den;
            upper[static_cast<std::size_t>(i)] = -f * bernoulli(-dp);
            lower[static_cast<std::size_t>(i)] = -f * bernoulli(dm);
        }
        const double prev = electrons ? n_old : p_old;
        rhs[static_cast<std::size_t>(i)] = prev / dt + ni * ni / srh_den;
    }
    density = tridiag_solve(std::move(lower), std::move(diag), std::move(upper), std::move(rhs));
}

DDState DDDevice::transient_step(const DDState& state, double dt, double e_port,
                                 const GummelConfig& cfg) const {
    if (!(dt > 0.0)) throw InvalidArgument("device: dt must be positive");
    const int n = spec_.nodes;
    const double vt = spec_.v_t;
    const double v_applied = e_port * spec_.length;
    const double mu_e = mu_n(e_port);
    const double mu_h = mu_p(e_port);
    const double a = eps_ / (h_ * h_);

    DDState st = state;
    st.phi.front() = phi_schottky_eq_ + v_applied;
    st.phi.back() = phi_ohmic_eq_;

    double change = 0.0;
    for (int cycle = 0; cycle < cfg.max_iterations; ++cycle) {
        // nonlinear Poisson, carriers sliding on Boltzmann factors about the
        // current iterate (frozen quasi-Fermi levels)
        const std::vector<double> phi_ref = st.phi;
        for (int it = 0; it < 80; ++it) {
            std::vector<double> lower(static_cast<std::size_t>(n), 0.0),
                diag(static_cast<std::size_t>(n), 1.0), upper(static_cast<std::size_t>(n), 0.0),
                rhs(static_cast<std::size_t>(n), 0.0);
            for (int i = 1; i + 1 < n; ++i) {
                const double dphi = st.phi[static_cast<std::size_t>(i)] - phi_ref[static_cast<std::size_t>(i)];
                const double x = std::clamp(dphi / vt, -60.0, 60.0);
                const double nn = st.n[static_cast<std::size_t>(i)] * std::exp(x);
                const double pp = st.p[static_cast<std::size_t>(i)] * std::exp(-x);
                const double res = a * (st.phi[static_cast<std::size_t>(i) - 1] -
                                        2.0 * st.phi[static_cast<std::size_t>(i)] +
                                        st.phi[static_cast<std::size_t>(i) + 1]) +
                                   kQ * (pp - nn + doping_[static_cast<std::size_t>(i)]);
                lower[static_cast<std::size_t>(i)] = a;
                upper[static_cast<std::size_t>(i)] = a;
                diag[static_cast<std::size_t>(i)] = -2.0 * a - kQ * (nn + pp) / vt;
                rhs[static_cast<std::size_t>(i)] = -res;
            }
            auto delta = tridiag_solve(std::move(lower), std::move(diag), std::move(upper), std::move(rhs));
            double dmax = 0.0;
            for (int i = 1; i + 1 < n; ++i) {
                double d = std::clamp(delta[static_cast<std::size_t>(i)], -5.0 * vt, 5.0 * vt);
                st.phi[static_cast<std::size_t>(i)] += d;
                dmax = std::max(dmax, std::abs(d));
            }
            if (dmax < 1e-13) break;
        }

        std::vector<double> n_new, p_new;
        continuity_step(n_new, true, state, st.phi, dt, mu_e, st.p);
        continuity_step(p_new, false, state, st.phi, dt, mu_h, st.n);

        change = 0.0;
        for (int i = 0; i < n; ++i) {
            const double dn = std::abs(n_new[static_cast<std::size_t>(i)] - st.n[static_cast<std::size_t>(i)]) /
                              (std::abs(st.n[static_cast<std::size_t>(i)]) + spec_.n_i);
            const double dp = std::abs(p_new[static_cast<std::size_t>(i)] - st.p[static_cast<std::size_t>(i)]) /
                              (std::abs(st.p[static_cast<std::size_t>(i)]) + spec_.n_i);
            change = std::max({change, dn, dp});
        }
        st.n = std::move(n_new);
        st.p = std::move(p_new);
        if (change < cfg.tol) break;
        if (cycle + 1 == cfg.max_iterations)
            throw SolverFailure("device: Gummel iteration did not converge", change);
    }

    st.time = state.time + dt;
    st.terminal_current = slab_current(st, state.phi, dt, e_port, 0);
    return st;
}

double DDDevice::slab_current(const DDState& state, const std::vector<double>& phi_prev, double dt,
                              double e_port, int i) const {
    const double vt = spec_.v_t;
    const double dp = (state.phi[static_cast<std::size_t>(i) + 1] - state.phi[static_cast<std::size_t>(i)]) / vt;
    const double dn_coeff = kQ * mu_n(e_port) * vt / h_;
    const double dp_coeff = kQ * mu_p(e_port) * vt / h_;
    const double jn = dn_coeff * (bernoulli(dp) * state.n[static_cast<std::size_t>(i) + 1] -
                                  bernoulli(-dp) * state.n[static_cast<std::size_t>(i)]);
    const double jp = dp_coeff * (bernoulli(dp) * state.p[static_cast<std::size_t>(i)] -
                                  bernoulli(-dp) * state.p[static_cast<std::size_t>(i) + 1]);
    const double e_new = -(state.phi[static_cast<std::size_t>(i) + 1] - state.phi[static_cast<std::size_t>(i)]) / h_;
    const double e_old = -(phi_prev[static_cast<std::size_t>(i) + 1] - phi_prev[static_cast<std::size_t>(i)]) / h_;
    const double j_disp = eps_ * (e_new - e_old) / dt;
    return spec_.area * (jn + jp + j_disp);
}

double DDDevice::total_charge(const DDState& state) const {
    double q = 0.0;
    const int n = spec_.nodes;
    for (int i = 0; i < n; ++i) {
        const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;  // trapezoid
        q += w * (state.p[static_cast<std::size_t>(i)] - state.n[static_cast<std::size_t>(i)] +
                  doping_[static_cast<std::size_t>(i)]);
    }
    return kQ * q * h_ * spec_.area;
}

DDPortAdapter::DDPortAdapter(const DDDevice& device, GummelConfig cfg)
    : device_(&device), cfg_(cfg) {
    state_ = device.solve_equilibrium(cfg_);
}

void DDPortAdapter::set_timestep(double dt) {
    dt_ = dt;
    cache_valid_ = false;
}

void DDPortAdapter::reset() {
    state_ = device_->solve_equilibrium(cfg_);
    cache_valid_ = false;
}

std::pair<double, double> DDPortAdapter::eval(double v) {
    if (!(dt_ > 0.0)) throw InvalidArgument("device adapter: timestep not set");
    if (!cache_valid_ || cached_v_ != v) {
        cached_step_ = device_->transient_step(state_, dt_, v / device_->spec().length, cfg_);
        // central-difference conductance about the trial voltage
        const double dv = 1e-7 * std::max(1.0, std::abs(v));
        const DDState up = device_->transient_step(state_, dt_, (v + dv) / device_->spec().length, cfg_);
        const DDState dn = device_->transient_step(state_, dt_, (v - dv) / device_->spec().length, cfg_);
        cached_g_ = (up.terminal_current - dn.terminal_current) / (2.0 * dv);
        cached_v_ = v;
        cache_valid_ = true;
    }
    return {cached_step_.terminal_current, cached_g_};
}

void DDPortAdapter::commit(double v) {
    if (cache_valid_ && cached_v_ == v) {
        state_ = cached_step_;
    } else {
        state_ = device_->transient_step(state_, dt_, v / device_->spec().length, cfg_);
    }
    cache_valid_ = false;
}

}  // namespace emckt
