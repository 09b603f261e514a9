#include "emckt/coupling.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "emckt/errors.hpp"

namespace emckt {

std::vector<std::string> CouplingMap::labels() const {
    std::vector<std::string> out;
    out.reserve(ports.size());
    for (const auto& p : ports) out.push_back(p.label);
    return out;
}

CouplingMap build_coupling(const TetMesh& mesh, const MixedSystem& sys,
                           const std::vector<PortSpec>& ports) {
    CouplingMap map;
    std::set<int> used_edges;
    for (const PortSpec& port : ports) {
        CouplingMap::PortEntry entry;
        entry.port_id = port.id;
        entry.label = port.label;
        for (const auto& [edge, sign] : port.edges) {
            if (edge < 0 || edge >= mesh.n_edges())
                throw InvalidArgument("coupling: port edge id out of range");
            if (!used_edges.insert(edge).second)
                throw ConfigError("coupling: edge " + std::to_string(edge) + " appears in two ports");
            if (sys.pec_edge[static_cast<std::size_t>(edge)])
                throw ConfigError("coupling: port edge " + std::to_string(edge) + " is PEC-masked");
            const double c = sign * whitney_edge_line_integral(mesh, edge, edge);
            entry.edge_coeffs.emplace_back(edge, c);
        }
        map.ports.push_back(std::move(entry));
    }
    return map;
}

std::vector<double> impress_current(const CouplingMap& map, std::span<const double> port_currents,
                                    int n_edges) {
    if (port_currents.size() != static_cast<std::size_t>(map.n_ports()))
        throw InvalidArgument("impress_current: port count mismatch");
    for (double i : port_currents)
        if (!std::isfinite(i)) throw InvalidArgument("impress_current: non-finite current");
    std::vector<double> load(static_cast<std::size_t>(n_edges), 0.0);
    for (int q = 0; q < map.n_ports(); ++q)
        for (const auto& [edge, c] : map.ports[static_cast<std::size_t>(q)].edge_coeffs)
            load[static_cast<std::size_t>(edge)] += c * port_currents[static_cast<std::size_t>(q)];
    return load;
}

std::vector<double> read_port_voltage(const CouplingMap& map, const FieldState& state) {
    std::vector<double> v(static_cast<std::size_t>(map.n_ports()), 0.0);
    for (int q = 0; q < map.n_ports(); ++q)
        for (const auto& [edge, c] : map.ports[static_cast<std::size_t>(q)].edge_coeffs)
            v[static_cast<std::size_t>(q)] += c * state.e[static_cast<std::size_t>(edge)];
    return v;
}

double relative_l2(const TransientRecord& a, const TransientRecord& b) {
    if (a.voltage.size() != b.voltage.size()) throw InvalidArgument("relative_l2: port count mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t p = 0; p < a.voltage.size(); ++p) {
        if (a.voltage[p].size() != b.voltage[p].size())
            throw InvalidArgument("relative_l2: step count mismatch");
        for (std::size_t i = 0; i < a.voltage[p].size(); ++i) {
            const double d = a.voltage[p][i] - b.voltage[p][i];
            num += d * d;
            den += b.voltage[p][i] * b.voltage[p][i];
        }
    }
    if (den == 0.0) return std::sqrt(num) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

namespace {

struct TripletAdder final : MatrixAdder {
    std::vector<Triplet>* sink = nullptr;
    int row_offset = 0;
    int col_offset = 0;
    void add(int r, int c, double v) override {
        sink->push_back({r + row_offset, c + col_offset, v});
    }
};

}  // namespace

TransientRecord coupled_transient_solve(Stepper& stepper, MnaSystem& mna, const CouplingMap& map,
                                        int n_steps, const CoupledOptions& opts) {
    const MixedSystem& sys = stepper.system();
    const double dt = stepper.time_basis().dt;
    const int n_em = stepper.n_reduced();
    const int n_ckt = mna.n_unknowns();
    const int n_total = n_em + n_ckt;
    const int np = map.n_ports();
    if (mna.n_ports() > np) throw ConfigError("coupled: netlist references more ports than the EM system has");

    // netlist may attach circuits to a subset of the EM ports; unattached
    // ports carry no current and act as probes
    std::vector<int> mna_port_of(static_cast<std::size_t>(mna.n_ports()), -1);
    for (int k = 0; k < mna.n_ports(); ++k) {
        const int gid = mna.port_global_id(k);
        if (gid < 0 || gid >= np)
            throw ConfigError("coupled: netlist references port id " + std::to_string(gid) +
                              " outside the EM port set");
        mna_port_of[static_cast<std::size_t>(k)] = gid;
    }

    // reduced-space coupling columns
    std::vector<std::vector<std::pair<int, double>>> cvec(static_cast<std::size_t>(np));
    for (int q = 0; q < np; ++q)
        for (const auto& [edge, c] : map.ports[static_cast<std::size_t>(q)].edge_coeffs) {
            const int red = sys.edge_to_interior[static_cast<std::size_t>(edge)];
            if (red < 0) throw ConfigError("coupled: port edge is PEC-masked");
            cvec[static_cast<std::size_t>(q)].emplace_back(red, c);
        }

    FieldState state = make_state(sys);
    TransientRecord rec;
    rec.dt = dt;
    rec.port_labels = map.labels();
    rec.voltage.assign(static_cast<std::size_t>(np), std::vector<double>(static_cast<std::size_t>(n_steps), 0.0));
    rec.current.assign(static_cast<std::size_t>(np), std::vector<double>(static_cast<std::size_t>(n_steps), 0.0));
    rec.newton_iterations.assign(static_cast<std::size_t>(n_steps), 0);
    rec.gmres_iterations.assign(static_cast<std::size_t>(n_steps), 0);
    rec.step_seconds.assign(static_cast<std::size_t>(n_steps), 0.0);
    if (!opts.probe_edges.empty())
        rec.probe.assign(static_cast<std::size_t>(n_steps),
                         std::vector<double>(opts.probe_edges.size(), 0.0));

    const SparseMatrix& a_em = stepper.system_matrix();
    std::vector<double> j_prev(static_cast<std::size_t>(sys.n_edges()), 0.0);
    std::vector<double> y(static_cast<std::size_t>(n_total), 0.0);

    GmresConfig joint_gmres = opts.gmres;
    joint_gmres.throw_on_failure = true;

    for (int i = 1; i < n_steps; ++i) {
        const auto wall_start = std::chrono::steady_clock::now();
        const double t = i * dt;
        // known half of the tested load: j(t_{i-1})/2
        std::vector<double> jhat(j_prev.size());
        for (std::size_t k = 0; k < jhat.size(); ++k) jhat[k] = 0.5 * j_prev[k];
        const std::vector<double> rhs_free = stepper.rhs_for_step(state, jhat);
        double rhs_scale = 0.0;
        for (double v : rhs_free) rhs_scale = std::max(rhs_scale, std::abs(v));

        mna.begin_step(t);

        // warm start from the previous step's solution
        {
            auto er = stepper.reduce(state.e);
            std::copy(er.begin(), er.end(), y.begin());
            const auto& x = mna.solution();
            std::copy(x.begin(), x.end(), y.begin() + n_em);
        }

        std::vector<double> x_ckt(static_cast<std::size_t>(n_ckt));
        std::vector<double> resid(static_cast<std::size_t>(n_total));
        std::vector<double> ckt_resid;
        std::vector<Triplet> trip;

        auto eval_residual = [&](const std::vector<double>& yy, std::vector<Triplet>* jac_out,
                                 double& ckt_norm, double& em_norm) {
            std::copy(yy.begin() + n_em, yy.end(), x_ckt.begin());
            // EM rows: A e - rhs_free + (dt/2) sum_q c_q I_q
            std::span<const double> e_red(yy.data(), static_cast<std::size_t>(n_em));
            a_em.multiply(e_red, std::span<double>(resid.data(), static_cast<std::size_t>(n_em)));
            double em_ref = rhs_scale;
            for (int r = 0; r < n_em; ++r) {
                em_ref = std::max(em_ref, std::abs(resid[static_cast<std::size_t>(r)]));
                resid[static_cast<std::size_t>(r)] -= rhs_free[static_cast<std::size_t>(r)];
            }
            for (int k = 0; k < mna.n_ports(); ++k) {
                const int q = mna_port_of[static_cast<std::size_t>(k)];
                const double iq = yy[static_cast<std::size_t>(n_em + mna.port_branch_unknown(k))];
                for (const auto& [red, c] : cvec[static_cast<std::size_t>(q)]) {
                    resid[static_cast<std::size_t>(red)] += 0.5 * dt * c * iq;
                    em_ref = std::max(em_ref, std::abs(0.5 * dt * c * iq));
                }
            }
            // circuit rows
            TripletAdder adder;
            adder.sink = jac_out ? &trip : nullptr;
            adder.row_offset = n_em;
            adder.col_offset = n_em;
            mna.assemble(x_ckt, jac_out ? &adder : nullptr, ckt_resid, false);
            // port branch rows get the field readback sum_k C e
            for (int k = 0; k < mna.n_ports(); ++k) {
                const int q = mna_port_of[static_cast<std::size_t>(k)];
                double v_read = 0.0;
                for (const auto& [red, c] : cvec[static_cast<std::size_t>(q)])
                    v_read += c * yy[static_cast<std::size_t>(red)];
                ckt_resid[static_cast<std::size_t>(mna.port_branch_unknown(k))] += v_read;
            }
            for (int r = 0; r < n_ckt; ++r) resid[static_cast<std::size_t>(n_em + r)] = ckt_resid[static_cast<std::size_t>(r)];

            ckt_norm = 0.0;
            for (int r = 0; r < n_ckt; ++r)
                ckt_norm = std::max(ckt_norm, std::abs(ckt_resid[static_cast<std::size_t>(r)]));
            ckt_norm /= mna.residual_scale();
            em_norm = 0.0;
            for (int r = 0; r < n_em; ++r)
                em_norm = std::max(em_norm, std::abs(resid[static_cast<std::size_t>(r)]));
            em_norm /= std::max(em_ref, 1e-300);

            if (jac_out) {
                // EM block + coupling columns + readback rows
                const auto& off = a_em.row_offsets();
                const auto& col = a_em.col_indices();
                const auto& val = a_em.values();
                for (int r = 0; r < n_em; ++r)
                    for (int kk = off[r]; kk < off[r + 1]; ++kk)
                        jac_out->push_back({r, col[kk], val[kk]});
                for (int k = 0; k < mna.n_ports(); ++k) {
                    const int q = mna_port_of[static_cast<std::size_t>(k)];
                    const int icol = n_em + mna.port_branch_unknown(k);
                    const int vrow = n_em + mna.port_branch_unknown(k);
                    for (const auto& [red, c] : cvec[static_cast<std::size_t>(q)]) {
                        jac_out->push_back({red, icol, 0.5 * dt * c});
                        jac_out->push_back({vrow, red, c});
                    }
                }
            }
        };

        int iters = 0;
        long step_gmres = 0;
        double ckt_norm = 0.0, em_norm = 0.0;
        trip.clear();
        eval_residual(y, nullptr, ckt_norm, em_norm);
        double norm = std::max(ckt_norm, em_norm);
        while (norm > opts.newton.tol && iters < opts.newton.max_iterations) {
            trip.clear();
            eval_residual(y, &trip, ckt_norm, em_norm);
            SparseMatrix jac = SparseMatrix::from_triplets(n_total, n_total, trip);
            std::vector<double> rhs(resid.size());
            for (std::size_t r = 0; r < resid.size(); ++r) rhs[r] = -resid[r];

            if (opts.equilibrate) {
                // row scaling to unit infinity norm
                const auto& off = jac.row_offsets();
                auto& vals = jac.values();
                for (int r = 0; r < n_total; ++r) {
                    double m = 0.0;
                    for (int kk = off[r]; kk < off[r + 1]; ++kk) m = std::max(m, std::abs(vals[static_cast<std::size_t>(kk)]));
                    if (m == 0.0) continue;
                    const double s = 1.0 / m;
                    for (int kk = off[r]; kk < off[r + 1]; ++kk) vals[static_cast<std::size_t>(kk)] *= s;
                    rhs[static_cast<std::size_t>(r)] *= s;
                }
            }
            GmresResult sol = gmres_solve(jac, rhs, joint_gmres);
            step_gmres += sol.iterations;

            double stepscale = 1.0;
            std::vector<double> yc(y.size());
            double nc = 0.0;
            for (int h = 0; h <= opts.newton.max_halvings; ++h) {
                for (std::size_t r = 0; r < y.size(); ++r) yc[r] = y[r] + stepscale * sol.x[r];
                eval_residual(yc, nullptr, ckt_norm, em_norm);
                nc = std::max(ckt_norm, em_norm);
                if (nc < norm || h == opts.newton.max_halvings) break;
                stepscale *= 0.5;
            }
            y = yc;
            norm = nc;
            ++iters;
        }
        if (norm > opts.newton.tol)
            throw SolverFailure("coupled: Newton did not converge at step " + std::to_string(i), norm);

        // commit both subsystems
        std::copy(y.begin() + n_em, y.end(), x_ckt.begin());
        mna.commit_step(x_ckt);
        stepper.commit(state, std::span<const double>(y.data(), static_cast<std::size_t>(n_em)));

        std::vector<double> i_port(static_cast<std::size_t>(np), 0.0);
        for (int k = 0; k < mna.n_ports(); ++k)
            i_port[static_cast<std::size_t>(mna_port_of[static_cast<std::size_t>(k)])] =
                x_ckt[static_cast<std::size_t>(mna.port_branch_unknown(k))];
        j_prev = impress_current(map, i_port, sys.n_edges());

        const std::vector<double> v_read = read_port_voltage(map, state);
        for (int q = 0; q < np; ++q) {
            rec.voltage[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)] = v_read[static_cast<std::size_t>(q)];
            rec.current[static_cast<std::size_t>(q)][static_cast<std::size_t>(i)] = i_port[static_cast<std::size_t>(q)];
        }
        rec.newton_iterations[static_cast<std::size_t>(i)] = iters;
        rec.gmres_iterations[static_cast<std::size_t>(i)] = step_gmres;
        for (std::size_t pe = 0; pe < opts.probe_edges.size(); ++pe)
            rec.probe[static_cast<std::size_t>(i)][pe] =
                state.e[static_cast<std::size_t>(opts.probe_edges[pe])];
        rec.step_seconds[static_cast<std::size_t>(i)] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    }
    return rec;
}

}  // namespace emckt
