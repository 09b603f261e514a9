#include "emckt/emfem.hpp"

#include <cmath>

#include "emckt/errors.hpp"
#include "whitney_local.hpp"

namespace emckt {

MixedSystem assemble_mixed_system(const TetMesh& mesh, const std::vector<Material>& materials,
                                  std::vector<std::uint8_t> pec_edge_mask) {
    if (materials.empty()) throw InvalidArgument("assemble: need at least one material");
    for (const Material& m : materials)
        if (!(m.eps_r > 0.0) || !(m.mu_r > 0.0))
            throw InvalidArgument("assemble: material eps_r, mu_r must be positive");
    if (static_cast<int>(pec_edge_mask.size()) != mesh.n_edges())
        throw InvalidArgument("assemble: PEC mask length mismatch");

    MixedSystem sys;
    sys.mesh = &mesh;
    sys.pec_edge = std::move(pec_edge_mask);
    sys.eps_tet.resize(static_cast<std::size_t>(mesh.n_tets()));
    sys.inv_mu_tet.resize(static_cast<std::size_t>(mesh.n_tets()));

    std::vector<Triplet> me_t, mf_t;
    me_t.reserve(static_cast<std::size_t>(mesh.n_tets()) * 36);
    mf_t.reserve(static_cast<std::size_t>(mesh.n_tets()) * 16);
    for (int t = 0; t < mesh.n_tets(); ++t) {
        const int mat = mesh.tet_material(t);
        if (mat < 0 || mat >= static_cast<int>(materials.size()))
            throw InvalidArgument("assemble: tet references undefined material id");
        const double eps = materials[static_cast<std::size_t>(mat)].eps_r * kVacuumPermittivity;
        const double inv_mu = 1.0 / (materials[static_cast<std::size_t>(mat)].mu_r * kVacuumPermeability);
        sys.eps_tet[static_cast<std::size_t>(t)] = eps;
        sys.inv_mu_tet[static_cast<std::size_t>(t)] = inv_mu;

        const auto eb = detail::edge_mass_block(mesh, t);
        const auto& te = mesh.tet_edges(t);
        for (int k = 0; k < 6; ++k)
            for (int l = 0; l < 6; ++l)
                me_t.push_back({te[static_cast<std::size_t>(k)], te[static_cast<std::size_t>(l)],
                                eps * eb[static_cast<std::size_t>(k * 6 + l)]});

        const auto fb = detail::face_mass_block(mesh, t);
        const auto& tf = mesh.tet_faces(t);
        for (int k = 0; k < 4; ++k)
            for (int l = 0; l < 4; ++l)
                mf_t.push_back({tf[static_cast<std::size_t>(k)], tf[static_cast<std::size_t>(l)],
                                inv_mu * fb[static_cast<std::size_t>(k * 4 + l)]});
    }
    sys.me = SparseMatrix::from_triplets(mesh.n_edges(), mesh.n_edges(), std::move(me_t));
    sys.mf = SparseMatrix::from_triplets(mesh.n_faces(), mesh.n_faces(), std::move(mf_t));

    for (double d : sys.me.diagonal())
        if (!(d > 0.0)) throw TopologyError("assemble: edge mass matrix is not positive definite");
    for (double d : sys.mf.diagonal())
        if (!(d > 0.0)) throw TopologyError("assemble: face mass matrix is not positive definite");

    sys.edge_to_interior.assign(static_cast<std::size_t>(mesh.n_edges()), -1);
    for (int e = 0; e < mesh.n_edges(); ++e) {
        if (!sys.pec_edge[static_cast<std::size_t>(e)]) {
            sys.edge_to_interior[static_cast<std::size_t>(e)] = sys.n_interior++;
            sys.interior_to_edge.push_back(e);
        }
    }
    return sys;
}

FieldState make_state(const MixedSystem& sys) {
    FieldState st;
    st.e.assign(static_cast<std::size_t>(sys.n_edges()), 0.0);
    st.b.assign(static_cast<std::size_t>(sys.n_faces()), 0.0);
    return st;
}

double field_energy(const MixedSystem& sys, const FieldState& state) {
    const auto mee = sys.me.multiply(state.e);
    const auto mfb = sys.mf.multiply(state.b);
    return 0.5 * (dot(state.e, mee) + dot(state.b, mfb));
}

namespace {

// Restricts a square full-space matrix to unconstrained rows/columns.
SparseMatrix reduce_matrix(const SparseMatrix& full, const std::vector<int>& to_reduced,
                           int n_reduced) {
    std::vector<Triplet> t;
    t.reserve(full.nonzeros());
    const auto& off = full.row_offsets();
    const auto& col = full.col_indices();
    const auto& val = full.values();
    for (int r = 0; r < full.rows(); ++r) {
        const int rr = to_reduced[static_cast<std::size_t>(r)];
        if (rr < 0) continue;
        for (int k = off[r]; k < off[r + 1]; ++k) {
            const int cc = to_reduced[static_cast<std::size_t>(col[k])];
            if (cc >= 0) t.push_back({rr, cc, val[k]});
        }
    }
    return SparseMatrix::from_triplets(n_reduced, n_reduced, std::move(t));
}

}  // namespace

Stepper::Stepper(const MixedSystem& sys, const TimeBasis& basis, GmresConfig solver,
                 const PmlOperators* pml)
    : sys_(&sys), basis_(basis), solver_(solver), pml_(pml) {
    if (!(basis.dt > 0.0)) throw InvalidArgument("stepper: dt must be positive");
    const double dt = basis.dt;
    const TetMesh& mesh = *sys.mesh;

    const SparseMatrix& curl = mesh.curl_incidence();
    ct_mf_ = sparse_multiply(sparse_transpose(curl), sys.mf);
    SparseMatrix k = sparse_multiply(ct_mf_, curl);  // curl^T M_f curl

    if (pml_ && pml_->empty()) pml_ = nullptr;

    // A    = Me + (dt/2) S + (dt/2) sum_E A w1 B + (dt^2/4)(K + sum_B A w1 C^T F C)
    // Mmin = Me - (dt/2) S - (dt/2) sum_E A w0 B - (dt^2/4)(K + sum_B A w1 C^T F C)
    std::vector<Triplet> a_t, m_t;
    auto push_both = [&](int r, int c, double plus, double minus) {
        a_t.push_back({r, c, plus});
        m_t.push_back({r, c, minus});
    };
    {
        const auto& off = sys.me.row_offsets();
        const auto& col = sys.me.col_indices();
        const auto& val = sys.me.values();
        for (int r = 0; r < sys.me.rows(); ++r)
            for (int kk = off[r]; kk < off[r + 1]; ++kk)
                push_both(r, col[kk], val[kk], val[kk]);
    }
    {
        const double f = dt * dt / 4.0;
        const auto& off = k.row_offsets();
        const auto& col = k.col_indices();
        const auto& val = k.values();
        for (int r = 0; r < k.rows(); ++r)
            for (int kk = off[r]; kk < off[r + 1]; ++kk)
                push_both(r, col[kk], f * val[kk], -f * val[kk]);
    }
    if (pml_) {
        {
            const auto& off = pml_->sigma_edge.row_offsets();
            const auto& col = pml_->sigma_edge.col_indices();
            const auto& val = pml_->sigma_edge.values();
            for (int r = 0; r < pml_->sigma_edge.rows(); ++r)
                for (int kk = off[r]; kk < off[r + 1]; ++kk)
                    push_both(r, col[kk], 0.5 * dt * val[kk], -0.5 * dt * val[kk]);
        }
        e_tails_.reserve(pml_->e_tails.size());
        for (const CellTailTerm& cell : pml_->e_tails) {
            TailRuntime rt;
            rt.cell = &cell;
            rt.lin = conv_weights_linear(cell.term.decay, dt);
            rt.ramp = conv_weights_ramp(cell.term.decay, dt);
            rt.acc.p.assign(cell.dofs.size(), 0.0);
            if (cell.term.order == 2) rt.acc.q.assign(cell.dofs.size(), 0.0);
            const double wn = (cell.term.order == 2) ? rt.ramp.w_new : rt.lin.w_new;
            const double wp = (cell.term.order == 2) ? rt.ramp.w_prev : rt.lin.w_prev;
            const double fac = 0.5 * dt * cell.term.amplitude;
            const int n = static_cast<int>(cell.dofs.size());
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    const double blk = cell.block[static_cast<std::size_t>(i * n + j)];
                    push_both(cell.dofs[static_cast<std::size_t>(i)], cell.dofs[static_cast<std::size_t>(j)],
                              fac * wn * blk, -fac * wp * blk);
                }
            e_tails_.push_back(std::move(rt));
        }
        b_tails_.reserve(pml_->b_tails.size());
        for (const CellTailTerm& cell : pml_->b_tails) {
            TailRuntime rt;
            rt.cell = &cell;
            rt.lin = conv_weights_linear(cell.term.decay, dt);
            rt.ramp = conv_weights_ramp(cell.term.decay, dt);
            rt.acc.p.assign(cell.dofs.size(), 0.0);
            if (cell.term.order == 2) rt.acc.q.assign(cell.dofs.size(), 0.0);
            // (dt^2/4) * amp * w1 * (C_loc^T F C_loc), same entry on both sides
            const double wn = (cell.term.order == 2) ? rt.ramp.w_new : rt.lin.w_new;
            const double fac = 0.25 * dt * dt * cell.term.amplitude * wn;
            for (int i = 0; i < 6; ++i) {
                for (int j = 0; j < 6; ++j) {
                    double acc = 0.0;
                    for (int f = 0; f < 4; ++f)
                        for (int g = 0; g < 4; ++g)
                            acc += detail::kTetLocalCurl[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)] *
                                   cell.block[static_cast<std::size_t>(f * 4 + g)] *
                                   detail::kTetLocalCurl[static_cast<std::size_t>(g)][static_cast<std::size_t>(j)];
                    acc *= fac;
                    if (acc != 0.0)
                        push_both(cell.edge_dofs[static_cast<std::size_t>(i)],
                                  cell.edge_dofs[static_cast<std::size_t>(j)], acc, -acc);
                }
            }
            b_tails_.push_back(std::move(rt));
        }
    }

    SparseMatrix a_full = SparseMatrix::from_triplets(sys.n_edges(), sys.n_edges(), std::move(a_t));
    m_minus_ = SparseMatrix::from_triplets(sys.n_edges(), sys.n_edges(), std::move(m_t));
    a_reduced_ = reduce_matrix(a_full, sys.edge_to_interior, sys.n_interior);
}

std::vector<double> Stepper::reduce(std::span<const double> full) const {
    std::vector<double> r(static_cast<std::size_t>(sys_->n_interior));
    for (int i = 0; i < sys_->n_interior; ++i)
        r[static_cast<std::size_t>(i)] = full[static_cast<std::size_t>(sys_->interior_to_edge[static_cast<std::size_t>(i)])];
    return r;
}

void Stepper::expand(std::span<const double> reduced, std::span<double> full) const {
    for (int i = 0; i < sys_->n_interior; ++i)
        full[static_cast<std::size_t>(sys_->interior_to_edge[static_cast<std::size_t>(i)])] =
            reduced[static_cast<std::size_t>(i)];
}

std::vector<double> Stepper::rhs_for_step(const FieldState& state,
                                          std::span<const double> tested_load) const {
    const double dt = basis_.dt;
    std::vector<double> rhs = m_minus_.multiply(state.e);
    // + dt C^T M_f b
    {
        std::vector<double> tmp = ct_mf_.multiply(state.b);
        axpy(dt, tmp, rhs);
    }
    // - dt * tested load
    if (!tested_load.empty()) {
        if (tested_load.size() != rhs.size()) throw InvalidArgument("stepper: load length mismatch");
        axpy(-dt, tested_load, rhs);
    }
    // - (dt/2) sum_E A Blk [(E+1)P + w0 e_loc]  (w0 part already inside m_minus_)
    for (const TailRuntime& rt : e_tails_) {
        const auto& cell = *rt.cell;
        const int n = static_cast<int>(cell.dofs.size());
        const double ef = rt.lin.decay_factor;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                const double hist = (cell.term.order == 2)
                                        ? (ef * (rt.acc.q[static_cast<std::size_t>(j)] + dt * rt.acc.p[static_cast<std::size_t>(j)]) +
                                           rt.acc.q[static_cast<std::size_t>(j)])
                                        : (ef + 1.0) * rt.acc.p[static_cast<std::size_t>(j)];
                acc += cell.block[static_cast<std::size_t>(i * n + j)] * hist;
            }
            rhs[static_cast<std::size_t>(cell.dofs[static_cast<std::size_t>(i)])] -=
                0.5 * dt * cell.term.amplitude * acc;
        }
    }
    // + (dt/2) sum_B A C^T Blk [(E+1)Q (+E dt P, order 2) + (w0+w1) b_loc]
    for (const TailRuntime& rt : b_tails_) {
        const auto& cell = *rt.cell;
        const double ef = rt.lin.decay_factor;
        std::array<double, 4> v{};
        const bool second = cell.term.order == 2;
        const double w0 = second ? rt.ramp.w_prev : rt.lin.w_prev;
        const double w1 = second ? rt.ramp.w_new : rt.lin.w_new;
        for (int j = 0; j < 4; ++j) {
            const double bj = state.b[static_cast<std::size_t>(cell.dofs[static_cast<std::size_t>(j)])];
            double hist;
            if (second)
                hist = (ef + 1.0) * rt.acc.q[static_cast<std::size_t>(j)] + ef * dt * rt.acc.p[static_cast<std::size_t>(j)];
            else
                hist = (ef + 1.0) * rt.acc.p[static_cast<std::size_t>(j)];
            v[static_cast<std::size_t>(j)] = hist + (w0 + w1) * bj;
        }
        std::array<double, 4> fv{};
        for (int f = 0; f < 4; ++f) {
            double acc = 0.0;
            for (int g = 0; g < 4; ++g)
                acc += cell.block[static_cast<std::size_t>(f * 4 + g)] * v[static_cast<std::size_t>(g)];
            fv[static_cast<std::size_t>(f)] = acc;
        }
        for (int i = 0; i < 6; ++i) {
            double acc = 0.0;
            for (int f = 0; f < 4; ++f)
                acc += detail::kTetLocalCurl[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)] *
                       fv[static_cast<std::size_t>(f)];
            rhs[static_cast<std::size_t>(cell.edge_dofs[static_cast<std::size_t>(i)])] +=
                0.5 * dt * cell.term.amplitude * acc;
        }
    }
    return reduce(rhs);
}

void Stepper::commit(FieldState& state, std::span<const double> e_plus_reduced) {
    const double dt = basis_.dt;
    std::vector<double> e_plus(state.e.size(), 0.0);
    expand(e_plus_reduced, e_plus);

    // b+ = b - (dt/2) C (e + e+)
    std::vector<double> esum(state.e.size());
    for (std::size_t i = 0; i < esum.size(); ++i) esum[i] = state.e[i] + e_plus[i];
    std::vector<double> b_plus = sys_->mesh->curl_incidence().multiply(esum);
    for (std::size_t f = 0; f < state.b.size(); ++f)
        b_plus[f] = state.b[f] - 0.5 * dt * b_plus[f];

    for (TailRuntime& rt : e_tails_) {
        const auto& cell = *rt.cell;
        const int n = static_cast<int>(cell.dofs.size());
        for (int j = 0; j < n; ++j) {
            const double fp = state.e[static_cast<std::size_t>(cell.dofs[static_cast<std::size_t>(j)])];
            const double fn = e_plus[static_cast<std::size_t>(cell.dofs[static_cast<std::size_t>(j)])];
            const double p_old = rt.acc.p[static_cast<std::size_t>(j)];
            const double p_new = rt.lin.decay_factor * p_old + rt.lin.w_prev * fp + rt.lin.w_new * fn;
            if (cell.term.order == 2)
                rt.acc.q[static_cast<std::size_t>(j)] = rt.lin.decay_factor * (rt.acc.q[static_cast<std::size_t>(j)] + dt * p_old) +
                                                        rt.ramp.w_prev * fp + rt.ramp.w_new * fn;
            rt.acc.p[static_cast<std::size_t>(j)] = p_new;
        }
    }
    for (TailRuntime& rt : b_tails_) {
        const auto& cell = *rt.cell;
        for (int j = 0; j < 4; ++j) {
            const double fp = state.b[static_cast<std::size_t>(cell.dofs[static_cast<std::size_t>(j)])];
            const double fn = b_plus[static_cast<std::size_t>(cell.dofs[static_cast<std::size_t>(j)])];
            const double p_old = rt.acc.p[static_cast<std::size_t>(j)];
            const double p_new = rt.lin.decay_factor * p_old + rt.lin.w_prev * fp + rt.lin.w_new * fn;
            if (cell.term.order == 2)
                rt.acc.q[static_cast<std::size_t>(j)] = rt.lin.decay_factor * (rt.acc.q[static_cast<std::size_t>(j)] + dt * p_old) +
                                                        rt.ramp.w_prev * fp + rt.ramp.w_new * fn;
            rt.acc.p[static_cast<std::size_t>(j)] = p_new;
        }
    }

    state.e = std::move(e_plus);
    state.b = std::move(b_plus);
    ++state.step;
}

StepStats Stepper::step(FieldState& state, std::span<const double> tested_load) {
    const std::vector<double> rhs = rhs_for_step(state, tested_load);
    const std::vector<double> guess = reduce(state.e);
    GmresResult res = gmres_solve(a_reduced_, rhs, solver_, guess);
    last_stats_.gmres_iterations = res.iterations;
    last_stats_.residual = res.residual;
    total_gmres_iterations_ += res.iterations;
    commit(state, res.x);
    return last_stats_;
}

}  // namespace emckt
