#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "emckt/gmres.hpp"
#include "emckt/mesh.hpp"
#include "emckt/pml.hpp"
#include "emckt/sparse.hpp"

namespace emckt {

struct Material {
    double eps_r = 1.0;
    double mu_r = 1.0;
};

/// Assembled mixed E-B system: eps-weighted edge mass, 1/mu-weighted face
/// mass, the discrete curl, and the PEC constraint set.
struct MixedSystem {
    const TetMesh* mesh = nullptr;
    SparseMatrix me;   ///< N_e x N_e, int W1_i . eps W1_j
    SparseMatrix mf;   ///< N_f x N_f, int W2_f . (1/mu) W2_g
    std::vector<std::uint8_t> pec_edge;
    std::vector<double> eps_tet;
    std::vector<double> inv_mu_tet;

    int n_interior = 0;
    std::vector<int> edge_to_interior;  ///< -1 for constrained edges
    std::vector<int> interior_to_edge;

    int n_edges() const { return me.rows(); }
    int n_faces() const { return mf.rows(); }
};

/// Edge/face coefficient vectors. PEC-masked e entries stay exactly zero.
struct FieldState {
    std::vector<double> e;
    std::vector<double> b;
    int step = 0;
};

/// Temporal discretization: piecewise-linear (hat) representation in time,
/// realized as the trapezoidal one-step map, the average-acceleration
/// (gamma = 1/2, beta = 1/4) member on the equivalent second-order form.
struct TimeBasis {
    double dt = 0.0;
    double newmark_gamma = 0.5;
    double newmark_beta = 0.25;
};

MixedSystem assemble_mixed_system(const TetMesh& mesh, const std::vector<Material>& materials,
                                  std::vector<std::uint8_t> pec_edge_mask);

FieldState make_state(const MixedSystem& sys);

/// 1/2 (e^T M_e e + b^T M_f b), joules.
double field_energy(const MixedSystem& sys, const FieldState& state);

struct StepStats {
    int gmres_iterations = 0;
    double residual = 0.0;
};

/// One-step implicit marcher. The per-step load is the temporally tested
/// current vector for the interval being advanced, in the full edge space;
/// with hat representation that is (j(t_i) + j(t_{i+1}))/2.
///
/// Sequential per instance; independent instances share no mutable state.
class Stepper {
public:
    Stepper(const MixedSystem& sys, const TimeBasis& basis, GmresConfig solver,
            const PmlOperators* pml = nullptr);

    StepStats step(FieldState& state, std::span<const double> tested_load);

    /// Split interface for callers solving e(t_{i+1}) jointly with other
    /// unknowns: the reduced right-hand side for this step (accumulators are
    /// not advanced), and the commit that finishes the step from a solved
    /// reduced e(t_{i+1}).
    std::vector<double> rhs_for_step(const FieldState& state,
                                     std::span<const double> tested_load) const;
    void commit(FieldState& state, std::span<const double> e_plus_reduced);

    const SparseMatrix& system_matrix() const { return a_reduced_; }
    const MixedSystem& system() const { return *sys_; }
    const TimeBasis& time_basis() const { return basis_; }
    int n_reduced() const { return sys_->n_interior; }

    std::vector<double> reduce(std::span<const double> full) const;
    void expand(std::span<const double> reduced, std::span<double> full) const;

    long total_gmres_iterations() const { return total_gmres_iterations_; }
    int last_gmres_iterations() const { return last_stats_.gmres_iterations; }

private:
    /// Recursive-convolution accumulators of one kernel tail term.
    struct ConvolutionState {
        std::vector<double> p;
        std::vector<double> q;  ///< order-2 terms only
    };
    struct TailRuntime {
        const CellTailTerm* cell = nullptr;
        ConvWeights lin;
        ConvWeights ramp;
        ConvolutionState acc;
    };

    const MixedSystem* sys_;
    TimeBasis basis_;
    GmresConfig solver_;
    const PmlOperators* pml_;

    SparseMatrix a_reduced_;    ///< implicit system on interior edges
    SparseMatrix m_minus_;      ///< explicit part of the update, full size
    SparseMatrix ct_mf_;        ///< curl^T * M_f, full size
    std::vector<TailRuntime> e_tails_;
    std::vector<TailRuntime> b_tails_;

    StepStats last_stats_;
    long total_gmres_iterations_ = 0;
};

}  // namespace emckt
