#pragma once

#include <array>
#include <vector>

#include "emckt/mesh.hpp"
#include "emckt/sparse.hpp"

namespace emckt {

inline constexpr double kVacuumPermittivity = 8.8541878128e-12;  // F/m
inline constexpr double kVacuumPermeability = 1.25663706212e-6;  // H/m
inline constexpr double kSpeedOfLight = 299792458.0;             // m/s

/// Graded conductivity slabs on the six faces of an axis-aligned box.
/// sigma(depth) = sigma_max * (depth/d)^m inside a slab, zero outside.
struct StretchProfile {
    Vec3 box_lo, box_hi;          ///< outer domain bounds (meters)
    double thickness = 0.0;       ///< slab depth d (meters)
    int grading_order = 3;        ///< m
    double sigma_max = 0.0;       ///< S/m, common to all enabled faces
    std::array<bool, 6> face_enabled{};  ///< -x,+x,-y,+y,-z,+z

    /// Conductivity components (sigma_x, sigma_y, sigma_z) at a point.
    std::array<double, 3> sigma_at(const Vec3& r) const;
    bool any_enabled() const;
};

/// sigma_max from the target normal-incidence reflection coefficient R0:
/// sigma_max = -(m+1) eps0 c ln(R0) / (2 d).
StretchProfile build_stretch_profile(const Vec3& box_lo, const Vec3& box_hi, double thickness,
                                     int grading_order, double r0,
                                     const std::array<bool, 6>& faces);

/// One decaying term of a time-domain kernel: amplitude * e^{-decay t} for
/// order 1, amplitude * t * e^{-decay t} for order 2.
struct KernelTerm {
    double amplitude = 0.0;
    double decay = 0.0;   ///< 1/s, >= 0
    int order = 1;
};

/// Time-domain kernels of one diagonal stretch entry, split by partial
/// fractions. For the xx entry the parameters are a = sigma_y/eps0,
/// b = sigma_z/eps0, c = sigma_x/eps0 (cyclic for yy, zz).
struct KernelDecomposition {
    double l1_delta_prime = 1.0;       ///< coefficient of delta'(t) in L1
    double l1_delta = 0.0;             ///< coefficient of delta(t) in L1
    std::vector<KernelTerm> l1_tail;
    double l2_delta = 1.0;             ///< coefficient of delta(t) in L2
    std::vector<KernelTerm> l2_tail;

    /// Frequency response of the full kernels at angular frequency w.
    std::array<double, 2> l1_response(double omega) const;  // {re, im}
    std::array<double, 2> l2_response(double omega) const;
};

KernelDecomposition derive_kernels(double a, double b, double c);

/// Per-step recursion weights for a piecewise-linear signal convolved with
/// e^{-lambda t}: acc' = decay_factor*acc + w_prev*f(t_n) + w_new*f(t_{n+1}).
struct ConvWeights {
    double decay_factor = 1.0;
    double w_prev = 0.0;
    double w_new = 0.0;
};
ConvWeights conv_weights_linear(double lambda, double dt);
/// Weights of the local integral for the t*e^{-lambda t} kernel. The full
/// recursion also needs the order-1 accumulator with the same lambda:
/// q' = decay_factor*(q + dt*p) + w_prev*f(t_n) + w_new*f(t_{n+1}).
ConvWeights conv_weights_ramp(double lambda, double dt);

/// Recursive evaluation of sum_m A_m (t^{o_m - 1} e^{-lambda_m t}) * f(t) for
/// one scalar piecewise-linear signal f.
class ExpConvolver {
public:
    explicit ExpConvolver(std::vector<KernelTerm> terms, double dt);

    /// Advances one step given the signal at the previous and new step and
    /// returns the convolution value at the new step.
    double update(double f_prev, double f_new);
    double value() const { return value_; }
    void reset();

private:
    struct TermState {
        KernelTerm term;
        ConvWeights lin;
        ConvWeights ramp;
        double p = 0.0;  ///< order-1 accumulator
        double q = 0.0;  ///< order-2 accumulator
    };
    std::vector<TermState> terms_;
    double dt_;
    double value_ = 0.0;
};

/// Tail term attached to a group of mesh entities: a dense local block times
/// the per-entity convolution accumulators.
struct CellTailTerm {
    KernelTerm term;
    std::vector<int> dofs;          ///< global edge ids (E-side) or face ids (B-side)
    std::vector<double> block;      ///< row-major dofs.size()^2 weight block
    std::vector<int> edge_dofs;     ///< B-side only: the owning tet's six edges
};

/// Spatially assembled PML operators in the semi-discrete system. The time
/// integrator folds these into its one-step map.
struct PmlOperators {
    SparseMatrix sigma_edge;             ///< conductivity-type edge mass (full size)
    std::vector<CellTailTerm> e_tails;   ///< L1 exponential tails (edge blocks)
    std::vector<CellTailTerm> b_tails;   ///< L2 exponential tails (face blocks)
    bool empty() const;
};

/// Samples the profile at tet centroids and assembles the per-cell anisotropic
/// mass blocks for every kernel term. eps/mu per tet from the material table.
PmlOperators build_pml_operators(const TetMesh& mesh, const StretchProfile& profile,
                                 const std::vector<double>& eps_per_tet,
                                 const std::vector<double>& inv_mu_per_tet);

}  // namespace emckt
