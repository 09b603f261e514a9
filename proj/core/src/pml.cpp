#include "emckt/pml.hpp"

#include <cmath>
#include <complex>

#include "emckt/errors.hpp"
#include "whitney_local.hpp"

namespace emckt {

namespace {

double slab_sigma(double coord, double lo, double hi, double d, int m, double sigma_max,
                  bool lo_face, bool hi_face) {
    if (lo_face && coord < lo + d) {
        const double depth = (lo + d) - coord;
        return sigma_max * std::pow(std::min(depth, d) / d, m);
    }
    if (hi_face && coord > hi - d) {
        const double depth = coord - (hi - d);
        return sigma_max * std::pow(std::min(depth, d) / d, m);
    }
    return 0.0;
}

}  // namespace

std::array<double, 3> StretchProfile::sigma_at(const Vec3& r) const {
    if (thickness <= 0.0 || sigma_max == 0.0) return {0.0, 0.0, 0.0};
    return {
        slab_sigma(r.x, box_lo.x, box_hi.x, thickness, grading_order, sigma_max, face_enabled[0],
                   face_enabled[1]),
        slab_sigma(r.y, box_lo.y, box_hi.y, thickness, grading_order, sigma_max, face_enabled[2],
                   face_enabled[3]),
        slab_sigma(r.z, box_lo.z, box_hi.z, thickness, grading_order, sigma_max, face_enabled[4],
                   face_enabled[5]),
    };
}

bool StretchProfile::any_enabled() const {
    for (bool f : face_enabled)
        if (f) return true;
    return false;
}

StretchProfile build_stretch_profile(const Vec3& box_lo, const Vec3& box_hi, double thickness,
                                     int grading_order, double r0,
                                     const std::array<bool, 6>& faces) {
    if (!(r0 > 0.0 && r0 < 1.0)) throw InvalidArgument("pml: target reflection must be in (0,1)");
    if (grading_order < 1) throw InvalidArgument("pml: grading order must be >= 1");
    if (thickness <= 0.0) throw InvalidArgument("pml: thickness must be positive");
    StretchProfile p;
    p.box_lo = box_lo;
    p.box_hi = box_hi;
    p.thickness = thickness;
    p.grading_order = grading_order;
    p.face_enabled = faces;
    p.sigma_max = -(grading_order + 1) * kVacuumPermittivity * kSpeedOfLight * std::log(r0) /
                  (2.0 * thickness);
    return p;
}

KernelDecomposition derive_kernels(double a, double b, double c) {
    if (a < 0.0 || b < 0.0 || c < 0.0) throw InvalidArgument("derive_kernels: rates must be >= 0");
    KernelDecomposition kd;
    kd.l1_delta_prime = 1.0;
    kd.l1_delta = a + b - c;
    const double beta = (c - a) * (c - b);
    if (beta != 0.0) kd.l1_tail.push_back({beta, c, 1});

    kd.l2_delta = 1.0;
    const double scale = std::max({a, b, 1e-300});
    if (std::abs(a - b) <= 1e-12 * scale) {
        // double pole at a: (c-2a)/(p+a) + a(a-c)/(p+a)^2
        if (c - 2.0 * a != 0.0) kd.l2_tail.push_back({c - 2.0 * a, a, 1});
        if (a * (a - c) != 0.0) kd.l2_tail.push_back({a * (a - c), a, 2});
    } else {
        const double amp_a = a * (a - c) / (b - a);
        const double amp_b = b * (b - c) / (a - b);
        if (amp_a != 0.0) kd.l2_tail.push_back({amp_a, a, 1});
        if (amp_b != 0.0) kd.l2_tail.push_back({amp_b, b, 1});
    }
    return kd;
}

namespace {

std::complex<double> tail_response(const std::vector<KernelTerm>& tail, double omega) {
    std::complex<double> acc(0.0, 0.0);
    for (const KernelTerm& t : tail) {
        const std::complex<double> pole(t.decay, omega);
        acc += (t.order == 1) ? t.amplitude / pole : t.amplitude / (pole * pole);
    }
    return acc;
}

}  // namespace

std::array<double, 2> KernelDecomposition::l1_response(double omega) const {
    std::complex<double> v(l1_delta, omega * l1_delta_prime);
    v += tail_response(l1_tail, omega);
    return {v.real(), v.imag()};
}

std::array<double, 2> KernelDecomposition::l2_response(double omega) const {
    std::complex<double> v(l2_delta, 0.0);
    v += tail_response(l2_tail, omega);
    return {v.real(), v.imag()};
}

namespace {

// Series coefficients: see the closed forms below; all four weight kernels
// admit sum_j (-x)^j f(j) expansions that avoid cancellation for small x.
double series_sum(double x, double (*coef)(int)) {
    double term = 1.0, acc = 0.0;
    for (int j = 0; j < 14; ++j) {
        acc += term * coef(j);
        term *= -x;
    }
    return acc;
}

double fact(int n) {
    double f = 1.0;
    for (int k = 2; k <= n; ++k) f *= k;
    return f;
}

}  // namespace

ConvWeights conv_weights_linear(double lambda, double dt) {
    ConvWeights w;
    const double x = lambda * dt;
    w.decay_factor = std::exp(-x);
    if (x < 0.5) {
        w.w_new = dt * series_sum(x, [](int j) { return 1.0 / fact(j + 2); });
        w.w_prev = dt * series_sum(x, [](int j) { return (j + 1) / fact(j + 2); });
    } else {
        const double em = w.decay_factor;
        w.w_new = (1.0 - (1.0 - em) / x) / lambda;
        w.w_prev = (1.0 - em) / lambda - w.w_new;
    }
    return w;
}

ConvWeights conv_weights_ramp(double lambda, double dt) {
    ConvWeights w;
    const double x = lambda * dt;
    w.decay_factor = std::exp(-x);
    if (x < 0.5) {
        w.w_new = dt * dt * series_sum(x, [](int j) { return (j + 1) / fact(j + 3); });
        w.w_prev = dt * dt * series_sum(x, [](int j) {
            return static_cast<double>(j + 1) * (j + 2) / fact(j + 3);
        });
    } else {
        const double em = w.decay_factor;
        const double i1 = (1.0 - em * (1.0 + x)) / (lambda * lambda);
        const double i2 = (2.0 - em * (x * x + 2.0 * x + 2.0)) / (lambda * lambda * lambda);
        w.w_new = i1 - i2 / dt;
        w.w_prev = i2 / dt;
    }
    return w;
}

ExpConvolver::ExpConvolver(std::vector<KernelTerm> terms, double dt) : dt_(dt) {
    terms_.reserve(terms.size());
    for (const KernelTerm& t : terms) {
        TermState s;
        s.term = t;
        s.lin = conv_weights_linear(t.decay, dt);
        s.ramp = conv_weights_ramp(t.decay, dt);
        terms_.push_back(s);
    }
}

double ExpConvolver::update(double f_prev, double f_new) {
    double total = 0.0;
    for (TermState& s : terms_) {
        const double p_next = s.lin.decay_factor * s.p + s.lin.w_prev * f_prev + s.lin.w_new * f_new;
        if (s.term.order == 2) {
            s.q = s.lin.decay_factor * (s.q + dt_ * s.p) + s.ramp.w_prev * f_prev + s.ramp.w_new * f_new;
            total += s.term.amplitude * s.q;
        } else {
            total += s.term.amplitude * p_next;
        }
        s.p = p_next;
    }
    value_ = total;
    return total;
}

void ExpConvolver::reset() {
    for (TermState& s : terms_) s.p = s.q = 0.0;
    value_ = 0.0;
}

bool PmlOperators::empty() const {
    return sigma_edge.nonzeros() == 0 && e_tails.empty() && b_tails.empty();
}

PmlOperators build_pml_operators(const TetMesh& mesh, const StretchProfile& profile,
                                 const std::vector<double>& eps_per_tet,
                                 const std::vector<double>& inv_mu_per_tet) {
    PmlOperators ops;
    std::vector<Triplet> sigma_triplets;
    for (int t = 0; t < mesh.n_tets(); ++t) {
        const auto sigma = profile.sigma_at(mesh.tet_centroid(t));
        if (sigma[0] == 0.0 && sigma[1] == 0.0 && sigma[2] == 0.0) continue;
        const double eps = eps_per_tet[static_cast<std::size_t>(t)];
        const double inv_mu = inv_mu_per_tet[static_cast<std::size_t>(t)];
        const auto& te = mesh.tet_edges(t);
        const auto& tf = mesh.tet_faces(t);

        for (int axis = 0; axis < 3; ++axis) {
            const double c = sigma[static_cast<std::size_t>(axis)] / kVacuumPermittivity;
            const double a = sigma[static_cast<std::size_t>((axis + 1) % 3)] / kVacuumPermittivity;
            const double b = sigma[static_cast<std::size_t>((axis + 2) % 3)] / kVacuumPermittivity;
            const KernelDecomposition kd = derive_kernels(a, b, c);

            std::array<double, 36> eblock{};
            bool have_eblock = false;
            if (kd.l1_delta != 0.0 || !kd.l1_tail.empty()) {
                eblock = detail::edge_mass_block_axis(mesh, t, axis);
                for (double& v : eblock) v *= eps;
                have_eblock = true;
            }
            if (have_eblock && kd.l1_delta != 0.0) {
                for (int k = 0; k < 6; ++k)
                    for (int l = 0; l < 6; ++l)
                        sigma_triplets.push_back({te[static_cast<std::size_t>(k)], te[static_cast<std::size_t>(l)],
                                                  kd.l1_delta * eblock[static_cast<std::size_t>(k * 6 + l)]});
            }
            for (const KernelTerm& term : kd.l1_tail) {
                CellTailTerm ct;
                ct.term = term;
                ct.dofs.assign(te.begin(), te.end());
                ct.block.assign(eblock.begin(), eblock.end());
                ops.e_tails.push_back(std::move(ct));
            }
            if (!kd.l2_tail.empty()) {
                auto fblock = detail::face_mass_block_axis(mesh, t, axis);
                for (double& v : fblock) v *= inv_mu;
                for (const KernelTerm& term : kd.l2_tail) {
                    CellTailTerm ct;
                    ct.term = term;
                    ct.dofs.assign(tf.begin(), tf.end());
                    ct.block.assign(fblock.begin(), fblock.end());
                    ct.edge_dofs.assign(te.begin(), te.end());
                    ops.b_tails.push_back(std::move(ct));
                }
            }
        }
    }
    ops.sigma_edge = SparseMatrix::from_triplets(mesh.n_edges(), mesh.n_edges(),
                                                 std::move(sigma_triplets));
    return ops;
}

}  // namespace emckt
