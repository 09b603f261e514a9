#pragma once

// Per-tet Whitney mass blocks, exact for the quadratic integrands of
// lowest-order bases: uses int_tet lambda_i lambda_j dV = V (1+delta_ij)/20.

#include <array>

#include "emckt/mesh.hpp"

namespace emckt::detail {

constexpr std::array<std::array<int, 2>, 6> kTetLocalEdges = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};
constexpr std::array<std::array<int, 3>, 4> kTetLocalFaces = {
    {{1, 2, 3}, {0, 2, 3}, {0, 1, 3}, {0, 1, 2}}};

// Local curl incidence rows (face-by-edge) matching the global convention;
// valid because stored tet vertex ids ascend.
constexpr std::array<std::array<double, 6>, 4> kTetLocalCurl = {{
    {0, 0, 0, 1, -1, 1},
    {0, 1, -1, 0, 0, 1},
    {1, 0, -1, 0, 1, 0},
    {1, -1, 0, 1, 0, 0},
}};

inline double axis_component(const Vec3& v, int axis) {
    return axis == 0 ? v.x : axis == 1 ? v.y : v.z;
}

// metric(i, j) must return the inner product used between gradient vectors.
template <typename Metric>
std::array<double, 36> edge_mass_block_metric(const TetMesh& mesh, int t, Metric&& metric) {
    const double vol = mesh.tet_volume(t);
    std::array<double, 36> block{};
    auto lam_int = [vol](int i, int j) { return vol * (i == j ? 2.0 : 1.0) / 20.0; };
    for (int k = 0; k < 6; ++k) {
        const int a = kTetLocalEdges[static_cast<std::size_t>(k)][0];
        const int b = kTetLocalEdges[static_cast<std::size_t>(k)][1];
        for (int l = 0; l < 6; ++l) {
            const int c = kTetLocalEdges[static_cast<std::size_t>(l)][0];
            const int d = kTetLocalEdges[static_cast<std::size_t>(l)][1];
            block[static_cast<std::size_t>(k * 6 + l)] =
                metric(b, d) * lam_int(a, c) - metric(b, c) * lam_int(a, d) -
                metric(a, d) * lam_int(b, c) + metric(a, c) * lam_int(b, d);
        }
    }
    return block;
}

inline std::array<double, 36> edge_mass_block(const TetMesh& mesh, int t) {
    const auto g = mesh.grad_lambda(t);
    return edge_mass_block_metric(mesh, t, [&](int i, int j) {
        return dot(g[static_cast<std::size_t>(i)], g[static_cast<std::size_t>(j)]);
    });
}

inline std::array<double, 36> edge_mass_block_axis(const TetMesh& mesh, int t, int axis) {
    const auto g = mesh.grad_lambda(t);
    return edge_mass_block_metric(mesh, t, [&](int i, int j) {
        return axis_component(g[static_cast<std::size_t>(i)], axis) *
               axis_component(g[static_cast<std::size_t>(j)], axis);
    });
}

// face_vec(f, i) = the constant vector multiplying lambda of the i-th vertex
// of local face f in W2_f = 2 * sum_i lambda_i face_vec(f, i).
template <typename Metric>
std::array<double, 16> face_mass_block_metric(const TetMesh& mesh, int t, Metric&& metric) {
    const auto g = mesh.grad_lambda(t);
    const double vol = mesh.tet_volume(t);
    std::array<std::array<Vec3, 3>, 4> fv{};
    std::array<std::array<int, 3>, 4> fi{};
    for (int f = 0; f < 4; ++f) {
        const auto& lf = kTetLocalFaces[static_cast<std::size_t>(f)];
        const int a = lf[0], b = lf[1], c = lf[2];
        fi[static_cast<std::size_t>(f)] = {a, b, c};
        fv[static_cast<std::size_t>(f)][0] = cross(g[static_cast<std::size_t>(b)], g[static_cast<std::size_t>(c)]);
        fv[static_cast<std::size_t>(f)][1] = cross(g[static_cast<std::size_t>(c)], g[static_cast<std::size_t>(a)]);
        fv[static_cast<std::size_t>(f)][2] = cross(g[static_cast<std::size_t>(a)], g[static_cast<std::size_t>(b)]);
    }
    auto lam_int = [vol](int i, int j) { return vol * (i == j ? 2.0 : 1.0) / 20.0; };
    std::array<double, 16> block{};
    for (int f = 0; f < 4; ++f) {
        for (int h = 0; h < 4; ++h) {
            double acc = 0.0;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    acc += metric(fv[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)],
                                  fv[static_cast<std::size_t>(h)][static_cast<std::size_t>(j)]) *
                           lam_int(fi[static_cast<std::size_t>(f)][static_cast<std::size_t>(i)],
                                   fi[static_cast<std::size_t>(h)][static_cast<std::size_t>(j)]);
            block[static_cast<std::size_t>(f * 4 + h)] = 4.0 * acc;
        }
    }
    return block;
}

inline std::array<double, 16> face_mass_block(const TetMesh& mesh, int t) {
    return face_mass_block_metric(mesh, t, [](const Vec3& u, const Vec3& v) { return dot(u, v); });
}

inline std::array<double, 16> face_mass_block_axis(const TetMesh& mesh, int t, int axis) {
    return face_mass_block_metric(mesh, t, [axis](const Vec3& u, const Vec3& v) {
        return axis_component(u, axis) * axis_component(v, axis);
    });
}

}  // namespace emckt::detail
