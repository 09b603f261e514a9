#include "emckt/dense.hpp"

#include <cmath>

#include "emckt/errors.hpp"

namespace emckt {

std::vector<double> DenseMatrix::multiply(const std::vector<double>& x) const {
    std::vector<double> y(static_cast<std::size_t>(rows_), 0.0);
    for (int r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (int c = 0; c < cols_; ++c) acc += (*this)(r, c) * x[static_cast<std::size_t>(c)];
        y[static_cast<std::size_t>(r)] = acc;
    }
    return y;
}

std::vector<double> dense_solve(const DenseMatrix& a, std::vector<double> b) {
    if (a.rows() != a.cols()) throw InvalidArgument("dense_solve: matrix must be square");
    if (a.rows() != static_cast<int>(b.size())) throw InvalidArgument("dense_solve: rhs length mismatch");
    const int n = a.rows();
    DenseMatrix lu = a;
    std::vector<int> perm(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;

    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(lu(k, k));
        for (int r = k + 1; r < n; ++r) {
            const double v = std::abs(lu(r, k));
            if (v > best) { best = v; piv = r; }
        }
        if (best == 0.0) throw SolverFailure("dense_solve: singular matrix");
        if (piv != k) {
            for (int c = 0; c < n; ++c) std::swap(lu(k, c), lu(piv, c));
            std::swap(b[static_cast<std::size_t>(k)], b[static_cast<std::size_t>(piv)]);
        }
        const double inv = 1.0 / lu(k, k);
        for (int r = k + 1; r < n; ++r) {
            const double f = lu(r, k) * inv;
            if (f == 0.0) continue;
            lu(r, k) = f;
            for (int c = k + 1; c < n; ++c) lu(r, c) -= f * lu(k, c);
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(k)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= lu(r, c) * b[static_cast<std::size_t>(c)];
        b[static_cast<std::size_t>(r)] = s / lu(r, r);
    }
    return b;
}

}  // namespace emckt
