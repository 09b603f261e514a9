#include "emckt/gmres.hpp"

#include <cmath>
#include <cstddef>

#include "emckt/errors.hpp"

namespace emckt {

namespace {

// Solves the upper-triangular least-squares block accumulated by the Givens
// sweep and adds the correction to x through the preconditioner.
void form_update(int k, int restart, const std::vector<double>& h, const std::vector<double>& g,
                 const std::vector<std::vector<double>>& basis,
                 const std::vector<double>& inv_diag, std::span<double> x) {
    std::vector<double> y(static_cast<std::size_t>(k));
    for (int i = k - 1; i >= 0; --i) {
        double s = g[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j)
            s -= h[static_cast<std::size_t>(i) * (restart + 1) + j] * y[static_cast<std::size_t>(j)];
        y[static_cast<std::size_t>(i)] = s / h[static_cast<std::size_t>(i) * (restart + 1) + i];
    }
    const std::size_t n = x.size();
    for (std::size_t row = 0; row < n; ++row) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += basis[static_cast<std::size_t>(j)][row] * y[static_cast<std::size_t>(j)];
        if (!inv_diag.empty()) s *= inv_diag[row];
        x[row] += s;
    }
}

}  // namespace

GmresResult gmres_solve(const SparseMatrix& a, std::span<const double> b,
                        const GmresConfig& config, std::span<const double> x0) {
    if (a.rows() != a.cols()) throw InvalidArgument("gmres: matrix must be square");
    if (static_cast<int>(b.size()) != a.rows()) throw InvalidArgument("gmres: rhs length mismatch");
    if (!(config.tol > 0.0 && config.tol < 1.0)) throw InvalidArgument("gmres: tol must be in (0,1)");
    if (config.restart < 1) throw InvalidArgument("gmres: restart must be >= 1");

    const std::size_t n = b.size();
    GmresResult result;
    result.x.assign(n, 0.0);
    if (!x0.empty()) {
        if (x0.size() != n) throw InvalidArgument("gmres: x0 length mismatch");
        for (std::size_t i = 0; i < n; ++i) result.x[i] = x0[i];
    }

    const double bnorm = norm2(b);
    if (bnorm == 0.0) {
        result.x.assign(n, 0.0);
        result.converged = true;
        return result;
    }

    std::vector<double> inv_diag;
    if (config.jacobi) {
        inv_diag = a.diagonal();
        for (double& d : inv_diag) d = (d != 0.0) ? 1.0 / d : 1.0;
    }

    const int m = config.restart;
    std::vector<std::vector<double>> basis(static_cast<std::size_t>(m) + 1,
                                           std::vector<double>(n, 0.0));
    std::vector<double> h(static_cast<std::size_t>(m) * (m + 1), 0.0);
    std::vector<double> g(static_cast<std::size_t>(m) + 1, 0.0);
    std::vector<double> cs(static_cast<std::size_t>(m), 0.0);
    std::vector<double> sn(static_cast<std::size_t>(m), 0.0);
    std::vector<double> w(n, 0.0);

    double res = 0.0;
    while (result.iterations < config.max_iterations) {
        // r = b - A x
        a.multiply(result.x, basis[0]);
        for (std::size_t i = 0; i < n; ++i) basis[0][i] = b[i] - basis[0][i];
        const double beta = norm2(basis[0]);
        res = beta / bnorm;
        result.residual = res;
        if (res <= config.tol) {
            result.converged = true;
            return result;
        }
        for (std::size_t i = 0; i < n; ++i) basis[0][i] /= beta;
        std::fill(g.begin(), g.end(), 0.0);
        g[0] = beta;

        int k = 0;
        while (k < m && result.iterations < config.max_iterations) {
            // w = A M^{-1} v_k
            if (!inv_diag.empty()) {
                for (std::size_t i = 0; i < n; ++i) w[i] = basis[static_cast<std::size_t>(k)][i] * inv_diag[i];
                a.multiply(w, basis[static_cast<std::size_t>(k) + 1]);
            } else {
                a.multiply(basis[static_cast<std::size_t>(k)], basis[static_cast<std::size_t>(k) + 1]);
            }
            ++result.iterations;

            auto& vnew = basis[static_cast<std::size_t>(k) + 1];
            for (int i = 0; i <= k; ++i) {
                const double hij = dot(vnew, basis[static_cast<std::size_t>(i)]);
                h[static_cast<std::size_t>(i) * (m + 1) + k] = hij;
                axpy(-hij, basis[static_cast<std::size_t>(i)], vnew);
            }
            double hh = norm2(vnew);
            const bool breakdown = hh <= 1e-300;
            if (!breakdown)
                for (std::size_t i = 0; i < n; ++i) vnew[i] /= hh;

            // apply previous rotations to the new column
            for (int i = 0; i < k; ++i) {
                const double t1 = h[static_cast<std::size_t>(i) * (m + 1) + k];
                const double t2 = h[static_cast<std::size_t>(i + 1) * (m + 1) + k];
                h[static_cast<std::size_t>(i) * (m + 1) + k] = cs[static_cast<std::size_t>(i)] * t1 + sn[static_cast<std::size_t>(i)] * t2;
                h[static_cast<std::size_t>(i + 1) * (m + 1) + k] = -sn[static_cast<std::size_t>(i)] * t1 + cs[static_cast<std::size_t>(i)] * t2;
            }
            const double rr = h[static_cast<std::size_t>(k) * (m + 1) + k];
            const double denom = std::sqrt(rr * rr + hh * hh);
            cs[static_cast<std::size_t>(k)] = rr / denom;
            sn[static_cast<std::size_t>(k)] = hh / denom;
            h[static_cast<std::size_t>(k) * (m + 1) + k] = denom;
            const double g0 = g[static_cast<std::size_t>(k)];
            g[static_cast<std::size_t>(k)] = cs[static_cast<std::size_t>(k)] * g0;
            g[static_cast<std::size_t>(k) + 1] = -sn[static_cast<std::size_t>(k)] * g0;
            ++k;

            res = std::abs(g[static_cast<std::size_t>(k)]) / bnorm;
            if (res <= config.tol || breakdown) break;
        }

        form_update(k, m, h, g, basis, inv_diag, result.x);
        result.residual = res;
        if (res <= config.tol) {
            // recompute the true residual once; the recurrence can drift
            a.multiply(result.x, w);
            for (std::size_t i = 0; i < n; ++i) w[i] = b[i] - w[i];
            result.residual = norm2(w) / bnorm;
            if (result.residual <= config.tol * 4.0) {
                result.converged = true;
                return result;
            }
        }
    }

    if (config.throw_on_failure)
        throw SolverFailure("gmres: no convergence within max iterations", result.residual);
    return result;
}

}  // namespace emckt
