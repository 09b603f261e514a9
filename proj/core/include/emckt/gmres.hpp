#pragma once

#include <span>
#include <vector>

#include "emckt/sparse.hpp"

namespace emckt {

struct GmresConfig {
    double tol = 1e-12;      ///< relative residual target, ||Ax-b|| <= tol*||b||
    int restart = 60;
    int max_iterations = 20000;
    bool jacobi = true;      ///< diagonal (Jacobi) right preconditioning
    bool throw_on_failure = true;
};

struct GmresResult {
    std::vector<double> x;
    int iterations = 0;      ///< Arnoldi steps taken (matrix-vector products)
    double residual = 0.0;   ///< achieved relative residual
    bool converged = false;
};

/// Restarted GMRES with Givens rotations. Deterministic: fixed accumulation
/// order, no data races. Residual is non-increasing across restarts.
GmresResult gmres_solve(const SparseMatrix& a, std::span<const double> b,
                        const GmresConfig& config = {},
                        std::span<const double> x0 = {});

}  // namespace emckt
