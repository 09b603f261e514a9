#pragma once

#include <vector>

namespace emckt {

/// Small row-major dense matrix with partial-pivot LU. Used for the circuit
/// Jacobian (tens of unknowns) and for brute-force reference solves.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(int rows, int cols) : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

    std::vector<double> multiply(const std::vector<double>& x) const;

private:
    int rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

/// Solves A x = b by LU with partial pivoting; throws SolverFailure on a
/// numerically singular matrix. A is copied, not modified.
std::vector<double> dense_solve(const DenseMatrix& a, std::vector<double> b);

}  // namespace emckt
