#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace emckt {

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

/// Row-compressed sparse matrix. Column indices within a row are sorted and
/// unique; duplicate triplets are summed during construction.
class SparseMatrix {
public:
    SparseMatrix() = default;

    static SparseMatrix from_triplets(int rows, int cols, std::vector<Triplet> entries);
    static SparseMatrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t nonzeros() const { return values_.size(); }

    /// y = A x. Fixed accumulation order, deterministic.
    void multiply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> multiply(std::span<const double> x) const;

    /// y += alpha * A^T x (no transpose storage kept).
    void multiply_transpose_add(std::span<const double> x, std::span<double> y,
                                double alpha = 1.0) const;

    std::vector<double> diagonal() const;

    const std::vector<int>& row_offsets() const { return row_offsets_; }
    const std::vector<int>& col_indices() const { return col_indices_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& values() { return values_; }

    /// Index into values() for entry (row, col); -1 if not present in the pattern.
    int find(int row, int col) const;

    /// Largest |a_ij|; 0 for an empty matrix.
    double max_abs() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<int> row_offsets_;
    std::vector<int> col_indices_;
    std::vector<double> values_;
};

/// C = A * B (both CSR). Used for incidence products in tests and setup paths.
SparseMatrix sparse_multiply(const SparseMatrix& a, const SparseMatrix& b);

/// C = A^T (explicit transpose).
SparseMatrix sparse_transpose(const SparseMatrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

}  // namespace emckt
