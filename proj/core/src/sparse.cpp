#include "emckt/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "emckt/errors.hpp"

namespace emckt {

SparseMatrix SparseMatrix::from_triplets(int rows, int cols, std::vector<Triplet> entries) {
    if (rows < 0 || cols < 0) throw InvalidArgument("sparse: negative dimension");
    for (const Triplet& t : entries) {
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols)
            throw InvalidArgument("sparse: triplet index out of range");
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });

    SparseMatrix m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.row_offsets_.assign(static_cast<std::size_t>(rows) + 1, 0);
    m.col_indices_.reserve(entries.size());
    m.values_.reserve(entries.size());

    std::size_t i = 0;
    for (int r = 0; r < rows; ++r) {
        while (i < entries.size() && entries[i].row == r) {
            int c = entries[i].col;
            double v = 0.0;
            while (i < entries.size() && entries[i].row == r && entries[i].col == c) {
                v += entries[i].value;
                ++i;
            }
            m.col_indices_.push_back(c);
            m.values_.push_back(v);
        }
        m.row_offsets_[static_cast<std::size_t>(r) + 1] = static_cast<int>(m.col_indices_.size());
    }
    return m;
}

SparseMatrix SparseMatrix::identity(int n) {
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, n, std::move(t));
}

void SparseMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    if (static_cast<int>(x.size()) != cols_ || static_cast<int>(y.size()) != rows_)
        throw InvalidArgument("spmv: dimension mismatch");
    for (int r = 0; r < rows_; ++r) {
        double acc = 0.0;
        for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
            acc += values_[k] * x[static_cast<std::size_t>(col_indices_[k])];
        y[static_cast<std::size_t>(r)] = acc;
    }
}

std::vector<double> SparseMatrix::multiply(std::span<const double> x) const {
    std::vector<double> y(static_cast<std::size_t>(rows_));
    multiply(x, y);
    return y;
}

void SparseMatrix::multiply_transpose_add(std::span<const double> x, std::span<double> y,
                                          double alpha) const {
    if (static_cast<int>(x.size()) != rows_ || static_cast<int>(y.size()) != cols_)
        throw InvalidArgument("spmv^T: dimension mismatch");
    for (int r = 0; r < rows_; ++r) {
        const double xr = alpha * x[static_cast<std::size_t>(r)];
        if (xr == 0.0) continue;
        for (int k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
            y[static_cast<std::size_t>(col_indices_[k])] += values_[k] * xr;
    }
}

std::vector<double> SparseMatrix::diagonal() const {
    std::vector<double> d(static_cast<std::size_t>(std::min(rows_, cols_)), 0.0);
    for (int r = 0; r < static_cast<int>(d.size()); ++r) {
        int k = find(r, r);
        if (k >= 0) d[static_cast<std::size_t>(r)] = values_[static_cast<std::size_t>(k)];
    }
    return d;
}

int SparseMatrix::find(int row, int col) const {
    if (row < 0 || row >= rows_) return -1;
    const int lo = row_offsets_[row], hi = row_offsets_[row + 1];
    auto begin = col_indices_.begin() + lo;
    auto end = col_indices_.begin() + hi;
    auto it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) return -1;
    return lo + static_cast<int>(it - begin);
}

double SparseMatrix::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

SparseMatrix sparse_multiply(const SparseMatrix& a, const SparseMatrix& b) {
    if (a.cols() != b.rows()) throw InvalidArgument("sparse_multiply: dimension mismatch");
    std::vector<Triplet> out;
    const auto& aoff = a.row_offsets();
    const auto& acol = a.col_indices();
    const auto& aval = a.values();
    const auto& boff = b.row_offsets();
    const auto& bcol = b.col_indices();
    const auto& bval = b.values();
    for (int r = 0; r < a.rows(); ++r) {
        for (int ka = aoff[r]; ka < aoff[r + 1]; ++ka) {
            const int m = acol[ka];
            const double av = aval[ka];
            for (int kb = boff[m]; kb < boff[m + 1]; ++kb)
                out.push_back({r, bcol[kb], av * bval[kb]});
        }
    }
    return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(out));
}

SparseMatrix sparse_transpose(const SparseMatrix& a) {
    std::vector<Triplet> out;
    out.reserve(a.nonzeros());
    const auto& off = a.row_offsets();
    const auto& col = a.col_indices();
    const auto& val = a.values();
    for (int r = 0; r < a.rows(); ++r)
        for (int k = off[r]; k < off[r + 1]; ++k) out.push_back({col[k], r, val[k]});
    return SparseMatrix::from_triplets(a.cols(), a.rows(), std::move(out));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

}  // namespace emckt
