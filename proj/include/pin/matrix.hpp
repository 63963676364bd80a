#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "pin/error.hpp"

namespace pin {

/// Dense row-major matrix of 64-bit floats. The only matrix the library needs:
/// embedding tables, interaction-network weights and token banks all live here.
class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), entries_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return entries_.size(); }

    double& at(std::size_t r, std::size_t c) { return entries_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return entries_[r * cols_ + c]; }

    double* row_ptr(std::size_t r) { return entries_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return entries_.data() + r * cols_; }

    std::span<double> row(std::size_t r) { return {row_ptr(r), cols_}; }
    std::span<const double> row(std::size_t r) const { return {row_ptr(r), cols_}; }

    double* data() { return entries_.data(); }
    const double* data() const { return entries_.data(); }

    std::vector<double>& entries() { return entries_; }
    const std::vector<double>& entries() const { return entries_; }

    void set_zero() { entries_.assign(entries_.size(), 0.0); }

    bool all_finite() const {
        for (double v : entries_)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> entries_;
};

/// y = A x + b where A is rows x cols, x has cols entries, b and y have rows.
inline void affine(const DenseMatrix& a, const double* x, const double* b, double* y) {
    const std::size_t r = a.rows(), c = a.cols();
    for (std::size_t i = 0; i < r; ++i) {
        const double* ai = a.row_ptr(i);
        double acc = b ? b[i] : 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += ai[j] * x[j];
        y[i] = acc;
    }
}

/// y += A^T g (gradient push-back through an affine layer).
inline void add_At_times(const DenseMatrix& a, const double* g, double* y) {
    const std::size_t r = a.rows(), c = a.cols();
    for (std::size_t i = 0; i < r; ++i) {
        const double* ai = a.row_ptr(i);
        const double gi = g[i];
        if (gi == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j) y[j] += ai[j] * gi;
    }
}

/// grad_A += g x^T (outer-product accumulation).
inline void add_outer(DenseMatrix& grad_a, const double* g, const double* x) {
    const std::size_t r = grad_a.rows(), c = grad_a.cols();
    for (std::size_t i = 0; i < r; ++i) {
        double* gi = grad_a.row_ptr(i);
        const double s = g[i];
        if (s == 0.0) continue;
        for (std::size_t j = 0; j < c; ++j) gi[j] += s * x[j];
    }
}

/// y (+)= A[:, col0 : col0+width] x, the column-block partial product.
inline void affine_block(const DenseMatrix& a, std::size_t col0, std::size_t width, const double* x,
                         double* y, bool accumulate) {
    const std::size_t r = a.rows();
    for (std::size_t i = 0; i < r; ++i) {
        const double* ai = a.row_ptr(i) + col0;
        double acc = accumulate ? y[i] : 0.0;
        for (std::size_t j = 0; j < width; ++j) acc += ai[j] * x[j];
        y[i] = acc;
    }
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

} // namespace pin
