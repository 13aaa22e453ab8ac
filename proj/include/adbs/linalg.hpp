#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "adbs/error.hpp"

namespace adbs {

using Vector = std::vector<double>;

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: size mismatch " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline bool all_finite(std::span<const double> a) {
    for (double x : a) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

// Dense column-major matrix. Columns are the unit of storage because the
// classifier appends one column per class and reads them as prototypes.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n, double scale = 1.0) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = scale;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[c * rows_ + r]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[c * rows_ + r]; }

    std::span<double> col(std::size_t c) { return {data_.data() + c * rows_, rows_}; }
    std::span<const double> col(std::size_t c) const { return {data_.data() + c * rows_, rows_}; }

    void append_col(std::span<const double> v) {
        if (cols_ == 0 && rows_ == 0) rows_ = v.size();
        if (v.size() != rows_) {
            throw ShapeError("append_col: expected " + std::to_string(rows_) + " rows, got " +
                             std::to_string(v.size()));
        }
        data_.insert(data_.end(), v.begin(), v.end());
        ++cols_;
    }

    // y = A x
    Vector multiply(std::span<const double> x) const {
        if (x.size() != cols_) {
            throw ShapeError("multiply: expected input of size " + std::to_string(cols_) +
                             ", got " + std::to_string(x.size()));
        }
        Vector y(rows_, 0.0);
        for (std::size_t c = 0; c < cols_; ++c) {
            const double xc = x[c];
            const double* column = data_.data() + c * rows_;
            for (std::size_t r = 0; r < rows_; ++r) y[r] += column[r] * xc;
        }
        return y;
    }

    std::span<const double> raw() const noexcept { return data_; }
    std::span<double> raw() noexcept { return data_; }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace adbs
