#pragma once

// Dense row-major matrix and the small amount of vector arithmetic the
// solvers need. Not a general linear algebra library.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <vector>

namespace latq {

using Vector = std::vector<double>;
using IntVector = std::vector<std::int64_t>;

template <typename T>
class basic_matrix {
public:
    using value_type = T;

    basic_matrix() = default;

    basic_matrix(std::size_t rows, std::size_t cols, T fill = T{})
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    basic_matrix(std::size_t rows, std::size_t cols, std::vector<T> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("matrix: entry count does not match shape");
    }

    basic_matrix(std::initializer_list<std::initializer_list<T>> init) {
        rows_ = init.size();
        cols_ = rows_ ? init.begin()->size() : 0;
        data_.reserve(rows_ * cols_);
        for (const auto& row : init) {
            if (row.size() != cols_)
                throw std::invalid_argument("matrix: ragged initializer");
            data_.insert(data_.end(), row.begin(), row.end());
        }
    }

    static basic_matrix identity(std::size_t n) {
        basic_matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    T& operator()(std::size_t i, std::size_t j) noexcept {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }
    const T& operator()(std::size_t i, std::size_t j) const noexcept {
        assert(i < rows_ && j < cols_);
        return data_[i * cols_ + j];
    }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::vector<T> col(std::size_t j) const {
        std::vector<T> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    void set_col(std::size_t j, std::span<const T> values) {
        assert(values.size() == rows_);
        for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = values[i];
    }

    const std::vector<T>& entries() const noexcept { return data_; }
    std::vector<T>& entries() noexcept { return data_; }

    basic_matrix transpose() const {
        basic_matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    // Columns [first, cols()).
    basic_matrix col_suffix(std::size_t first) const {
        assert(first <= cols_);
        basic_matrix s(rows_, cols_ - first);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = first; j < cols_; ++j) s(i, j - first) = (*this)(i, j);
        return s;
    }

    // Rows and columns [first, n).
    basic_matrix trailing_block(std::size_t first) const {
        assert(first <= rows_ && first <= cols_);
        basic_matrix s(rows_ - first, cols_ - first);
        for (std::size_t i = first; i < rows_; ++i)
            for (std::size_t j = first; j < cols_; ++j) s(i - first, j - first) = (*this)(i, j);
        return s;
    }

    basic_matrix reversed_cols() const {
        basic_matrix r(rows_, cols_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) r(i, cols_ - 1 - j) = (*this)(i, j);
        return r;
    }

    friend bool operator==(const basic_matrix&, const basic_matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<T> data_;
};

using Matrix = basic_matrix<double>;
using IntMatrix = basic_matrix<std::int64_t>;

inline Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: shape mismatch");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = 0; p < a.cols(); ++p) {
            const double aip = a(i, p);
            if (aip == 0.0) continue;
            for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aip * b(p, j);
        }
    return c;
}

inline Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw std::invalid_argument("matrix-vector product: shape mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        const auto r = a.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) s += r[j] * x[j];
        y[i] = s;
    }
    return y;
}

inline Vector operator*(const Matrix& a, const Vector& x) { return a * std::span<const double>(x); }

inline Vector to_real(std::span<const std::int64_t> v) {
    return Vector(v.begin(), v.end());
}

inline Vector operator*(const Matrix& a, const IntVector& v) { return a * to_real(v); }

inline Matrix to_real(const IntMatrix& m) {
    return Matrix(m.rows(), m.cols(), Vector(m.entries().begin(), m.entries().end()));
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline Vector sub(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vector scaled(std::span<const double> a, double s) {
    Vector r(a.begin(), a.end());
    for (auto& x : r) x *= s;
    return r;
}

inline double max_abs(std::span<const double> a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(const Matrix& m) { return max_abs(m.entries()); }

inline bool all_finite(std::span<const double> a) {
    return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

inline bool all_finite(const Matrix& m) { return all_finite(m.entries()); }

}  // namespace latq
