#pragma once

// Factorization kernels: QL decomposition (via Householder QR on the
// column-reversed matrix), lower-triangular inversion, Cholesky and
// least squares.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "matrix.hpp"

namespace latq {

inline constexpr double default_rank_tol = 1e-10;

// X = Q L with Q (k x n) having orthonormal columns and L (n x n) lower
// triangular with a strictly positive diagonal.
struct QLFactors {
    Matrix q;
    Matrix l;
    std::optional<Matrix> l_inv;

    std::size_t dim() const noexcept { return l.rows(); }

    Vector diag() const {
        Vector d(l.rows());
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = l(i, i);
        return d;
    }
};

namespace detail {

// Householder QR of a (k x n, k >= n). Returns thin Q and square R; R's
// diagonal carries whatever sign the reflections produce.
inline void householder_qr(const Matrix& a, Matrix& q, Matrix& r) {
    const std::size_t k = a.rows(), n = a.cols();
    Matrix work = a;
    std::vector<Vector> reflectors(n);

    for (std::size_t p = 0; p < n; ++p) {
        double norm_x = 0.0;
        for (std::size_t i = p; i < k; ++i) norm_x += work(i, p) * work(i, p);
        norm_x = std::sqrt(norm_x);
        Vector v(k - p, 0.0);
        if (norm_x == 0.0) continue;  // zero column: leave R(p,p) = 0, rank check reports it

        const double x0 = work(p, p);
        const double alpha = x0 >= 0.0 ? -norm_x : norm_x;
        for (std::size_t i = p; i < k; ++i) v[i - p] = work(i, p);
        v[0] -= alpha;
        const double vnorm = norm2(v);
        if (vnorm == 0.0) continue;
        for (auto& x : v) x /= vnorm;

        for (std::size_t j = p; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = p; i < k; ++i) s += v[i - p] * work(i, j);
            s *= 2.0;
            for (std::size_t i = p; i < k; ++i) work(i, j) -= s * v[i - p];
        }
        reflectors[p] = std::move(v);
    }

    r = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) r(i, j) = work(i, j);

    // Q = H_0 ... H_{n-1} applied to the first n columns of I_k.
    q = Matrix(k, n);
    for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
    for (std::size_t pp = n; pp-- > 0;) {
        const Vector& v = reflectors[pp];
        if (v.empty()) continue;
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = pp; i < k; ++i) s += v[i - pp] * q(i, j);
            s *= 2.0;
            for (std::size_t i = pp; i < k; ++i) q(i, j) -= s * v[i - pp];
        }
    }
}

inline void forward_substitute(const Matrix& l, std::span<double> b) {
    for (std::size_t i = 0; i < l.rows(); ++i) {
        double s = b[i];
        for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * b[j];
        b[i] = s / l(i, i);
    }
}

}  // namespace detail

// Invert a lower-triangular matrix by forward substitution on each column of I.
inline Matrix invert_lower_triangular(const Matrix& l) {
    if (!l.square()) throw std::invalid_argument("invert_lower_triangular: matrix is not square");
    const std::size_t n = l.rows();
    const double scale = max_abs(l);
    const double threshold = std::numeric_limits<double>::epsilon() * static_cast<double>(n) * scale;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j)
            if (l(i, j) != 0.0)
                throw std::invalid_argument("invert_lower_triangular: matrix is not lower triangular");
        if (!(std::abs(l(i, i)) > threshold)) throw SingularDiagonal(i);
    }

    Matrix inv(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        inv(c, c) = 1.0 / l(c, c);
        for (std::size_t i = c + 1; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = c; j < i; ++j) s += l(i, j) * inv(j, c);
            inv(i, c) = -s / l(i, i);
        }
    }
    return inv;
}

// QL decomposition of a k x n matrix with k >= n.
//
// Computed as Householder QR of the column-reversed matrix, reversed back,
// with column signs of Q (and rows of L) flipped so diag(L) > 0. Throws
// RankDeficient when some L(i,i) <= rank_tol * max_j L(j,j).
inline QLFactors ql_decompose(const Matrix& x, double rank_tol = default_rank_tol,
                              bool with_inverse = false) {
    const std::size_t k = x.rows(), n = x.cols();
    if (n == 0) throw std::invalid_argument("ql_decompose: matrix has no columns");
    if (k < n)
        throw RankDeficient(k, "ql_decompose: " + std::to_string(k) + " rows < " +
                                   std::to_string(n) +
                                   " columns; the basis cannot have full column rank "
                                   "(apply regularization, mu > 0)");

    Matrix qr_q, qr_r;
    detail::householder_qr(x.reversed_cols(), qr_q, qr_r);

    QLFactors f;
    f.q = qr_q.reversed_cols();
    f.l = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j <= i; ++j) f.l(i, j) = qr_r(n - 1 - i, n - 1 - j);

    for (std::size_t i = 0; i < n; ++i) {
        if (f.l(i, i) < 0.0) {
            for (std::size_t r = 0; r < k; ++r) f.q(r, i) = -f.q(r, i);
            for (std::size_t j = 0; j <= i; ++j) f.l(i, j) = -f.l(i, j);
        }
    }

    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i) dmax = std::max(dmax, f.l(i, i));
    for (std::size_t i = 0; i < n; ++i) {
        if (!(f.l(i, i) > rank_tol * dmax) || dmax == 0.0)
            throw RankDeficient(i, "ql_decompose: column " + std::to_string(i) +
                                       " is numerically dependent on later columns "
                                       "(apply regularization, mu > 0)");
    }

    if (with_inverse) f.l_inv = invert_lower_triangular(f.l);
    return f;
}

inline const Matrix& ensure_inverse(QLFactors& f) {
    if (!f.l_inv) f.l_inv = invert_lower_triangular(f.l);
    return *f.l_inv;
}

// max L(i,i) / min L(i,i): a cheap lower bound on the 2-norm condition number.
inline double diagonal_condition(const QLFactors& f) {
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < f.dim(); ++i) {
        lo = std::min(lo, f.l(i, i));
        hi = std::max(hi, f.l(i, i));
    }
    return hi / lo;
}

// Lower Cholesky factor of a symmetric positive definite matrix.
//
// Only used to cross-check the QL route; the solvers never form X^T X.
inline Matrix cholesky_spd(const Matrix& a, double sym_tol = 1e-12) {
    if (!a.square()) throw std::invalid_argument("cholesky_spd: matrix is not square");
    const std::size_t n = a.rows();
    const double scale = max_abs(a);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(a(i, j) - a(j, i)) > sym_tol * scale)
                throw std::invalid_argument("cholesky_spd: matrix is not symmetric");

    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j);
        for (std::size_t p = 0; p < j; ++p) d -= l(j, p) * l(j, p);
        if (!(d > 0.0)) throw NotPositiveDefinite(j);
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t p = 0; p < j; ++p) s -= l(i, p) * l(j, p);
            l(i, j) = s / l(j, j);
        }
    }
    return l;
}

// Solve L y = Q^T b for a matrix already factored as Q L.
inline Vector least_squares_solve(const QLFactors& f, std::span<const double> b) {
    if (b.size() != f.q.rows())
        throw std::invalid_argument("least_squares_solve: right-hand side length mismatch");
    const std::size_t n = f.dim();
    Vector y(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) s += f.q(i, j) * b[i];
        y[j] = s;
    }
    detail::forward_substitute(f.l, y);
    return y;
}

// argmin_x ||a x - b||_2 for a of full column rank.
inline Vector least_squares_solve(const Matrix& a, std::span<const double> b,
                                  double rank_tol = default_rank_tol) {
    return least_squares_solve(ql_decompose(a, rank_tol), b);
}

}  // namespace latq
