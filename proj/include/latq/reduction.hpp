#pragma once

// LLL basis reduction with exact integer tracking of the change of basis.
//
// Orientation: the classical algorithm runs on the column-reversed basis
// (QR orientation, b_1 first) and the result is reversed back, so the
// reduced basis has a tame L(i,i) profile in the QL orientation used by the
// nearest-plane and GPTQ solvers.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "matrix.hpp"
#include "rounding.hpp"

namespace latq {

inline constexpr double default_lll_delta = 0.99;

struct ReducedBasis {
    Matrix basis_red;  // basis * u
    IntMatrix u;       // unimodular
    IntMatrix u_inv;   // exact inverse of u
    double delta = default_lll_delta;
    std::size_t swaps = 0;
};

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw IntegerOverflow("integer overflow in basis transform");
    return r;
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw IntegerOverflow("integer overflow in basis transform");
    return r;
}

inline std::int64_t checked_sub(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_sub_overflow(a, b, &r)) throw IntegerOverflow("integer overflow in basis transform");
    return r;
}

inline IntMatrix reverse_both(const IntMatrix& m) {
    const std::size_t n = m.rows();
    IntMatrix r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) r(i, j) = m(n - 1 - i, n - 1 - j);
    return r;
}

class LllState {
public:
    LllState(const Matrix& b0, double delta)
        : b0_(b0), n_(b0.cols()), k_(b0.rows()), delta_(delta),
          u_(IntMatrix::identity(n_)), u_inv_(IntMatrix::identity(n_)),
          b_(n_), bstar_(n_, Vector(k_)), bnorm2_(n_), mu_(n_, Vector(n_, 0.0)) {
        for (std::size_t j = 0; j < n_; ++j) b_[j] = b0_.col(j);
    }

    void run(std::size_t max_swaps) {
        if (n_ < 2) return;
        gso_from(0);
        std::size_t kk = 1;
        while (kk < n_) {
            size_reduce(kk);
            const double m = mu_[kk][kk - 1];
            if (bnorm2_[kk] >= (delta_ - m * m) * bnorm2_[kk - 1]) {
                ++kk;
                continue;
            }
            swap_columns(kk - 1, kk);
            if (++swaps_ > max_swaps) throw Error("lll_reduce: swap limit exceeded");
            gso_from(kk - 1);
            kk = std::max<std::size_t>(kk - 1, 1);
        }
    }

    const IntMatrix& u() const noexcept { return u_; }
    const IntMatrix& u_inv() const noexcept { return u_inv_; }
    std::size_t swaps() const noexcept { return swaps_; }

private:
    // Modified Gram-Schmidt for rows [s, n).
    void gso_from(std::size_t s) {
        for (std::size_t i = s; i < n_; ++i) gso_row(i);
    }

    void gso_row(std::size_t i) {
        Vector& bs = bstar_[i];
        bs = b_[i];
        for (std::size_t j = 0; j < i; ++j) {
            const double m = dot(bs, bstar_[j]) / bnorm2_[j];
            mu_[i][j] = m;
            for (std::size_t r = 0; r < k_; ++r) bs[r] -= m * bstar_[j][r];
        }
        bnorm2_[i] = dot(bs, bs);
    }

    void size_reduce(std::size_t kk) {
        for (int pass = 0; pass < 8; ++pass) {
            bool changed = false;
            for (std::size_t j = kk; j-- > 0;) {
                if (std::abs(mu_[kk][j]) <= 0.5) continue;
                const std::int64_t q = round_half_even(mu_[kk][j]);
                if (q == 0) continue;
                changed = true;
                for (std::size_t r = 0; r < n_; ++r) {
                    u_(r, kk) = checked_sub(u_(r, kk), checked_mul(q, u_(r, j)));
                    u_inv_(j, r) = checked_add(u_inv_(j, r), checked_mul(q, u_inv_(kk, r)));
                }
                const double qd = static_cast<double>(q);
                for (std::size_t l = 0; l < j; ++l) mu_[kk][l] -= qd * mu_[j][l];
                mu_[kk][j] -= qd;
            }
            if (!changed) return;
            // Rebuild b_kk from the exact transform and refresh its coefficients.
            b_[kk] = b0_ * to_real(u_.col(kk));
            gso_row(kk);
        }
    }

    void swap_columns(std::size_t a, std::size_t b) {
        std::swap(b_[a], b_[b]);
        for (std::size_t r = 0; r < n_; ++r) {
            std::swap(u_(r, a), u_(r, b));
            std::swap(u_inv_(a, r), u_inv_(b, r));
        }
    }

    const Matrix& b0_;
    std::size_t n_, k_;
    double delta_;
    IntMatrix u_, u_inv_;
    std::vector<Vector> b_, bstar_;
    Vector bnorm2_;
    std::vector<Vector> mu_;
    std::size_t swaps_ = 0;
};

}  // namespace detail

// delta-LLL reduction. basis_red = basis * u with u unimodular.
inline ReducedBasis lll_reduce(const LatticeBasis& basis, double delta = default_lll_delta,
                               std::size_t max_swaps = 10'000'000) {
    if (!(delta > 0.25 && delta < 1.0))
        throw std::invalid_argument("lll_reduce: delta must lie in (0.25, 1)");
    const Matrix reversed = basis.matrix().reversed_cols();
    detail::LllState state(reversed, delta);
    state.run(max_swaps);

    ReducedBasis out;
    out.u = detail::reverse_both(state.u());
    out.u_inv = detail::reverse_both(state.u_inv());
    out.basis_red = basis.matrix() * to_real(out.u);
    out.delta = delta;
    out.swaps = state.swaps();
    return out;
}

// v = u * v_red, in exact integer arithmetic.
inline IntVector map_solution(const IntMatrix& u, std::span<const std::int64_t> v_red) {
    if (!u.square() || u.cols() != v_red.size())
        throw std::invalid_argument("map_solution: dimension mismatch");
    IntVector v(u.rows(), 0);
    for (std::size_t i = 0; i < u.rows(); ++i)
        for (std::size_t j = 0; j < u.cols(); ++j)
            v[i] = detail::checked_add(v[i], detail::checked_mul(u(i, j), v_red[j]));
    return v;
}

// Real-valued coordinates change: w_red = u_inv * w, so that
// basis_red * w_red = basis * w.
inline Vector map_weights(const IntMatrix& u_inv, std::span<const double> w) {
    return to_real(u_inv) * w;
}

// Exact determinant by fraction-free (Bareiss) elimination. nullopt when an
// intermediate exceeds 128 bits.
inline std::optional<std::int64_t> exact_determinant(const IntMatrix& m) {
    if (!m.square()) throw std::invalid_argument("exact_determinant: matrix is not square");
    const std::size_t n = m.rows();
    if (n == 0) return 1;
    std::vector<std::vector<__int128>> a(n, std::vector<__int128>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) a[i][j] = m(i, j);
    int sign = 1;
    __int128 prev = 1;
    for (std::size_t p = 0; p + 1 < n; ++p) {
        if (a[p][p] == 0) {
            std::size_t s = p + 1;
            while (s < n && a[s][p] == 0) ++s;
            if (s == n) return 0;
            std::swap(a[p], a[s]);
            sign = -sign;
        }
        for (std::size_t i = p + 1; i < n; ++i)
            for (std::size_t j = p + 1; j < n; ++j) {
                __int128 x, y;
                if (__builtin_mul_overflow(a[i][j], a[p][p], &x) ||
                    __builtin_mul_overflow(a[i][p], a[p][j], &y))
                    return std::nullopt;
                __int128 diff;
                if (__builtin_sub_overflow(x, y, &diff)) return std::nullopt;
                a[i][j] = diff / prev;
            }
        prev = a[p][p];
    }
    const __int128 d = sign * a[n - 1][n - 1];
    if (d > INT64_MAX || d < INT64_MIN) return std::nullopt;
    return static_cast<std::int64_t>(d);
}

// Checks size reduction |L(p,q)| <= (1/2 + tol) L(p,p) for q < p and the
// Lovasz condition between neighbours, both read off the QL factors of the
// reduced basis.
inline bool is_lll_reduced(const QLFactors& f, double delta, double tol = 1e-9) {
    const std::size_t n = f.dim();
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t q = 0; q < p; ++q)
            if (std::abs(f.l(p, q)) > (0.5 + tol) * f.l(p, p)) return false;
    for (std::size_t q = 0; q + 1 < n; ++q) {
        const double mu = f.l(q + 1, q) / f.l(q + 1, q + 1);
        const double lhs = f.l(q, q) * f.l(q, q);
        const double rhs = (delta - mu * mu) * f.l(q + 1, q + 1) * f.l(q + 1, q + 1);
        if (lhs < rhs * (1.0 - tol)) return false;
    }
    return true;
}

}  // namespace latq
