#pragma once

// Closest-vector solvers on the lattice spanned by the columns of a basis
// matrix: Babai's nearest-plane algorithm in QL orientation, an exhaustive
// enumeration oracle for small dimensions, and the nearest-plane error bounds.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "errors.hpp"
#include "linalg.hpp"
#include "matrix.hpp"
#include "rounding.hpp"

namespace latq {

// Full-column-rank basis together with its QL factors. Immutable.
class LatticeBasis {
public:
    explicit LatticeBasis(Matrix basis, double rank_tol = default_rank_tol)
        : basis_(std::move(basis)), factors_(ql_decompose(basis_, rank_tol)) {}

    const Matrix& matrix() const noexcept { return basis_; }
    const QLFactors& factors() const noexcept { return factors_; }
    std::size_t dim() const noexcept { return basis_.cols(); }
    std::size_t ambient_dim() const noexcept { return basis_.rows(); }

private:
    Matrix basis_;
    QLFactors factors_;
};

struct CvpSolution {
    IntVector v;
    Vector residual;               // t - B v
    double error_l2 = 0.0;         // ||residual||
    Vector step_coeffs;            // pre-rounding value at each step
    std::vector<std::size_t> fragile;

    // Set by the enumeration oracle only.
    bool boundary_hit = false;
    bool certified = false;
    int radius = 0;
};

namespace detail {

inline CvpSolution finish_solution(const Matrix& basis, std::span<const double> t, CvpSolution s) {
    s.residual = sub(t, basis * s.v);
    s.error_l2 = norm2(s.residual);
    return s;
}

// t^(0) = t; v_i = round(<t^(i-1), Q_i> / L_ii); t^(i) = t^(i-1) - v_i X_i.
inline CvpSolution nearest_plane_loop(const Matrix& x, const QLFactors& f,
                                      std::span<const double> t, double tie_tol) {
    const std::size_t n = x.cols(), k = x.rows();
    CvpSolution s;
    s.v.resize(n);
    s.step_coeffs.resize(n);
    Vector cur(t.begin(), t.end());
    for (std::size_t i = 0; i < n; ++i) {
        double ip = 0.0;
        for (std::size_t r = 0; r < k; ++r) ip += cur[r] * f.q(r, i);
        const double coeff = ip / f.l(i, i);
        s.step_coeffs[i] = coeff;
        if (is_fragile(coeff, tie_tol)) s.fragile.push_back(i);
        const std::int64_t vi = round_half_even(coeff);
        s.v[i] = vi;
        if (vi != 0)
            for (std::size_t r = 0; r < k; ++r) cur[r] -= static_cast<double>(vi) * x(r, i);
    }
    return s;
}

}  // namespace detail

// Nearest plane starting from an arbitrary target t in the ambient space.
// t may have a component outside the span of the basis; only its inner
// products with the columns of Q are ever used.
inline CvpSolution babai_from_target(const LatticeBasis& basis, std::span<const double> t,
                                     double tie_tol = default_tie_tol) {
    if (t.size() != basis.ambient_dim()) throw std::invalid_argument("babai: target length mismatch");
    return detail::finish_solution(basis.matrix(), t,
                                   detail::nearest_plane_loop(basis.matrix(), basis.factors(), t, tie_tol));
}

inline CvpSolution babai_nearest_plane(const LatticeBasis& basis, std::span<const double> w,
                                       double tie_tol = default_tie_tol) {
    if (w.size() != basis.dim()) throw std::invalid_argument("babai: weight length mismatch");
    const Vector t = basis.matrix() * w;
    return babai_from_target(basis, t, tie_tol);
}

inline constexpr std::size_t max_enumeration_dim = 8;

// Exhaustive search over the box round(x*) +- radius, x* the real
// least-squares coefficients of t. Lexicographically smallest v wins ties.
inline CvpSolution brute_force_cvp(const LatticeBasis& basis, std::span<const double> t,
                                   int radius = 2) {
    const std::size_t n = basis.dim(), k = basis.ambient_dim();
    if (n > max_enumeration_dim) throw DimensionTooLarge(n, max_enumeration_dim);
    if (radius < 1) throw std::invalid_argument("brute_force_cvp: radius must be >= 1");
    if (t.size() != k) throw std::invalid_argument("brute_force_cvp: target length mismatch");

    const Matrix& x = basis.matrix();
    const Vector centre_real = least_squares_solve(basis.factors(), t);
    IntVector centre(n);
    for (std::size_t i = 0; i < n; ++i) centre[i] = round_half_even(centre_real[i]);

    std::vector<Vector> cols(n);
    for (std::size_t j = 0; j < n; ++j) cols[j] = x.col(j);

    // partial[d] = t - sum_{i<d} v_i X_i, recomputed from its parent only.
    std::vector<Vector> partial(n + 1, Vector(k));
    partial[0].assign(t.begin(), t.end());
    IntVector v(n), best;
    double best_err2 = std::numeric_limits<double>::infinity();

    auto recurse = [&](auto&& self, std::size_t d) -> void {
        if (d == n) {
            const double e2 = dot(partial[n], partial[n]);
            if (e2 < best_err2) {
                best_err2 = e2;
                best = v;
            }
            return;
        }
        for (std::int64_t z = centre[d] - radius; z <= centre[d] + radius; ++z) {
            v[d] = z;
            const double zr = static_cast<double>(z);
            for (std::size_t r = 0; r < k; ++r) partial[d + 1][r] = partial[d][r] - zr * cols[d][r];
            self(self, d + 1);
        }
    };
    recurse(recurse, 0);

    CvpSolution s;
    s.v = best;
    s.radius = radius;
    for (std::size_t i = 0; i < n; ++i)
        if (best[i] == centre[i] - radius || best[i] == centre[i] + radius) s.boundary_hit = true;
    return detail::finish_solution(x, t, std::move(s));
}

// Smallest box radius around round(x*) that provably contains every lattice
// point within distance `err` of t. From ||B(v - x*)|| <= ||Bv - t||:
// |v_i - x*_i| <= ||row_i(L^-1)|| * err.
inline int certified_radius(const LatticeBasis& basis, double err) {
    const Matrix linv = invert_lower_triangular(basis.factors().l);
    double worst = 0.0;
    for (std::size_t i = 0; i < linv.rows(); ++i) worst = std::max(worst, norm2(linv.row(i)));
    const double r = std::floor(worst * err * (1.0 + 1e-12) + 0.5) + 1.0;
    return static_cast<int>(std::min(r, 1e6));
}

// Enumeration with automatic widening: retries at radius + 2 while the
// minimizer touches the box boundary or the box is smaller than the
// certified radius for the incumbent error. Gives up at max_radius.
inline CvpSolution exact_cvp(const LatticeBasis& basis, std::span<const double> t, int radius = 2,
                             int max_radius = 16) {
    for (;;) {
        CvpSolution s = brute_force_cvp(basis, t, radius);
        const int needed = certified_radius(basis, s.error_l2);
        s.certified = !s.boundary_hit && radius >= needed;
        if (s.certified || radius >= max_radius) return s;
        radius = std::min(max_radius, std::max(radius + 2, needed));
    }
}

struct AbsoluteBound {
    double full_step_bound;  // sqrt(sum_i L_ii^2)
    double half_step_bound;  // sqrt(sum_i L_ii^2 / 4)
};

inline AbsoluteBound absolute_error_bound(const QLFactors& f) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.dim(); ++i) s += f.l(i, i) * f.l(i, i);
    return {std::sqrt(s), std::sqrt(0.25 * s)};
}

struct RelativeFactor {
    double gamma;        // sqrt(1 + max_i L_ii^-2 sum_{j>=i} L_jj^2)
    double gamma_loose;  // sqrt(n-1) * max_{i<=j} L_jj / L_ii
};

inline RelativeFactor relative_error_factor(const QLFactors& f) {
    const std::size_t n = f.dim();
    double worst = 0.0, tail = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double d = f.l(i, i);
        tail += d * d;
        worst = std::max(worst, tail / (d * d));
    }
    double ratio = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) ratio = std::max(ratio, f.l(j, j) / f.l(i, i));
    return {std::sqrt(1.0 + worst), std::sqrt(static_cast<double>(n) - 1.0) * ratio};
}

}  // namespace latq
