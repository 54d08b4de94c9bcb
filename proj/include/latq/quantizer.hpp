#pragma once

// Data-driven weight quantization in parameter space.
//
// A neuron with weights w and calibration inputs X (one sample per row) is
// quantized to v in Z^n minimising ||Xw - Xv||. The GPTQ update loop, its
// recursive form, the projected recursive nearest-plane form and the plain
// nearest-plane loop all return the same v; each is exposed here so the
// equivalence can be checked directly.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "linalg.hpp"
#include "matrix.hpp"
#include "reduction.hpp"
#include "rounding.hpp"

namespace latq {

enum class Algorithm { gptq, gptq_rec, babai, babai_proj_rec };
enum class Rounding { half_to_even };

inline std::string_view to_string(Algorithm a) {
    switch (a) {
        case Algorithm::gptq: return "gptq";
        case Algorithm::gptq_rec: return "gptq-rec";
        case Algorithm::babai: return "babai";
        case Algorithm::babai_proj_rec: return "babai-proj-rec";
    }
    return "?";
}

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
    if (s == "gptq") return Algorithm::gptq;
    if (s == "gptq-rec" || s == "gptq_rec") return Algorithm::gptq_rec;
    if (s == "babai") return Algorithm::babai;
    if (s == "babai-proj-rec" || s == "babai_proj_rec") return Algorithm::babai_proj_rec;
    return std::nullopt;
}

struct ClampRange {
    std::int64_t lo;
    std::int64_t hi;
};

struct QuantConfig {
    double mu = 0.0;     // regularizer; lambda = mu^2
    double alpha = 1.0;  // alphabet alpha * Z
    Rounding rounding = Rounding::half_to_even;
    double tie_tol = default_tie_tol;
    double rank_tol = default_rank_tol;
    std::optional<ClampRange> clamp;
    std::optional<double> lll_delta;  // reduce the (regularized) basis first
    Algorithm algorithm = Algorithm::gptq;
    bool record_history = false;

    void validate() const {
        if (!(alpha > 0.0)) throw std::invalid_argument("QuantConfig: alpha must be > 0");
        if (!(mu >= 0.0)) throw std::invalid_argument("QuantConfig: mu must be >= 0");
        if (clamp && clamp->lo > clamp->hi)
            throw std::invalid_argument("QuantConfig: clamp lo > hi");
    }
};

struct QuantResult {
    IntVector v;
    Vector values;                  // alpha * v
    double error_l2 = 0.0;          // ||X w - alpha X v|| on the unregularized X
    double error_regularized = 0.0; // same objective on the regularized X
    std::vector<Vector> w_history;  // w^(0) .. w^(n), gptq only, when requested
    Vector step_coeffs;
    std::vector<std::size_t> fragile;
};

// Stack mu * I_n under x.
inline Matrix regularize(const Matrix& x, double mu) {
    if (!(mu > 0.0)) throw std::invalid_argument("regularize: mu must be > 0");
    const std::size_t k = x.rows(), n = x.cols();
    Matrix r(k + n, n);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < n; ++j) r(i, j) = x(i, j);
    for (std::size_t j = 0; j < n; ++j) r(k + j, j) = mu;
    return r;
}

// mu = sqrt(0.01 * mean diag(X^T X)), i.e. 1% damping of the Gram matrix.
inline double auto_mu(const Matrix& x) {
    if (x.cols() == 0) return 1.0;
    double s = 0.0;
    for (double e : x.entries()) s += e * e;
    const double mu = std::sqrt(0.01 * s / static_cast<double>(x.cols()));
    return mu > 0.0 ? mu : 1.0;  // all-zero data: any positive mu gives round(w)
}

namespace detail {

inline QLFactors factor_or_explain(const Matrix& x, double rank_tol) {
    try {
        return ql_decompose(x, rank_tol, true);
    } catch (const RankDeficient& e) {
        throw RankDeficient(e.index(), std::string(e.what()) +
                                           "; calibration matrix is rank deficient, raise mu "
                                           "to regularize");
    }
}

struct SolveTrace {
    IntVector v;
    Vector step_coeffs;
    std::vector<std::size_t> fragile;
    std::vector<Vector> w_history;
};

// The GPTQ loop: round coordinate i, then spread the rounding error over the
// remaining coordinates along column i of L^-1.
inline SolveTrace gptq_loop(const Matrix& l_inv, std::span<const double> w, double tie_tol,
                            bool record_history) {
    const std::size_t n = l_inv.rows();
    if (w.size() != n) throw std::invalid_argument("gptq: weight length mismatch");
    SolveTrace tr;
    tr.v.resize(n);
    tr.step_coeffs.resize(n);
    Vector cur(w.begin(), w.end());
    if (record_history) tr.w_history.push_back(cur);
    for (std::size_t i = 0; i < n; ++i) {
        const double c = cur[i];
        tr.step_coeffs[i] = c;
        if (is_fragile(c, tie_tol)) tr.fragile.push_back(i);
        const std::int64_t vi = round_half_even(c);
        tr.v[i] = vi;
        const double scale = (static_cast<double>(vi) - c) / l_inv(i, i);
        for (std::size_t r = i + 1; r < n; ++r) cur[r] += scale * l_inv(r, i);
        cur[i] = static_cast<double>(vi);
        if (record_history) tr.w_history.push_back(cur);
    }
    return tr;
}

// One level of the recursive forms: re-factor the column suffix, fix the
// first coordinate, move the target weight, recurse on the rest.
inline void recursive_step(const Matrix& x, Vector w, Algorithm variant, double tie_tol,
                           double rank_tol, std::size_t offset, SolveTrace& tr) {
    if (x.cols() == 0) return;
    const QLFactors f = factor_or_explain(x, rank_tol);
    const Matrix& l_inv = *f.l_inv;

    double c;
    if (variant == Algorithm::gptq_rec) {
        c = w[0];
    } else {
        const Vector t = x * w;
        double ip = 0.0;
        for (std::size_t r = 0; r < t.size(); ++r) ip += t[r] * f.q(r, 0);
        c = ip / f.l(0, 0);
    }
    tr.step_coeffs[offset] = c;
    if (is_fragile(c, tie_tol)) tr.fragile.push_back(offset);
    const std::int64_t v1 = round_half_even(c);
    tr.v[offset] = v1;

    const double scale = (static_cast<double>(v1) - w[0]) / l_inv(0, 0);
    Vector next(w.size() - 1);
    for (std::size_t r = 1; r < w.size(); ++r) next[r - 1] = w[r] + scale * l_inv(r, 0);
    recursive_step(x.col_suffix(1), std::move(next), variant, tie_tol, rank_tol, offset + 1, tr);
}

inline SolveTrace recursive_solve(const Matrix& x, std::span<const double> w, Algorithm variant,
                                  double tie_tol, double rank_tol) {
    if (variant != Algorithm::gptq_rec && variant != Algorithm::babai_proj_rec)
        throw std::invalid_argument("recursive_solve: variant must be gptq_rec or babai_proj_rec");
    if (w.size() != x.cols()) throw std::invalid_argument("recursive solve: weight length mismatch");
    SolveTrace tr;
    tr.v.resize(x.cols());
    tr.step_coeffs.resize(x.cols());
    recursive_step(x, Vector(w.begin(), w.end()), variant, tie_tol, rank_tol, 0, tr);
    return tr;
}

}  // namespace detail

// Calibration data prepared once and shared by every row of a weight matrix.
class PreparedLattice {
public:
    PreparedLattice(const Matrix& x, const QuantConfig& cfg) : x_(x), mu_(cfg.mu) {
        cfg.validate();
        if (x.cols() == 0) throw std::invalid_argument("calibration matrix has no columns");
        if (!all_finite(x)) throw std::invalid_argument("calibration matrix has non-finite entries");
        x_reg_ = cfg.mu > 0.0 ? regularize(x, cfg.mu) : x;
        QLFactors f = detail::factor_or_explain(x_reg_, cfg.rank_tol);
        if (cfg.lll_delta) {
            reduction_ = lll_reduce(LatticeBasis(x_reg_, cfg.rank_tol), *cfg.lll_delta);
            f = detail::factor_or_explain(reduction_->basis_red, cfg.rank_tol);
            solver_basis_ = reduction_->basis_red;
        } else {
            solver_basis_ = x_reg_;
        }
        factors_ = std::move(f);
    }

    const Matrix& calibration() const noexcept { return x_; }
    const Matrix& regularized() const noexcept { return x_reg_; }
    // Basis the solvers run on: regularized, and reduced when requested.
    const Matrix& solver_basis() const noexcept { return solver_basis_; }
    const QLFactors& factors() const noexcept { return factors_; }
    const std::optional<ReducedBasis>& reduction() const noexcept { return reduction_; }
    double mu() const noexcept { return mu_; }

private:
    Matrix x_, x_reg_, solver_basis_;
    double mu_;
    QLFactors factors_;
    std::optional<ReducedBasis> reduction_;
};

inline QuantResult quantize(const PreparedLattice& lat, std::span<const double> w,
                            const QuantConfig& cfg) {
    cfg.validate();
    const std::size_t n = lat.calibration().cols();
    if (w.size() != n) throw std::invalid_argument("weight length does not match calibration columns");
    if (!all_finite(w)) throw std::invalid_argument("weights have non-finite entries");

    Vector ws = scaled(w, 1.0 / cfg.alpha);
    if (lat.reduction()) ws = map_weights(lat.reduction()->u_inv, ws);

    detail::SolveTrace tr;
    switch (cfg.algorithm) {
        case Algorithm::gptq:
            tr = detail::gptq_loop(*lat.factors().l_inv, ws, cfg.tie_tol, cfg.record_history);
            break;
        case Algorithm::babai: {
            const Vector t = lat.solver_basis() * ws;
            CvpSolution sol = detail::nearest_plane_loop(lat.solver_basis(), lat.factors(), t, cfg.tie_tol);
            tr.v = std::move(sol.v);
            tr.step_coeffs = std::move(sol.step_coeffs);
            tr.fragile = std::move(sol.fragile);
            break;
        }
        case Algorithm::gptq_rec:
        case Algorithm::babai_proj_rec:
            tr = detail::recursive_solve(lat.solver_basis(), ws, cfg.algorithm, cfg.tie_tol,
                                         cfg.rank_tol);
            break;
    }

    QuantResult res;
    res.v = lat.reduction() ? map_solution(lat.reduction()->u, tr.v) : std::move(tr.v);
    if (cfg.clamp)
        for (auto& x : res.v) x = std::clamp(x, cfg.clamp->lo, cfg.clamp->hi);
    res.values.resize(n);
    Vector diff(n);
    for (std::size_t i = 0; i < n; ++i) {
        res.values[i] = cfg.alpha * static_cast<double>(res.v[i]);
        diff[i] = w[i] - res.values[i];
    }
    res.error_l2 = norm2(lat.calibration() * diff);
    res.error_regularized = norm2(lat.regularized() * diff);
    res.w_history = std::move(tr.w_history);
    res.step_coeffs = std::move(tr.step_coeffs);
    res.fragile = std::move(tr.fragile);
    return res;
}

inline QuantResult quantize(const Matrix& x, std::span<const double> w, const QuantConfig& cfg) {
    return quantize(PreparedLattice(x, cfg), w, cfg);
}

// The GPTQ loop with L^-1 taken from the QL factors of the (regularized) data.
inline QuantResult gptq_quantize(const Matrix& x, std::span<const double> w, QuantConfig cfg) {
    cfg.algorithm = Algorithm::gptq;
    return quantize(x, w, cfg);
}

// Naive recursive forms; each level re-factors the remaining columns.
inline QuantResult gptq_quantize_recursive(const Matrix& x, std::span<const double> w,
                                           QuantConfig cfg, Algorithm variant) {
    if (variant != Algorithm::gptq_rec && variant != Algorithm::babai_proj_rec)
        throw std::invalid_argument("gptq_quantize_recursive: variant must be gptq_rec or babai_proj_rec");
    cfg.algorithm = variant;
    return quantize(x, w, cfg);
}

// Quantize onto alpha * Z with optional post-hoc clamping; cfg.algorithm
// selects the solver.
inline QuantResult scaled_quantize(const Matrix& x, std::span<const double> w,
                                   const QuantConfig& cfg) {
    return quantize(x, w, cfg);
}

struct MatrixQuantResult {
    IntMatrix v;
    Matrix values;
    Vector row_errors;
    Vector row_errors_regularized;
    std::vector<Vector> step_coeffs;
    std::size_t fragile_count = 0;

    double total_error2() const {
        double s = 0.0;
        for (double e : row_errors) s += e * e;
        return s;
    }
    double total_error2_regularized() const {
        double s = 0.0;
        for (double e : row_errors_regularized) s += e * e;
        return s;
    }
};

// Row-separable quantization of a weight matrix (one row per neuron). The
// calibration data is factored once; rows are independent and may be solved
// on several threads without changing the result.
inline MatrixQuantResult quantize_matrix(const Matrix& weights, const PreparedLattice& lat,
                                         const QuantConfig& cfg, unsigned threads = 1) {
    if (weights.cols() != lat.calibration().cols())
        throw std::invalid_argument("weights and calibration data have different column counts");
    const std::size_t m = weights.rows(), n = weights.cols();
    std::vector<QuantResult> rows(m);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) rows[i] = quantize(lat, weights.row(i), cfg);
    };
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(m, 1))));
    if (threads == 1) {
        work(0, m);
    } else {
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        const std::size_t chunk = (m + threads - 1) / threads;
        for (unsigned t = 0; t < threads; ++t) {
            const std::size_t b = std::min(m, t * chunk), e = std::min(m, b + chunk);
            pool.emplace_back([&, b, e, t] {
                try {
                    work(b, e);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    MatrixQuantResult out;
    out.v = IntMatrix(m, n);
    out.values = Matrix(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            out.v(i, j) = rows[i].v[j];
            out.values(i, j) = rows[i].values[j];
        }
        out.row_errors.push_back(rows[i].error_l2);
        out.row_errors_regularized.push_back(rows[i].error_regularized);
        out.fragile_count += rows[i].fragile.size();
        out.step_coeffs.push_back(std::move(rows[i].step_coeffs));
    }
    return out;
}

inline MatrixQuantResult quantize_matrix(const Matrix& weights, const Matrix& x,
                                         const QuantConfig& cfg, unsigned threads = 1) {
    return quantize_matrix(weights, PreparedLattice(x, cfg), cfg, threads);
}

struct CrossLayerResult {
    QuantResult babai;          // nearest plane on the lattice of x_hat, target X w
    IntVector gptq_route_v;     // GPTQ on x_hat with w_hat = x_hat^+ X w
    Vector w_hat;
    double offspan_residual = 0.0;      // ||t - x_hat w_hat||
    double error_vs_projection = 0.0;   // ||x_hat w_hat - x_hat v|| (alpha-scaled)
    bool routes_agree = false;
    std::vector<std::size_t> fragile;   // union of both routes
};

// Minimise ||X w - X_hat v|| when the lattice comes from already-quantized
// upstream layers. With mu > 0 both sides are regularized: the lattice is
// [X_hat; mu I] and the target [X w; mu w].
inline CrossLayerResult cross_layer_target(const Matrix& x, const Matrix& x_hat,
                                           std::span<const double> w, const QuantConfig& cfg) {
    cfg.validate();
    if (x.cols() != x_hat.cols() || x.rows() != x_hat.rows())
        throw std::invalid_argument("cross_layer_target: x and x_hat shapes differ");
    if (w.size() != x.cols()) throw std::invalid_argument("cross_layer_target: weight length mismatch");
    const std::size_t n = x.cols();

    const Vector ws = scaled(w, 1.0 / cfg.alpha);
    const Matrix lattice = cfg.mu > 0.0 ? regularize(x_hat, cfg.mu) : x_hat;
    Vector t = x * ws;
    if (cfg.mu > 0.0)
        for (std::size_t j = 0; j < n; ++j) t.push_back(cfg.mu * ws[j]);

    QLFactors f = detail::factor_or_explain(lattice, cfg.rank_tol);
    // LatticeBasis re-factors; cheap next to the solves and keeps the type's invariant.
    const LatticeBasis basis(lattice, cfg.rank_tol);
    const CvpSolution sol = babai_from_target(basis, t, cfg.tie_tol);

    CrossLayerResult out;
    out.w_hat = least_squares_solve(f, t);
    const detail::SolveTrace g = detail::gptq_loop(*f.l_inv, out.w_hat, cfg.tie_tol, false);
    out.gptq_route_v = g.v;
    out.routes_agree = g.v == sol.v;
    out.offspan_residual = norm2(sub(t, lattice * out.w_hat));

    std::vector<std::size_t> fr = sol.fragile;
    fr.insert(fr.end(), g.fragile.begin(), g.fragile.end());
    std::sort(fr.begin(), fr.end());
    fr.erase(std::unique(fr.begin(), fr.end()), fr.end());
    out.fragile = fr;

    QuantResult& r = out.babai;
    r.v = sol.v;
    if (cfg.clamp)
        for (auto& z : r.v) z = std::clamp(z, cfg.clamp->lo, cfg.clamp->hi);
    r.values = scaled(to_real(r.v), cfg.alpha);
    r.step_coeffs = sol.step_coeffs;
    r.fragile = sol.fragile;
    const Vector xw = x * w;
    const Vector xhv = x_hat * r.values;
    r.error_l2 = norm2(sub(xw, xhv));
    {
        Vector treg = xw;
        Vector lv = lattice * r.values;
        if (cfg.mu > 0.0)
            for (std::size_t j = 0; j < n; ++j) treg.push_back(cfg.mu * w[j]);
        r.error_regularized = norm2(sub(treg, lv));
    }
    const Vector proj = x_hat * scaled(std::span<const double>(out.w_hat).first(n), cfg.alpha);
    out.error_vs_projection = norm2(sub(proj, xhv));
    return out;
}

// Coordinates on which algorithm outputs may be compared. A fragile
// coordinate is skipped; once the outputs differ on a fragile coordinate
// every later coordinate sits on a different branch and is skipped too.
inline std::vector<bool> comparable_mask(const std::vector<IntVector>& outputs,
                                         const std::vector<std::size_t>& fragile, std::size_t n) {
    std::vector<bool> fragile_at(n, false);
    for (auto i : fragile)
        if (i < n) fragile_at[i] = true;
    std::vector<bool> mask(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        if (!fragile_at[i]) continue;
        mask[i] = false;
        bool same = true;
        for (const auto& o : outputs) same = same && o[i] == outputs.front()[i];
        if (!same) {
            std::fill(mask.begin() + static_cast<std::ptrdiff_t>(i), mask.end(), false);
            break;
        }
    }
    return mask;
}

}  // namespace latq
