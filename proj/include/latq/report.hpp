#pragma once

// JSON run report shared by the command-line subcommands. Requires
// nlohmann/json on the include path.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "lattice.hpp"
#include "matrix.hpp"

namespace latq {

struct BoundSummary {
    double bound_abs_paper = 0.0;
    double bound_abs_halfstep = 0.0;
    double gamma_bound = 0.0;
    double gamma_bound_loose = 0.0;
    Vector l_diag;

    static BoundSummary from(const QLFactors& f) {
        BoundSummary b;
        const auto abs = absolute_error_bound(f);
        const auto rel = relative_error_factor(f);
        b.bound_abs_paper = abs.full_step_bound;
        b.bound_abs_halfstep = abs.half_step_bound;
        b.gamma_bound = rel.gamma;
        b.gamma_bound_loose = rel.gamma_loose;
        b.l_diag = f.diag();
        return b;
    }
};

struct Report {
    std::string algorithm;
    std::size_t n = 0, k = 0, m = 0;
    double mu = 0.0;
    double alpha = 1.0;
    std::optional<double> delta;
    std::optional<IntVector> v;
    std::optional<IntMatrix> V;
    std::optional<double> error_l2;
    std::optional<double> error_regularized;
    std::optional<double> bound_abs_paper;
    std::optional<double> bound_abs_halfstep;
    std::optional<double> gamma_bound;
    std::optional<std::variant<Vector, std::vector<Vector>>> step_coeffs;
    std::optional<std::size_t> fragile_count;
    std::optional<bool> agreement;
    std::optional<double> oracle_error;
    double wall_time_ms = 0.0;

    // Diagnostics beyond the core record.
    std::optional<std::uint64_t> seed;
    std::optional<Vector> l_diag;
    std::optional<double> gamma_bound_loose;
    std::optional<double> oracle_ratio;
    std::optional<BoundSummary> reduced;
    std::vector<std::string> warnings;

    void set_bounds(const BoundSummary& b, double scale = 1.0) {
        bound_abs_paper = scale * b.bound_abs_paper;
        bound_abs_halfstep = scale * b.bound_abs_halfstep;
        gamma_bound = b.gamma_bound;
        gamma_bound_loose = b.gamma_bound_loose;
        l_diag = b.l_diag;
    }
};

namespace detail {

inline nlohmann::ordered_json int_matrix_json(const IntMatrix& m) {
    auto rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        const auto r = m.row(i);
        rows.push_back(std::vector<std::int64_t>(r.begin(), r.end()));
    }
    return rows;
}

inline nlohmann::ordered_json bounds_json(const BoundSummary& b) {
    nlohmann::ordered_json j;
    j["bound_abs_paper"] = b.bound_abs_paper;
    j["bound_abs_halfstep"] = b.bound_abs_halfstep;
    j["gamma_bound"] = b.gamma_bound;
    j["gamma_bound_loose"] = b.gamma_bound_loose;
    j["l_diag"] = b.l_diag;
    return j;
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const Report& r) {
    nlohmann::ordered_json j;
    j["algorithm"] = r.algorithm;
    j["n"] = r.n;
    j["k"] = r.k;
    j["m"] = r.m;
    j["mu"] = r.mu;
    j["alpha"] = r.alpha;
    if (r.delta) j["delta"] = *r.delta;
    if (r.v) j["v"] = *r.v;
    if (r.V) j["V"] = detail::int_matrix_json(*r.V);
    if (r.error_l2) j["error_l2"] = *r.error_l2;
    if (r.error_regularized) j["error_regularized"] = *r.error_regularized;
    if (r.bound_abs_paper) j["bound_abs_paper"] = *r.bound_abs_paper;
    if (r.bound_abs_halfstep) j["bound_abs_halfstep"] = *r.bound_abs_halfstep;
    if (r.gamma_bound) j["gamma_bound"] = *r.gamma_bound;
    if (r.step_coeffs) std::visit([&](const auto& c) { j["step_coeffs"] = c; }, *r.step_coeffs);
    if (r.fragile_count) j["fragile_count"] = *r.fragile_count;
    if (r.agreement) j["agreement"] = *r.agreement;
    if (r.oracle_error) j["oracle_error"] = *r.oracle_error;
    j["wall_time_ms"] = r.wall_time_ms;
    if (r.seed) j["seed"] = *r.seed;
    if (r.l_diag) j["l_diag"] = *r.l_diag;
    if (r.gamma_bound_loose) j["gamma_bound_loose"] = *r.gamma_bound_loose;
    if (r.oracle_ratio) j["oracle_ratio"] = *r.oracle_ratio;
    if (r.reduced) j["reduced"] = detail::bounds_json(*r.reduced);
    if (!r.warnings.empty()) j["warnings"] = r.warnings;
    return j;
}

}  // namespace latq
