#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include "errors.hpp"

namespace latq {

inline constexpr double default_tie_tol = 1e-9;

// Round half to even. Every solver rounds through this function so that
// algebraically equal coefficients land on the same integer.
inline std::int64_t round_half_even(double x) {
    double r = std::nearbyint(x);  // default FE_TONEAREST mode is half-to-even
    if (std::abs(x - std::trunc(x)) == 0.5) {
        // nearbyint honours the current rounding mode; pin the tie rule explicitly.
        const double lo = std::floor(x);
        r = (std::fmod(lo, 2.0) == 0.0) ? lo : lo + 1.0;
    }
    if (!(r > -9.2e18 && r < 9.2e18))
        throw IntegerOverflow("rounded coefficient outside the 64-bit integer range");
    return static_cast<std::int64_t>(r);
}

// True when x sits within tol of a half-integer, where two floating-point
// evaluations of the same real number may round differently.
inline bool is_fragile(double x, double tol = default_tie_tol) {
    const double frac = x - std::floor(x);
    return std::abs(frac - 0.5) < tol;
}

}  // namespace latq
