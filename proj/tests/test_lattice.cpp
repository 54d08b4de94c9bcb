#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "latq/lattice.hpp"
#include "oracles.hpp"

namespace latq {
namespace {

using testing::random_matrix;
using testing::random_vector;

const Matrix skewed_z2{{3, 5}, {1, 2}};

TEST(Rounding, HalfToEven) {
    EXPECT_EQ(round_half_even(2.5), 2);
    EXPECT_EQ(round_half_even(3.5), 4);
    EXPECT_EQ(round_half_even(-2.5), -2);
    EXPECT_EQ(round_half_even(-0.5), 0);
    EXPECT_EQ(round_half_even(0.4999999), 0);
    EXPECT_EQ(round_half_even(-1.2), -1);
    EXPECT_THROW(round_half_even(1e300), IntegerOverflow);
    EXPECT_TRUE(is_fragile(2.5));
    EXPECT_TRUE(is_fragile(-0.5 + 1e-12));
    EXPECT_FALSE(is_fragile(2.4));
}

TEST(Babai, IdentityIsCoordinatewiseRounding) {
    const LatticeBasis b(Matrix::identity(2));
    const auto s = babai_nearest_plane(b, Vector{0.4, 1.6});
    EXPECT_EQ(s.v, (IntVector{0, 2}));
    EXPECT_NEAR(s.error_l2, std::sqrt(0.32), 1e-15);
}

TEST(Babai, WorkedSkewedInstance) {
    const LatticeBasis b(skewed_z2);
    const auto s = babai_nearest_plane(b, Vector{-1.2, 0.8});
    EXPECT_EQ(s.v, (IntVector{-1, 1}));
    ASSERT_EQ(s.step_coeffs.size(), 2u);
    EXPECT_NEAR(s.step_coeffs[0], -1.2, 1e-12);
    EXPECT_NEAR(s.step_coeffs[1], 19.8 / 29.0, 1e-12);
    EXPECT_NEAR(s.error_l2, 1.7088007490635058, 1e-12);
    EXPECT_NEAR(s.residual[0], -1.6, 1e-12);
    EXPECT_NEAR(s.residual[1], -0.6, 1e-12);
    EXPECT_TRUE(s.fragile.empty());
}

TEST(Babai, IntegerWeightsAreFixedPoints) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> d(-20, 20);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + rep % 7;
        const LatticeBasis b(random_matrix(rng, n + rep % 3, n));
        Vector w(n);
        for (auto& e : w) e = d(rng);
        const auto s = babai_nearest_plane(b, w);
        for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(static_cast<double>(s.v[i]), w[i]);
        EXPECT_EQ(s.error_l2, 0.0);
    }
}

TEST(BabaiFromTarget, Examples) {
    EXPECT_EQ(babai_from_target(LatticeBasis(Matrix::identity(2)), Vector{0.4, 1.6}).v, (IntVector{0, 2}));
    EXPECT_EQ(babai_from_target(LatticeBasis(skewed_z2), Vector{0.4, 0.4}).v, (IntVector{-1, 1}));
    const auto s = babai_from_target(LatticeBasis(Matrix{{1}, {0}}), Vector{2.3, 7.0});
    EXPECT_EQ(s.v, (IntVector{2}));
    EXPECT_NEAR(s.step_coeffs[0], 2.3, 1e-15);
}

TEST(BabaiFromTarget, MatchesWeightFormOnSpanTargets) {
    std::mt19937_64 rng(2);
    for (int rep = 0; rep < 100; ++rep) {
        const LatticeBasis b(random_matrix(rng, 10, 5));
        const Vector w = random_vector(rng, 5, -4, 4);
        EXPECT_EQ(babai_from_target(b, b.matrix() * w).v, babai_nearest_plane(b, w).v);
    }
}

TEST(BabaiFromTarget, OffSpanComponentIsIgnored) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        const LatticeBasis b(random_matrix(rng, 9, 4));
        const Vector t = random_vector(rng, 9, -3, 3);
        // z = (I - Q Q^T) g is orthogonal to every column of Q.
        const Vector g = random_vector(rng, 9, -5, 5);
        const Matrix& q = b.factors().q;
        Vector z = g;
        for (std::size_t j = 0; j < 4; ++j) {
            const Vector qj = q.col(j);
            const double c = dot(qj, g);
            for (std::size_t r = 0; r < 9; ++r) z[r] -= c * qj[r];
        }
        const auto a = babai_from_target(b, t);
        Vector tz = t;
        for (std::size_t r = 0; r < 9; ++r) tz[r] += z[r];
        const auto c = babai_from_target(b, tz);
        if (a.fragile.empty() && c.fragile.empty()) {
            EXPECT_EQ(a.v, c.v);
        }
    }
}

TEST(BabaiFromTarget, LaterCoefficientsInsensitiveToQiShift) {
    // Adding kappa * Q_i to the running target leaves <t, Q_j>/L_jj for j > i unchanged.
    std::mt19937_64 rng(4);
    for (int rep = 0; rep < 100; ++rep) {
        const LatticeBasis b(random_matrix(rng, 8, 5));
        const auto& f = b.factors();
        const Vector t = random_vector(rng, 8, -3, 3);
        for (std::size_t i = 0; i < 5; ++i) {
            const double kappa = std::uniform_real_distribution<double>(-10, 10)(rng);
            Vector shifted = t;
            for (std::size_t r = 0; r < 8; ++r) shifted[r] += kappa * f.q(r, i);
            for (std::size_t j = i + 1; j < 5; ++j) {
                const Vector qj = f.q.col(j);
                const double before = dot(t, qj) / f.l(j, j);
                const double after = dot(shifted, qj) / f.l(j, j);
                EXPECT_LE(std::abs(before - after), 1e-10 * std::max(1.0, std::abs(kappa) / f.l(j, j)));
            }
        }
    }
}

TEST(BruteForceCvp, Examples) {
    const auto a = brute_force_cvp(LatticeBasis(Matrix::identity(2)), Vector{0.4, 0.4}, 2);
    EXPECT_EQ(a.v, (IntVector{0, 0}));

    const auto b = brute_force_cvp(LatticeBasis(skewed_z2), Vector{0.4, 0.4}, 3);
    EXPECT_EQ(b.v, (IntVector{0, 0}));
    EXPECT_NEAR(b.error_l2, std::sqrt(0.32), 1e-12);
    EXPECT_FALSE(b.boundary_hit);

    std::mt19937_64 rng(5);
    const LatticeBasis c(random_matrix(rng, 6, 3));
    const auto exact = brute_force_cvp(c, c.matrix() * Vector{3, -1, 2});
    EXPECT_EQ(exact.v, (IntVector{3, -1, 2}));
    EXPECT_LE(exact.error_l2, 1e-12);
}

TEST(BruteForceCvp, LexicographicTieBreak) {
    EXPECT_EQ(brute_force_cvp(LatticeBasis(Matrix{{1}}), Vector{0.5}).v, (IntVector{0}));
    EXPECT_EQ(brute_force_cvp(LatticeBasis(Matrix::identity(2)), Vector{0.5, -0.5}).v, (IntVector{0, -1}));
}

TEST(BruteForceCvp, Errors) {
    EXPECT_THROW(brute_force_cvp(LatticeBasis(Matrix::identity(9)), Vector(9, 0.0)), DimensionTooLarge);
    EXPECT_THROW(brute_force_cvp(LatticeBasis(Matrix::identity(2)), Vector{0, 0}, 0), std::invalid_argument);
}

TEST(BruteForceCvp, BoundaryFlagAndCertifiedRetry) {
    // Nearly parallel columns: the optimum sits far from round(x*).
    const LatticeBasis b(Matrix{{1.0, 1.0}, {0.0, 0.05}});
    const Vector t{0.3, 0.31};
    const auto small = brute_force_cvp(b, t, 1);
    const auto exact = exact_cvp(b, t, 1, 64);
    EXPECT_TRUE(exact.certified);
    EXPECT_LE(exact.error_l2, small.error_l2);
    const IntVector lo{-80, -80}, hi{80, 80};
    const IntVector ref = testing::enumerate_cvp(b.matrix(), t, lo, hi);
    EXPECT_NEAR(exact.error_l2, testing::distance(b.matrix(), t, ref), 1e-12);
}

TEST(BruteForceCvp, AgreesWithPlainEnumeration) {
    std::mt19937_64 rng(6);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rep % 4;
        const LatticeBasis b(random_matrix(rng, n + 2, n));
        const Vector t = random_vector(rng, n + 2, -3, 3);
        const auto s = brute_force_cvp(b, t, 2);
        const Vector c = least_squares_solve(b.factors(), t);
        IntVector lo(n), hi(n);
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = round_half_even(c[i]) - 2;
            hi[i] = round_half_even(c[i]) + 2;
        }
        EXPECT_EQ(s.v, testing::enumerate_cvp(b.matrix(), t, lo, hi));
    }
}

TEST(Bounds, AbsoluteExamples) {
    EXPECT_NEAR(absolute_error_bound(ql_decompose(Matrix::identity(3))).full_step_bound, std::sqrt(3.0), 1e-15);
    EXPECT_NEAR(absolute_error_bound(ql_decompose(Matrix::identity(3))).half_step_bound, std::sqrt(0.75),
                1e-15);
    EXPECT_NEAR(absolute_error_bound(ql_decompose(skewed_z2)).full_step_bound, std::sqrt(1.0 / 29 + 29), 1e-12);
    EXPECT_NEAR(absolute_error_bound(ql_decompose(Matrix{{0.0}, {2.5}})).full_step_bound, 2.5, 1e-15);
}

TEST(Bounds, RelativeExamples) {
    EXPECT_NEAR(relative_error_factor(ql_decompose(Matrix::identity(4))).gamma, std::sqrt(5.0), 1e-15);
    EXPECT_NEAR(relative_error_factor(ql_decompose(skewed_z2)).gamma, std::sqrt(843.0), 1e-10);
    EXPECT_NEAR(relative_error_factor(ql_decompose(Matrix{{0.0}, {7.0}})).gamma, std::sqrt(2.0), 1e-15);
    // Loose form: sqrt(n-1) * max ratio = 1 * 29 on the skewed basis.
    EXPECT_NEAR(relative_error_factor(ql_decompose(skewed_z2)).gamma_loose, 29.0, 1e-10);
}

class RandomLattices : public ::testing::Test {
protected:
    std::mt19937_64 rng{2024};
};

TEST_F(RandomLattices, OracleDominatesAndBoundsHold) {
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + rep % 5;
        const std::size_t k = n + static_cast<std::size_t>(rep) % (9 - n);
        const LatticeBasis b(random_matrix(rng, k, n));
        const Vector w = random_vector(rng, n, -4, 4);
        const Vector t = b.matrix() * w;
        const auto babai = babai_nearest_plane(b, w);
        const auto opt = exact_cvp(b, t, 2, 24);
        ASSERT_TRUE(opt.certified);
        EXPECT_LE(opt.error_l2, babai.error_l2 + 1e-12);

        const auto abs = absolute_error_bound(b.factors());
        EXPECT_LE(babai.error_l2 * babai.error_l2, abs.full_step_bound * abs.full_step_bound);
        EXPECT_LE(babai.error_l2, abs.half_step_bound * (1 + 1e-12));

        const auto rel = relative_error_factor(b.factors());
        EXPECT_LE(babai.error_l2, rel.gamma * opt.error_l2 * (1 + 1e-12) + 1e-12);
    }
}

}  // namespace
}  // namespace latq
