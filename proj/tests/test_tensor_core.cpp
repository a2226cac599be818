#include <gtest/gtest.h>

#include <cmath>

#include "hyla/dense_array.hpp"
#include "hyla/rng.hpp"

using namespace hyla;

TEST(Matmul, IdentityTimesIdentity) {
    EXPECT_EQ(matmul(Array::identity(2), Array::identity(2)), Array::identity(2));
}

TEST(Matmul, HandComputedProduct) {
    const Array a = Array::matrix({{1, 2}, {3, 4}});
    const Array b = Array::matrix({{0}, {1}});
    EXPECT_EQ(matmul(a, b), Array::matrix({{2}, {4}}));
}

TEST(Matmul, ZeroAnnihilates) {
    Rng rng(1);
    const Array a = uniform_array<double>(rng, {5, 7}, -1, 1);
    EXPECT_EQ(matmul(a, Array({7, 3})), Array({5, 3}));
}

TEST(Matmul, InnerDimensionMismatchThrows) {
    EXPECT_THROW(matmul(Array({2, 3}), Array({2, 3})), DimensionError);
    EXPECT_THROW(matmul(Array({2}), Array({2, 3})), DimensionError);
}

TEST(Matmul, AssociativeWithinAccumulationTolerance) {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = uniform_index(rng, 1, 64), k = uniform_index(rng, 1, 64), m = uniform_index(rng, 1, 64),
                          p = uniform_index(rng, 1, 64);
        const Array a = uniform_array<double>(rng, {n, k}, -1, 1);
        const Array b = uniform_array<double>(rng, {k, m}, -1, 1);
        const Array c = uniform_array<double>(rng, {m, p}, -1, 1);
        EXPECT_LE(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-10);
    }
}

TEST(Matmul, BitReproducible) {
    Rng rng(3);
    const Array a = uniform_array<double>(rng, {31, 17}, -1, 1);
    const Array b = uniform_array<double>(rng, {17, 9}, -1, 1);
    EXPECT_EQ(matmul(a, b), matmul(a, b));
}

TEST(RowNorms, Examples) {
    const Array rows = Array::matrix({{3, 4}, {0, 0}, {0, 1}});
    const Array n = row_norms(rows);
    EXPECT_DOUBLE_EQ(n[0], 5.0);
    EXPECT_DOUBLE_EQ(n[1], 0.0);
    EXPECT_DOUBLE_EQ(n[2], 1.0);
}

TEST(RowNorms, InvariantUnderRotation) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const Array x = uniform_array<double>(rng, {4, 2}, -10, 10);
        const double th = uniform_real(rng, 0, 6.283185307179586);
        const Array rot = Array::matrix({{std::cos(th), -std::sin(th)}, {std::sin(th), std::cos(th)}});
        const Array before = row_norms(x), after = row_norms(matmul(x, rot));
        for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(before[i], after[i], 1e-12 * std::max(1.0, before[i]));
    }
}

TEST(MapElementwise, Examples) {
    const Array z({2, 3});
    EXPECT_EQ(map_elementwise(z, [](double v) { return std::tanh(v); }), z);
    const Array ones = map_elementwise(z, [](double v) { return std::exp(v); });
    for (double v : ones.values()) EXPECT_EQ(v, 1.0);
    Rng rng(5);
    const Array x = uniform_array<double>(rng, {3, 4}, -5, 5);
    auto neg = [](double v) { return -v; };
    EXPECT_EQ(map_elementwise(map_elementwise(x, neg), neg), x);
    EXPECT_EQ(map_elementwise(x, neg).shape(), x.shape());
}

TEST(MapElementwise, NonFiniteIsReportedWhenRequired) {
    const Array x = Array::vector({1.0, 2000.0});
    const Array y = map_elementwise(x, [](double v) { return std::exp(v); });
    EXPECT_FALSE(all_finite(y));
    EXPECT_THROW(require_finite(y, "exp"), NumericError);
}

TEST(DenseArray, ShapeMustMatchData) {
    EXPECT_THROW(Array({2, 2}, {1.0, 2.0, 3.0}), DimensionError);
    EXPECT_THROW(Array({3}).reshaped({2, 2}), DimensionError);
    EXPECT_EQ(Array({2, 0}).size(), 0u);
}

TEST(AllocCounter, TracksLiveAndPeakBytes) {
    const std::size_t before = AllocCounter::current();
    AllocScope scope;
    {
        Array a({128});
        EXPECT_EQ(AllocCounter::current(), before + 128 * sizeof(double));
    }
    EXPECT_EQ(AllocCounter::current(), before);
    EXPECT_EQ(scope.peak_bytes(), 128 * sizeof(double));
}
