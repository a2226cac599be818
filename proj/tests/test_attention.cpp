#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyla/attention.hpp"
#include "hyla/rng.hpp"

using namespace hyla;

namespace {

AttentionConfig config(Kernel kernel, Normalize normalize, double kappa = -1.0) {
    AttentionConfig c;
    c.kernel = kernel;
    c.normalize = normalize;
    c.kappa = Curvature(kappa);
    return c;
}

// exp-kernel linear attention with no shifting at all, straight from the formula.
Array naive_exp_linear(const Array& q, const Array& k, const Array& v) {
    Array out({q.rows(), v.cols()});
    for (std::size_t i = 0; i < q.rows(); ++i) {
        double den = 0.0;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            double w = 0.0;
            for (std::size_t a = 0; a < q.cols(); ++a) w += std::exp(q(i, a)) * std::exp(k(j, a));
            den += w;
            for (std::size_t b = 0; b < v.cols(); ++b) out(i, b) += w * v(j, b);
        }
        for (std::size_t b = 0; b < v.cols(); ++b) out(i, b) /= den;
    }
    return out;
}

Array random_ball(Rng& rng, std::size_t n, std::size_t f, double radius) {
    Array x = normal_array<double>(rng, {n, f});
    for (std::size_t i = 0; i < n; ++i) {
        const double target = uniform_real(rng, 0.0, 0.999) * radius;
        const double nrm = norm(x.row(i));
        for (auto& v : x.row(i)) v *= target / nrm;
    }
    return x;
}

} // namespace

TEST(Softmax, Examples) {
    Rng rng(1);
    const auto w = ProjectionWeights::identity(3);
    const Array one = uniform_array<double>(rng, {1, 3}, -1, 1);
    EXPECT_LE(max_abs_diff(softmax_attention(one, w), one), 1e-15);

    const Array same = uniform_array<double>(rng, {4, 2}, -1, 1);
    const Array q = uniform_array<double>(rng, {4, 2}, -1, 1);
    Array k_({4, 2});
    for (std::size_t i = 0; i < 4; ++i) k_(i, 0) = 0.3, k_(i, 1) = -0.7;
    const Array& k = k_;
    Array out({4, 2});
    softmax_attention_into<double>(q.view(), k.view(), same.view(), out.view());
    const Array mean = mean_rows(same);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(out(i, j), mean[j], 1e-14);

    const Array q2({2, 1}), k2({2, 1});
    const Array v2 = Array::matrix({{1}, {3}});
    Array o2({2, 1});
    softmax_attention_into<double>(q2.view(), k2.view(), v2.view(), o2.view());
    EXPECT_EQ(o2, Array::matrix({{2}, {2}}));
}

TEST(Softmax, RowsSumToOne) {
    Rng rng(2);
    for (int t = 0; t < 50; ++t) {
        const Array q = uniform_array<double>(rng, {17, 5}, -3, 3);
        const Array k = uniform_array<double>(rng, {23, 5}, -3, 3);
        const Array p = softmax_weights(q, k);
        for (std::size_t i = 0; i < p.rows(); ++i) {
            const auto row = p.row(i);
            EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
        }
    }
}

TEST(Softmax, ThreadedMatchesSerial) {
    Rng rng(3);
    const Array x = uniform_array<double>(rng, {37, 4}, -1, 1);
    Rng wr(4);
    const ProjectionWeights w(uniform_array<double>(wr, {4, 4}, -1, 1), uniform_array<double>(wr, {4, 4}, -1, 1),
                              uniform_array<double>(wr, {4, 4}, -1, 1));
    EXPECT_EQ(softmax_attention(x, w, 1), softmax_attention(x, w, 3));
}

TEST(QkvViews, Examples) {
    Rng rng(5);
    const Array x = uniform_array<double>(rng, {6, 2}, -1, 1);
    const Qkv id = qkv_views(x, QkvMode::projection, ProjectionWeights::identity(2));
    EXPECT_EQ(id.q, x);
    EXPECT_EQ(id.k, x);
    EXPECT_EQ(id.v, x);

    const Qkv sh = qkv_views(x, QkvMode::shift, ProjectionWeights::identity(2));
    EXPECT_EQ(sh.q, slice_rows(x, 1, 3));
    EXPECT_EQ(sh.k, slice_rows(x, 2, 3));
    EXPECT_EQ(sh.v, slice_rows(x, 3, 3));
    EXPECT_EQ(sh.q(0, 0), x(1, 0));
    EXPECT_EQ(sh.v(2, 1), x(5, 1));
}

TEST(QkvViews, Errors) {
    EXPECT_THROW(qkv_views(Array({3, 2}), QkvMode::shift, ProjectionWeights::identity(2)), InputTooShort);
    EXPECT_THROW(qkv_views(Array({3, 2}), QkvMode::projection, ProjectionWeights::identity(3)), DimensionError);
    EXPECT_THROW(ProjectionWeights(Array({2, 2}), Array({2, 3}), Array({2, 2})), DimensionError);
}

TEST(LinearAttention, IdentityExamples) {
    const Array i2 = Array::identity(2);
    EXPECT_EQ(linear_attention(i2, i2, i2, config(Kernel::identity, Normalize::none)), i2);

    Rng rng(6);
    const Array q = uniform_array<double>(rng, {1, 4}, -1, 1);
    const Array k = uniform_array<double>(rng, {1, 4}, -1, 1);
    const Array v = uniform_array<double>(rng, {1, 3}, -1, 1);
    EXPECT_LE(max_abs_diff(linear_attention(q, k, v, config(Kernel::exp, Normalize::denominator)), v), 1e-15);
}

TEST(LinearAttention, MatchesReorderedQuadraticProduct) {
    Rng rng(7);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = uniform_index(rng, 1, 256), f = uniform_index(rng, 1, 64);
        const Array q = uniform_array<double>(rng, {n, f}, -1, 1);
        const Array k = uniform_array<double>(rng, {n, f}, -1, 1);
        const Array v = uniform_array<double>(rng, {n, f}, -1, 1);
        const Array oracle = matmul(matmul(q, transpose(k)), v);
        EXPECT_LE(max_abs_diff(linear_attention(q, k, v, config(Kernel::identity, Normalize::none)), oracle), 1e-10);
    }
}

TEST(LinearAttention, ExpShiftCancelsInRatio) {
    Rng rng(8);
    for (int t = 0; t < 30; ++t) {
        const std::size_t n = uniform_index(rng, 1, 40), f = uniform_index(rng, 1, 8);
        const Array q = uniform_array<double>(rng, {n, f}, -4, 4);
        const Array k = uniform_array<double>(rng, {n, f}, -4, 4);
        const Array v = uniform_array<double>(rng, {n, 3}, -1, 1);
        const Array got = linear_attention(q, k, v, config(Kernel::exp, Normalize::denominator));
        EXPECT_LE(max_abs_diff(got, naive_exp_linear(q, k, v)), 1e-12);
    }
}

TEST(LinearAttention, LargeLogitsStayFinite) {
    const Array q = Array::matrix({{800.0, -800.0}, {0.0, 0.0}});
    const Array k = Array::matrix({{900.0, 1.0}, {-900.0, 2.0}});
    const Array v = Array::matrix({{1.0}, {2.0}});
    const Array out = linear_attention(q, k, v, config(Kernel::exp, Normalize::denominator));
    EXPECT_TRUE(all_finite(out));
    for (double o : out.values()) {
        EXPECT_GE(o, 1.0);
        EXPECT_LE(o, 2.0);
    }
}

TEST(LinearAttention, UnderflowIsReported) {
    const Array q = Array::matrix({{1.0, -1.0}});
    const Array k = Array::matrix({{1.0, 1.0}});
    const Array v = Array::matrix({{1.0}});
    EXPECT_THROW(linear_attention(q, k, v, config(Kernel::identity, Normalize::denominator)), NormalizationUnderflow);
}

TEST(LinearAttention, ThreadsAgree) {
    Rng rng(9);
    const Array q = uniform_array<double>(rng, {101, 6}, -1, 1);
    const Array k = uniform_array<double>(rng, {101, 6}, -1, 1);
    const Array v = uniform_array<double>(rng, {101, 6}, -1, 1);
    AttentionConfig c1 = config(Kernel::exp, Normalize::denominator), c4 = c1;
    c4.threads = 4;
    EXPECT_LE(max_abs_diff(linear_attention(q, k, v, c1), linear_attention(q, k, v, c4)), 1e-12);
}

TEST(LinearAttention, PermutationEquivariant) {
    Rng rng(10);
    Rng wr(11);
    const ProjectionWeights w(uniform_array<double>(wr, {5, 5}, -1, 1), uniform_array<double>(wr, {5, 5}, -1, 1),
                              uniform_array<double>(wr, {5, 5}, -1, 1));
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = uniform_index(rng, 2, 30);
        const Array x = uniform_array<double>(rng, {n, 5}, -1, 1);
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Array xp({n, 5});
        for (std::size_t i = 0; i < n; ++i) std::copy(x.row(perm[i]).begin(), x.row(perm[i]).end(), xp.row(i).begin());
        const AttentionConfig c = config(Kernel::exp, Normalize::denominator);
        const Qkv a = qkv_views(x, QkvMode::projection, w), b = qkv_views(xp, QkvMode::projection, w);
        const Array ya = linear_attention(a.q, a.k, a.v, c), yb = linear_attention(b.q, b.k, b.v, c);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(yb(i, j), ya(perm[i], j), 1e-12);
    }
}

TEST(LinearAttention, ShapeMismatchThrows) {
    EXPECT_THROW(linear_attention(Array({2, 3}), Array({2, 4}), Array({2, 3}), config(Kernel::exp, Normalize::none)),
                 DimensionError);
    AttentionConfig c = config(Kernel::exp, Normalize::none);
    c.feature_dim = 5;
    EXPECT_THROW(linear_attention(Array({2, 3}), Array({2, 3}), Array({2, 3}), c), DimensionError);
}

TEST(Hla, SingleTokenIsCollinearWithV) {
    Rng rng(12);
    Rng wr(13);
    const ProjectionWeights w(uniform_array<double>(wr, {4, 4}, -1, 1), uniform_array<double>(wr, {4, 4}, -1, 1),
                              uniform_array<double>(wr, {4, 4}, -1, 1));
    const PoincareBatch x(random_ball(rng, 1, 4, 1.0), Curvature(-1.0));
    const PoincareBatch y = hyperbolic_linear_attention(x, config(Kernel::exp, Normalize::denominator), w);
    const Array v = matmul(x.tokens(), w.w_v);
    const double c = dot(y.tokens().row(0), v.row(0)) / (norm(y.tokens().row(0)) * norm(v.row(0)));
    EXPECT_NEAR(c, 1.0, 1e-12);
    EXPECT_LT(norm(y.tokens().row(0)), 1.0);
}

TEST(Hla, OriginStaysAtOrigin) {
    const PoincareBatch x(Array({5, 3}), Curvature(-1.0));
    const PoincareBatch y =
        hyperbolic_linear_attention(x, config(Kernel::identity, Normalize::none), ProjectionWeights::identity(3));
    EXPECT_EQ(y.tokens(), Array({5, 3}));
}

TEST(Hla, OutputsStayInsideBall) {
    Rng rng(14);
    for (double kappa : {-1.0, -2.0}) {
        const Curvature c(kappa);
        for (int t = 0; t < 300; ++t) {
            const std::size_t n = uniform_index(rng, 1, 12), f = uniform_index(rng, 1, 6);
            Rng wr(rng());
            const ProjectionWeights w(uniform_array<double>(wr, {f, f}, -3, 3), uniform_array<double>(wr, {f, f}, -3, 3),
                                      uniform_array<double>(wr, {f, f}, -3, 3));
            const PoincareBatch x(random_ball(rng, n, f, c.radius()), c);
            const PoincareBatch y = hyperbolic_linear_attention(x, config(Kernel::exp, Normalize::denominator, kappa), w);
            for (std::size_t i = 0; i < y.size(); ++i) ASSERT_LT(norm(y.tokens().row(i)), c.radius());
        }
    }
}

TEST(Hla, ShiftModeShortensSequence) {
    Rng rng(15);
    const PoincareBatch x(random_ball(rng, 7, 3, 1.0), Curvature(-1.0));
    AttentionConfig c = config(Kernel::exp, Normalize::denominator);
    c.qkv_mode = QkvMode::shift;
    EXPECT_EQ(hyperbolic_linear_attention(x, c, ProjectionWeights::identity(3)).size(), 4u);
}

TEST(Hla, CurvatureMismatchThrows) {
    const PoincareBatch x(Array({2, 2}), Curvature(-1.0));
    EXPECT_THROW(hyperbolic_linear_attention(x, config(Kernel::exp, Normalize::denominator, -2.0),
                                             ProjectionWeights::identity(2)),
                 DomainError);
}

TEST(ProjectToBall, RescalesOnlyRowsPastMargin) {
    Array x = Array::matrix({{3.0, 4.0}, {0.1, 0.0}});
    project_to_ball<double>(x.view(), 1.0, 1e-5);
    EXPECT_NEAR(norm(x.row(0)), 1.0 - 1e-5, 1e-15);
    EXPECT_NEAR(x(0, 0) / x(0, 1), 0.75, 1e-15);
    EXPECT_EQ(x(1, 0), 0.1);
}

TEST(AttentionConfig, Validates) {
    AttentionConfig c;
    c.ball_eps = 0.0;
    EXPECT_THROW(c.validate(), DomainError);
    c.ball_eps = 1e-5;
    c.threads = 0;
    EXPECT_THROW(c.validate(), DomainError);
}
