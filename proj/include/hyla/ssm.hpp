#pragma once

// Linear state-space baseline: zero-order-hold discretization, the sequential
// scan, and the equivalent causal convolution with the unrolled kernel.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "hyla/dense_array.hpp"

namespace hyla {

struct SSMParams {
    Array a;  // [S x S]
    Array b;  // [S x 1]
    Array c;  // [1 x S]
    double delta = 1.0;

    std::size_t state_dim() const noexcept { return a.rows(); }

    void validate() const {
        const std::size_t s = a.rows();
        if (a.rank() != 2 || a.cols() != s) throw DimensionError("SSMParams: A must be S x S");
        if (b.size() != s || c.size() != s) throw DimensionError("SSMParams: B must be S x 1 and C 1 x S");
        if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("SSMParams: delta must be positive");
    }
};

struct DiscreteSSM {
    Array a_bar; // [S x S]
    Array b_bar; // [S x 1]
};

// Below this 1-norm of delta*A the input matrix uses the series for B_bar.
inline constexpr double kZohSeriesThreshold = 1e-6;
inline constexpr std::size_t kMaxDenseStateDim = 32;

template <class T>
bool is_diagonal(const DenseArray<T>& a) {
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (i != j && a(i, j) != T{0}) return false;
    return true;
}

inline double norm1(const Array& a) {
    double best = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.rows(); ++i) s += std::abs(a(i, j));
        best = std::max(best, s);
    }
    return best;
}

// exp(M) by scaling and squaring: M / 2^s has 1-norm at most 1/2, a degree-18
// Taylor polynomial is evaluated there, then squared s times.
inline Array matrix_exp(const Array& m) {
    require_matrix(m.shape(), "matrix_exp");
    const std::size_t n = m.rows();
    if (m.cols() != n) throw DimensionError("matrix_exp: matrix must be square");
    if (n > kMaxDenseStateDim) throw DimensionError("matrix_exp: dense exponential limited to 32 x 32");
    require_finite(m, "matrix_exp");
    int squarings = 0;
    const double nrm = norm1(m);
    if (nrm > 0.5) squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5)));
    const Array scaled = scale(m, std::ldexp(1.0, -squarings));

    Array result = Array::identity(n);
    Array term = Array::identity(n);
    for (int k = 1; k <= 18; ++k) {
        term = scale(matmul(term, scaled), 1.0 / k);
        result = add(result, term);
    }
    for (int i = 0; i < squarings; ++i) result = matmul(result, result);
    return result;
}

// Zero-order hold: A_bar = exp(delta A), B_bar = (delta A)^{-1} (exp(delta A) - I) delta B.
inline DiscreteSSM ssm_discretize(const SSMParams& p) {
    p.validate();
    const std::size_t s = p.state_dim();
    DiscreteSSM out{Array({s, s}), Array({s, 1})};

    if (is_diagonal(p.a)) {
        for (std::size_t i = 0; i < s; ++i) {
            const double x = p.delta * p.a(i, i);
            out.a_bar(i, i) = std::exp(x);
            if (std::abs(x) < kZohSeriesThreshold)
                out.b_bar[i] = p.delta * (1.0 + x / 2.0 + x * x / 6.0) * p.b[i];
            else
                out.b_bar[i] = std::expm1(x) / p.a(i, i) * p.b[i];
        }
        return out;
    }

    const Array da = scale(p.a, p.delta);
    out.a_bar = matrix_exp(da);
    const Array db = scale(p.b.reshaped({s, 1}), p.delta);
    if (norm1(da) < kZohSeriesThreshold) {
        // delta (I + dA/2! + dA^2/3! + dA^3/4!) B
        Array series = Array::identity(s);
        Array term = Array::identity(s);
        for (int k = 2; k <= 4; ++k) {
            term = scale(matmul(term, da), 1.0 / k);
            series = add(series, term);
        }
        out.b_bar = matmul(series, db);
        return out;
    }

    Eigen::MatrixXd lhs(s, s);
    Eigen::VectorXd rhs(s);
    const Array em = matmul(add(out.a_bar, scale(Array::identity(s), -1.0)), db);
    for (std::size_t i = 0; i < s; ++i) {
        rhs(static_cast<Eigen::Index>(i)) = em[i];
        for (std::size_t j = 0; j < s; ++j) lhs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = da(i, j);
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(lhs);
    if (!(lu.rcond() > 1e-12)) throw ConditioningError("ssm_discretize: delta*A is not invertible");
    const Eigen::VectorXd sol = lu.solve(rhs);
    for (std::size_t i = 0; i < s; ++i) out.b_bar[i] = sol(static_cast<Eigen::Index>(i));
    return out;
}

namespace detail {

template <class T>
void check_ssm_shapes(const DenseArray<T>& a_bar, const DenseArray<T>& b_bar, const DenseArray<T>& c) {
    const std::size_t s = a_bar.rows();
    if (a_bar.rank() != 2 || a_bar.cols() != s || b_bar.size() != s || c.size() != s)
        throw DimensionError("ssm: A_bar must be S x S, B_bar S x 1, C 1 x S");
}

// y <- M p for a square matrix, diagonal fast path when requested.
template <class T>
void apply_state_matrix(const DenseArray<T>& m, bool diagonal, std::span<const T> p, std::span<T> y) {
    const std::size_t s = p.size();
    if (diagonal) {
        for (std::size_t i = 0; i < s; ++i) y[i] = m(i, i) * p[i];
        return;
    }
    for (std::size_t i = 0; i < s; ++i) y[i] = dot(m.row(i), p);
}

} // namespace detail

// h_t = A_bar h_{t-1} + B_bar x_t, y_t = C h_t, with h_0 = 0.
template <class T>
DenseArray<T> ssm_scan(const DenseArray<T>& a_bar, const DenseArray<T>& b_bar, const DenseArray<T>& c,
                       const DenseArray<T>& x) {
    detail::check_ssm_shapes(a_bar, b_bar, c);
    const std::size_t s = a_bar.rows(), n = x.size();
    const bool diagonal = is_diagonal(a_bar);
    counted_vector<T> h(s, T{0}), next(s);
    DenseArray<T> y({n});
    for (std::size_t t = 0; t < n; ++t) {
        detail::apply_state_matrix<T>(a_bar, diagonal, h, next);
        for (std::size_t i = 0; i < s; ++i) h[i] = next[i] + b_bar[i] * x[t];
        y[t] = dot(c.values(), std::span<const T>(h));
    }
    return y;
}

// K = (C B_bar, C A_bar B_bar, ..., C A_bar^{M-1} B_bar).
template <class T>
DenseArray<T> ssm_kernel(const DenseArray<T>& a_bar, const DenseArray<T>& b_bar, const DenseArray<T>& c,
                         std::size_t length) {
    detail::check_ssm_shapes(a_bar, b_bar, c);
    const std::size_t s = a_bar.rows();
    const bool diagonal = is_diagonal(a_bar);
    counted_vector<T> p(b_bar.values().begin(), b_bar.values().end()), next(s);
    DenseArray<T> k({length});
    for (std::size_t t = 0; t < length; ++t) {
        k[t] = dot(c.values(), std::span<const T>(p));
        detail::apply_state_matrix<T>(a_bar, diagonal, p, next);
        std::swap(p, next);
    }
    return k;
}

// Causal convolution y = x * K with the unrolled kernel of length M = |x|.
template <class T>
DenseArray<T> ssm_conv(const DenseArray<T>& a_bar, const DenseArray<T>& b_bar, const DenseArray<T>& c,
                       const DenseArray<T>& x) {
    const std::size_t m = x.size();
    const DenseArray<T> k = ssm_kernel(a_bar, b_bar, c, m);
    DenseArray<T> y({m});
    for (std::size_t t = 0; t < m; ++t) {
        T acc{0};
        for (std::size_t j = 0; j <= t; ++j) acc += k[j] * x[t - j];
        y[t] = acc;
    }
    return y;
}

} // namespace hyla
