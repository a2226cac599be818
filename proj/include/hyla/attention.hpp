#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "hyla/dense_array.hpp"
#include "hyla/parallel.hpp"
#include "hyla/poincare.hpp"

namespace hyla {

enum class Kernel { exp, identity, elu_plus_one };
enum class QkvMode { projection, shift };
enum class Normalize { denominator, none };

struct AttentionConfig {
    std::size_t feature_dim = 0; // 0: taken from the input
    Kernel kernel = Kernel::exp;
    QkvMode qkv_mode = QkvMode::projection;
    Normalize normalize = Normalize::denominator;
    double ball_eps = 1e-5;
    Curvature kappa{-1.0};
    std::size_t threads = 1;

    void validate() const {
        if (!(ball_eps > 0.0 && ball_eps < 0.01)) throw DomainError("ball_eps must lie in (0, 0.01)");
        if (threads == 0) throw DomainError("threads must be positive");
    }
};

struct ProjectionWeights {
    Array w_q, w_k, w_v;

    ProjectionWeights(Array q, Array k, Array v) : w_q(std::move(q)), w_k(std::move(k)), w_v(std::move(v)) {
        for (const Array* w : {&w_q, &w_k, &w_v}) {
            if (w->rank() != 2 || w->rows() != w->cols() || w->rows() != w_q.rows())
                throw DimensionError("ProjectionWeights: W_Q, W_K, W_V must be equal-sized square matrices");
            require_finite(*w, "ProjectionWeights");
        }
    }

    static ProjectionWeights identity(std::size_t f) {
        return {Array::identity(f), Array::identity(f), Array::identity(f)};
    }

    std::size_t features() const noexcept { return w_q.rows(); }
};

struct Qkv {
    Array q, k, v;
};

// Projection mode: Q = x W_Q, K = x W_K, V = x W_V.
// Shift mode: Q, K, V are the token rows starting at offsets 1, 2, 3, truncated
// to the common length N - 3.
inline Qkv qkv_views(const Array& x, QkvMode mode, const ProjectionWeights& weights) {
    require_matrix(x.shape(), "qkv_views");
    if (mode == QkvMode::projection) {
        if (x.cols() != weights.features())
            throw DimensionError("qkv_views: token width " + std::to_string(x.cols()) + " vs weights " +
                                 std::to_string(weights.features()));
        return {matmul(x, weights.w_q), matmul(x, weights.w_k), matmul(x, weights.w_v)};
    }
    if (x.rows() < 4) throw InputTooShort("qkv_views: shift mode needs at least 4 tokens, got " + std::to_string(x.rows()));
    const std::size_t n = x.rows() - 3;
    return {slice_rows(x, 1, n), slice_rows(x, 2, n), slice_rows(x, 3, n)};
}

// Normalized attention weights softmax(Q K^T / sqrt(F)) as a full N x N matrix.
template <class T>
DenseArray<T> softmax_weights(const DenseArray<T>& q, const DenseArray<T>& k) {
    require_matrix(q.shape(), "softmax_weights");
    require_matrix(k.shape(), "softmax_weights");
    if (q.cols() != k.cols()) throw DimensionError("softmax_weights: Q and K widths differ");
    const std::size_t n = q.rows(), m = k.rows();
    const T scale = T{1} / std::sqrt(static_cast<T>(q.cols()));
    DenseArray<T> p({n, m});
    for (std::size_t i = 0; i < n; ++i) {
        T mx = -std::numeric_limits<T>::infinity();
        for (std::size_t j = 0; j < m; ++j) {
            p(i, j) = dot(q.row(i), k.row(j)) * scale;
            mx = std::max(mx, p(i, j));
        }
        T sum{0};
        for (std::size_t j = 0; j < m; ++j) sum += (p(i, j) = std::exp(p(i, j) - mx));
        for (std::size_t j = 0; j < m; ++j) p(i, j) /= sum;
    }
    return p;
}

// Quadratic attention on precomputed Q, K, V. Materializes the N x N weight
// matrix (plus K^T) as counted scratch.
template <class T>
void softmax_attention_into(MatrixRef<const T> q, MatrixRef<const T> k, MatrixRef<const T> v, MatrixRef<T> out,
                            std::size_t threads = 1) {
    if (q.cols != k.cols || k.rows != v.rows || out.rows != q.rows || out.cols != v.cols)
        throw DimensionError("softmax_attention: shape mismatch");
    const std::size_t n = q.rows, m = k.rows, f = q.cols, fv = v.cols;
    if (n == 0) return;
    if (m == 0) throw DimensionError("softmax_attention: empty key set");
    const T scale = T{1} / std::sqrt(static_cast<T>(f));

    counted_vector<T> kt(f * m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t c = 0; c < f; ++c) kt[c * m + j] = k(j, c);
    counted_vector<T> scores(n * m);

    parallel_chunks(n, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            T* s = scores.data() + i * m;
            std::fill(s, s + m, T{0});
            for (std::size_t c = 0; c < f; ++c) {
                const T qc = q(i, c) * scale;
                const T* kc = kt.data() + c * m;
                for (std::size_t j = 0; j < m; ++j) s[j] += qc * kc[j];
            }
            const T mx = *std::max_element(s, s + m);
            T sum{0};
            for (std::size_t j = 0; j < m; ++j) sum += (s[j] = std::exp(s[j] - mx));
            const T inv = T{1} / sum;
            T* o = out.data.data() + i * fv;
            std::fill(o, o + fv, T{0});
            for (std::size_t j = 0; j < m; ++j) {
                const T pj = s[j] * inv;
                const T* vj = v.data.data() + j * fv;
                for (std::size_t c = 0; c < fv; ++c) o[c] += pj * vj[c];
            }
        }
    });
}

// softmax(Q K^T / sqrt(F)) V with Q, K, V the projections of x.
inline Array softmax_attention(const Array& x, const ProjectionWeights& weights, std::size_t threads = 1) {
    const Qkv qkv = qkv_views(x, QkvMode::projection, weights);
    Array out({x.rows(), weights.features()});
    softmax_attention_into<double>(qkv.q.view(), qkv.k.view(), qkv.v.view(), out.view(), threads);
    return out;
}

inline constexpr double kDenominatorFloor = 1e-30;
inline constexpr double kExpClamp = 30.0;

namespace detail {

template <class T>
void apply_kernel(Kernel kernel, std::span<const T> in, T shift, bool clamp, std::span<T> out) {
    for (std::size_t c = 0; c < in.size(); ++c) {
        const T x = in[c];
        switch (kernel) {
        case Kernel::exp:
            out[c] = std::exp(clamp ? std::clamp<T>(x, -kExpClamp, kExpClamp) : x - shift);
            break;
        case Kernel::identity:
            out[c] = x;
            break;
        case Kernel::elu_plus_one:
            out[c] = x > T{0} ? x + T{1} : std::exp(x);
            break;
        }
    }
}

template <class T>
T max_value(std::span<const T> xs) {
    T m = -std::numeric_limits<T>::infinity();
    for (T x : xs) m = std::max(m, x);
    return m;
}

} // namespace detail

// Reordered attention: S = phi(K)^T V and z = phi(K)^T 1 are accumulated once,
// then out_i = phi(Q_i) S / (phi(Q_i) z), or phi(Q_i) S without normalization.
// Working memory is O(threads * F^2), independent of N.
//
// For the exp kernel with the denominator, each query row is shifted by its own
// maximum and all keys by the global key maximum; both factors cancel in the
// ratio. Without normalization there is no shift and inputs are clamped to
// [-30, 30] instead.
template <class T>
void linear_attention_into(MatrixRef<const T> q, MatrixRef<const T> k, MatrixRef<const T> v,
                           const AttentionConfig& config, MatrixRef<T> out) {
    config.validate();
    if (q.cols != k.cols || k.rows != v.rows || out.rows != q.rows || out.cols != v.cols)
        throw DimensionError("linear_attention: shape mismatch");
    if (config.feature_dim != 0 && config.feature_dim != q.cols)
        throw DimensionError("linear_attention: config feature_dim disagrees with input");
    const std::size_t f = q.cols, fv = v.cols, m = k.rows, n = q.rows;
    const bool normalized = config.normalize == Normalize::denominator;
    const bool exp_kernel = config.kernel == Kernel::exp;
    const bool clamp = exp_kernel && !normalized;

    T key_shift{0};
    if (exp_kernel && normalized) key_shift = detail::max_value<T>(k.data);

    const std::size_t threads = std::clamp<std::size_t>(config.threads, 1, std::max<std::size_t>(m, 1));
    const std::size_t row_threads = std::clamp<std::size_t>(config.threads, 1, std::max<std::size_t>(n, 1));
    const std::size_t stride = f * fv + f;
    counted_vector<T> partial(threads * stride, T{0});
    counted_vector<T> phi_rows(std::max(threads, row_threads) * f);

    parallel_chunks(m, threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        T* s = partial.data() + chunk * stride;
        T* z = s + f * fv;
        std::span<T> phi(phi_rows.data() + chunk * f, f);
        for (std::size_t j = begin; j < end; ++j) {
            detail::apply_kernel<T>(config.kernel, k.row(j), key_shift, clamp, phi);
            const T* vj = v.data.data() + j * fv;
            for (std::size_t a = 0; a < f; ++a) {
                const T pa = phi[a];
                z[a] += pa;
                T* sa = s + a * fv;
                for (std::size_t b = 0; b < fv; ++b) sa[b] += pa * vj[b];
            }
        }
    });
    for (std::size_t t = 1; t < threads; ++t)
        for (std::size_t i = 0; i < stride; ++i) partial[i] += partial[t * stride + i];
    const T* s = partial.data();
    const T* z = s + f * fv;

    std::atomic<bool> underflow{false};
    parallel_chunks(n, row_threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        std::span<T> phi(phi_rows.data() + chunk * f, f);
        for (std::size_t i = begin; i < end; ++i) {
            const auto qi = q.row(i);
            const T shift = exp_kernel && normalized ? detail::max_value<T>(qi) : T{0};
            detail::apply_kernel<T>(config.kernel, qi, shift, clamp, phi);
            T* o = out.data.data() + i * fv;
            std::fill(o, o + fv, T{0});
            T den{0};
            for (std::size_t a = 0; a < f; ++a) {
                const T pa = phi[a];
                den += pa * z[a];
                const T* sa = s + a * fv;
                for (std::size_t b = 0; b < fv; ++b) o[b] += pa * sa[b];
            }
            if (normalized) {
                if (!(std::abs(den) >= static_cast<T>(kDenominatorFloor))) {
                    underflow = true;
                    continue;
                }
                const T inv = T{1} / den;
                for (std::size_t b = 0; b < fv; ++b) o[b] *= inv;
            }
        }
    });
    if (underflow) throw NormalizationUnderflow("linear_attention: denominator below 1e-30");
}

template <class T>
DenseArray<T> linear_attention(const DenseArray<T>& q, const DenseArray<T>& k, const DenseArray<T>& v,
                               const AttentionConfig& config) {
    for (const auto* a : {&q, &k, &v}) require_matrix(a->shape(), "linear_attention");
    DenseArray<T> out({q.rows(), v.cols()});
    linear_attention_into<T>(q.view(), k.view(), v.view(), config, out.view());
    return out;
}

// Rescales rows whose norm reaches (1 - eps) * radius onto that norm.
template <class T>
void project_to_ball(MatrixRef<T> x, double radius, double eps) {
    const T limit = static_cast<T>((1.0 - eps) * radius);
    for (std::size_t i = 0; i < x.rows; ++i) {
        auto row = x.row(i);
        const T n = norm(std::span<const T>(row));
        if (n >= limit) {
            // Rounding can leave the rescaled norm an ulp above the limit; nudge it back.
            T s = limit / n;
            for (int attempt = 0; attempt < 8; ++attempt) {
                for (auto& v : row) v *= s;
                if (norm(std::span<const T>(row)) <= limit) break;
                s = T{1} - std::numeric_limits<T>::epsilon();
            }
        }
    }
}

template <class T>
void hyperbolic_linear_attention_into(MatrixRef<const T> q, MatrixRef<const T> k, MatrixRef<const T> v,
                                      const AttentionConfig& config, MatrixRef<T> out) {
    linear_attention_into<T>(q, k, v, config, out);
    project_to_ball<T>(out, config.kappa.radius(), config.ball_eps);
}

// Linear attention over ball points followed by projection back inside the
// ball with margin ball_eps, so every output row satisfies |row| < -1/kappa.
inline PoincareBatch hyperbolic_linear_attention(const PoincareBatch& x, const AttentionConfig& config,
                                                 const ProjectionWeights& weights) {
    if (!(x.curvature() == config.kappa)) throw DomainError("hyperbolic_linear_attention: curvature mismatch");
    const Qkv qkv = qkv_views(x.tokens(), config.qkv_mode, weights);
    Array out({qkv.q.rows(), qkv.v.cols()});
    hyperbolic_linear_attention_into<double>(qkv.q.view(), qkv.k.view(), qkv.v.view(), config, out.view());
    return PoincareBatch(std::move(out), x.curvature());
}

} // namespace hyla
