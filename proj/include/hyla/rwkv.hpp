#pragma once

// RWKV token mixing and the wkv aggregation
//   wkv_t = d(u) k_t^T v_t + sum_{i<t} d(prod_{j=i+1}^{t-1} w_j) k_i^T v_i
// with a per-channel decay w that is constant over time.

#include <string>

#include "hyla/dense_array.hpp"

namespace hyla {

enum class WkvMode { direct, recurrent };

struct RWKVParams {
    Array mu_r, mu_k, mu_v, mu_g; // [F], each in [0, 1]
    Array w_r, w_k, w_v, w_g;     // [F x F]
    Array w;                      // [F] decay, in (0, 1)
    Array u;                      // [F] current-token bonus

    std::size_t features() const noexcept { return w.size(); }

    void validate() const {
        const std::size_t f = features();
        for (const Array* mu : {&mu_r, &mu_k, &mu_v, &mu_g}) {
            if (mu->size() != f) throw DimensionError("RWKVParams: mu length");
            for (double m : mu->values())
                if (!(m >= 0.0 && m <= 1.0)) throw DomainError("RWKVParams: mu outside [0, 1]");
        }
        for (const Array* m : {&w_r, &w_k, &w_v, &w_g})
            if (m->rank() != 2 || m->rows() != f || m->cols() != f) throw DimensionError("RWKVParams: W must be F x F");
        if (u.size() != f) throw DimensionError("RWKVParams: u length");
        for (double d : w.values())
            if (!(d > 0.0 && d < 1.0)) throw DomainError("RWKVParams: decay outside (0, 1)");
    }
};

struct RwkvMix {
    Array r, k, v, g;
};

namespace detail {

inline Array mix_project(const Array& wm, const Array& mu, std::span<const double> xt, std::span<const double> xp) {
    const std::size_t f = mu.size();
    std::vector<double> blend(f);
    for (std::size_t c = 0; c < f; ++c) blend[c] = mu[c] * xt[c] + (1.0 - mu[c]) * xp[c];
    Array out({f});
    for (std::size_t a = 0; a < f; ++a) out[a] = dot(wm.row(a), std::span<const double>(blend));
    return out;
}

} // namespace detail

// box_t = W_box (mu_box * x_t + (1 - mu_box) * x_prev) for box in {r, k, v, g}.
inline RwkvMix rwkv_mix(std::span<const double> x_t, std::span<const double> x_prev, const RWKVParams& p) {
    p.validate();
    if (x_t.size() != p.features() || x_prev.size() != p.features()) throw DimensionError("rwkv_mix: token width");
    return {detail::mix_project(p.w_r, p.mu_r, x_t, x_prev), detail::mix_project(p.w_k, p.mu_k, x_t, x_prev),
            detail::mix_project(p.w_v, p.mu_v, x_t, x_prev), detail::mix_project(p.w_g, p.mu_g, x_t, x_prev)};
}

// Every wkv_t as an [N x F x F] array. Direct mode evaluates the sum term by
// term (quadratic in N); recurrent mode carries the decayed state.
inline Array rwkv_wkv_states(const Array& k, const Array& v, const RWKVParams& p, WkvMode mode) {
    require_matrix(k.shape(), "rwkv_wkv");
    require_matrix(v.shape(), "rwkv_wkv");
    const std::size_t n = k.rows(), f = p.features();
    if (n == 0) throw InputTooShort("rwkv_wkv: empty sequence");
    if (k.cols() != f || v.cols() != f || v.rows() != n) throw DimensionError("rwkv_wkv: k, v must be N x F");
    Array out({n, f, f});
    auto at = [&](std::size_t t, std::size_t a, std::size_t b) -> double& { return out[(t * f + a) * f + b]; };

    if (mode == WkvMode::direct) {
        std::vector<double> prod(f);
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t a = 0; a < f; ++a)
                for (std::size_t b = 0; b < f; ++b) at(t, a, b) = p.u[a] * k(t, a) * v(t, b);
            std::fill(prod.begin(), prod.end(), 1.0);
            for (std::size_t i = t; i-- > 0;) {
                for (std::size_t a = 0; a < f; ++a)
                    for (std::size_t b = 0; b < f; ++b) at(t, a, b) += prod[a] * k(i, a) * v(i, b);
                for (std::size_t a = 0; a < f; ++a) prod[a] *= p.w[a];
            }
        }
        return out;
    }

    std::vector<double> state(f * f, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = 0; b < f; ++b) {
                const double kv = k(t, a) * v(t, b);
                double& s = state[a * f + b];
                at(t, a, b) = p.u[a] * kv + s;
                s = p.w[a] * s + kv;
            }
    }
    return out;
}

// Recurrent wkv contracted with the receptance: y_t = r_t wkv_t. Keeps a single
// F x F state, so the working set does not depend on N.
template <class T>
void rwkv_wkv_into(MatrixRef<const T> r, MatrixRef<const T> k, MatrixRef<const T> v, std::span<const T> w,
                   std::span<const T> u, MatrixRef<T> out) {
    const std::size_t n = k.rows, f = k.cols;
    if (r.rows != n || v.rows != n || out.rows != n || r.cols != f || v.cols != f || out.cols != f || w.size() != f ||
        u.size() != f)
        throw DimensionError("rwkv_wkv: shape mismatch");
    counted_vector<T> state(f * f, T{0});
    for (std::size_t t = 0; t < n; ++t) {
        T* y = out.data.data() + t * f;
        std::fill(y, y + f, T{0});
        const T* kt = k.data.data() + t * f;
        const T* vt = v.data.data() + t * f;
        const T* rt = r.data.data() + t * f;
        for (std::size_t a = 0; a < f; ++a) {
            T* s = state.data() + a * f;
            const T ka = kt[a], ra = rt[a], ua = u[a], wa = w[a];
            for (std::size_t b = 0; b < f; ++b) {
                const T kv = ka * vt[b];
                y[b] += ra * (ua * kv + s[b]);
                s[b] = wa * s[b] + kv;
            }
        }
    }
}

inline Array rwkv_wkv(const Array& r, const Array& k, const Array& v, const RWKVParams& p, WkvMode mode) {
    p.validate();
    if (mode == WkvMode::recurrent) {
        for (const Array* a : {&r, &k, &v}) require_matrix(a->shape(), "rwkv_wkv");
        if (k.rows() == 0) throw InputTooShort("rwkv_wkv: empty sequence");
        Array out({k.rows(), p.features()});
        rwkv_wkv_into<double>(r.view(), k.view(), v.view(), p.w.values(), p.u.values(), out.view());
        return out;
    }
    const Array states = rwkv_wkv_states(k, v, p, mode);
    const std::size_t n = k.rows(), f = p.features();
    if (r.shape() != k.shape()) throw DimensionError("rwkv_wkv: r must be N x F");
    Array out({n, f});
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t a = 0; a < f; ++a)
            for (std::size_t b = 0; b < f; ++b) out(t, b) += r(t, a) * states[(t * f + a) * f + b];
    return out;
}

// Token shift + projections + wkv over a whole sequence; x_prev of the first
// token is zero.
inline Array rwkv_time_mix(const Array& x, const RWKVParams& p, WkvMode mode) {
    p.validate();
    require_matrix(x.shape(), "rwkv_time_mix");
    const std::size_t n = x.rows(), f = p.features();
    if (x.cols() != f) throw DimensionError("rwkv_time_mix: token width");
    Array r({n, f}), k({n, f}), v({n, f});
    const std::vector<double> zeros(f, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
        const auto prev = t ? x.row(t - 1) : std::span<const double>(zeros);
        const RwkvMix m = rwkv_mix(x.row(t), prev, p);
        std::copy(m.r.values().begin(), m.r.values().end(), r.row(t).begin());
        std::copy(m.k.values().begin(), m.k.values().end(), k.row(t).begin());
        std::copy(m.v.values().begin(), m.v.values().end(), v.row(t).begin());
    }
    return rwkv_wkv(r, k, v, p, mode);
}

} // namespace hyla
