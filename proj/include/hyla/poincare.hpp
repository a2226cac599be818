#pragma once

// Poincare-ball geometry with the ball radius taken as -1/kappa: membership,
// the conformal metric factor, Mobius scalar multiplication, and the
// hyperbolic transformation with curvature (HTC) together with its inverse
// and its directional derivative.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "hyla/dense_array.hpp"

namespace hyla {

class Curvature {
public:
    explicit Curvature(double kappa) : kappa_(kappa) {
        if (!(kappa < 0.0) || !std::isfinite(kappa))
            throw DomainError("curvature must be finite and strictly negative, got " + std::to_string(kappa));
    }

    double kappa() const noexcept { return kappa_; }
    // Ball radius -1/kappa.
    double radius() const noexcept { return -1.0 / kappa_; }

    bool operator==(const Curvature&) const = default;

private:
    double kappa_;
};

// Below this fraction of the radius a token is treated as the origin.
inline constexpr double kOriginThreshold = 1e-12;
// Largest value handed to artanh, and the cap on tanh at saturation.
inline constexpr double kUnitClamp = 1.0 - 1e-15;
// artanh arguments above 1 + kArtanhSlack are a domain error rather than round-off.
inline constexpr double kArtanhSlack = 1e-12;

inline bool ball_contains(std::span<const double> x, Curvature c) { return norm(x) < c.radius(); }

inline bool ball_contains(const Array& x, Curvature c) { return ball_contains(x.values(), c); }

// Token matrix whose rows all lie strictly inside the ball of radius -1/kappa.
class PoincareBatch {
public:
    PoincareBatch(Array tokens, Curvature c) : tokens_(std::move(tokens)), curvature_(c) {
        if (tokens_.rank() != 2)
            throw DimensionError("PoincareBatch: tokens must be N x F, got " + shape_string(tokens_.shape()));
        for (std::size_t i = 0; i < tokens_.rows(); ++i) {
            const double n = norm(tokens_.row(i));
            if (!(n < c.radius()))
                throw DomainError("PoincareBatch: row " + std::to_string(i) + " has norm " + std::to_string(n) +
                                  " outside ball radius " + std::to_string(c.radius()));
        }
    }

    const Array& tokens() const noexcept { return tokens_; }
    Curvature curvature() const noexcept { return curvature_; }
    std::size_t size() const noexcept { return tokens_.rows(); }
    std::size_t features() const noexcept { return tokens_.cols(); }

private:
    Array tokens_;
    Curvature curvature_;
};

struct HtcReport {
    Array input_norms;
    Array output_norms;
    double max_output_norm = 0.0;
};

// Conformal factor (2 / (1 + kappa |x|^2))^2 of the ball metric.
inline double metric_factor(std::span<const double> x, Curvature c) {
    const double n = norm(x);
    if (!(n < c.radius())) throw DomainError("metric_factor: point outside ball");
    const double denom = 1.0 + c.kappa() * n * n;
    if (!(denom > 0.0)) throw SingularityError("metric_factor: 1 + kappa |x|^2 <= 0");
    const double f = 2.0 / denom;
    return f * f;
}

inline double metric_factor(const Array& x, Curvature c) { return metric_factor(x.values(), c); }

// r (x) x = (1/sqrt(-kappa)) tanh(r artanh(sqrt(-kappa) |x|)) x/|x|.
inline Array mobius_scalar_mul(double r, const Array& x, Curvature c) {
    const double n = norm(x.values());
    if (!(n < c.radius())) throw DomainError("mobius_scalar_mul: point outside ball");
    const double sc = std::sqrt(-c.kappa());
    if (!(sc * n < 1.0)) throw DomainError("mobius_scalar_mul: sqrt(-kappa) |x| >= 1");
    if (r == 1.0) return x;
    Array out(x.shape());
    if (n == 0.0 || r == 0.0) return out;
    const double t = std::clamp(std::tanh(r * std::atanh(sc * n)), -kUnitClamp, kUnitClamp);
    const double s = t / (sc * n);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s;
    return out;
}

namespace detail {

// Writes the HTC image of one token into out. Saturated tanh is capped so the
// result stays strictly inside the ball after rounding.
inline void htc_row(std::span<const double> x, std::span<double> out, Curvature c) {
    const double r = c.radius();
    const double n = norm(x);
    if (!(n >= kOriginThreshold * r)) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    const double t = std::min(std::tanh(-c.kappa() * n), kUnitClamp);
    double s = r * t / n;
    for (int attempt = 0;; ++attempt) {
        for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s;
        if (norm(std::span<const double>(out)) < r || attempt > 8) break;
        s *= kUnitClamp;
    }
}

inline double guarded_artanh(double z) {
    if (z >= 1.0 + kArtanhSlack) throw DomainError("artanh argument " + std::to_string(z) + " >= 1");
    return std::atanh(std::min(z, kUnitClamp));
}

} // namespace detail

// Maps each row x to -(1/kappa) tanh(-kappa |x|) x/|x|; the origin maps to itself.
inline PoincareBatch htc_forward(const Array& x, Curvature c) {
    if (x.rank() == 0) throw DimensionError("htc_forward: scalar input");
    const Array tokens = x.rank() == 2 ? x : x.reshaped({x.size() / x.shape().back(), x.shape().back()});
    require_finite(tokens, "htc_forward");
    Array out(tokens.shape());
    for (std::size_t i = 0; i < tokens.rows(); ++i) detail::htc_row(tokens.row(i), out.row(i), c);
    return PoincareBatch(std::move(out), c);
}

inline HtcReport htc_report(const Array& x, const PoincareBatch& y) {
    HtcReport rep{row_norms(x), row_norms(y.tokens()), 0.0};
    for (double v : rep.output_norms.values()) rep.max_output_norm = std::max(rep.max_output_norm, v);
    return rep;
}

// Exact inverse of htc_forward: y -> artanh(-kappa |y|)/(-kappa) y/|y|.
inline Array htc_inverse(const PoincareBatch& y) {
    const Curvature c = y.curvature();
    const Array& in = y.tokens();
    Array out(in.shape());
    for (std::size_t i = 0; i < in.rows(); ++i) {
        const auto row = in.row(i);
        const double n = norm(row);
        if (!(n >= kOriginThreshold * c.radius())) continue;
        const double s = detail::guarded_artanh(-c.kappa() * n) / (-c.kappa()) / n;
        auto dst = out.row(i);
        for (std::size_t j = 0; j < row.size(); ++j) dst[j] = row[j] * s;
    }
    return out;
}

// Jacobian-vector product of the single-token HTC map at x along v:
// f'(n) (u.v) u + f(n)/n (v - (u.v) u), with u = x/|x| and f(n) = -(1/kappa) tanh(-kappa n).
inline Array htc_jvp(const Array& x, const Array& v, Curvature c) {
    if (x.size() != v.size()) throw DimensionError("htc_jvp: x and v differ in length");
    const double n = norm(x.values());
    if (!(n >= kOriginThreshold * c.radius())) throw DomainError("htc_jvp: x at the origin");
    const double k = -c.kappa();
    const double t = std::tanh(k * n);
    const double f = t / k;
    const double fprime = 1.0 - t * t;
    double uv = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) uv += x[i] / n * v[i];
    Array out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = x[i] / n;
        out[i] = fprime * uv * u + f / n * (v[i] - uv * u);
    }
    return out;
}

} // namespace hyla
