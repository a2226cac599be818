#pragma once

// Property suites driven by the `verify` subcommand. Each check pairs a kernel
// with an independent route (brute force, the other algebraic form, finite
// differences) and reports the worst observed deviation.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "hyla/attention.hpp"
#include "hyla/model.hpp"
#include "hyla/poincare.hpp"
#include "hyla/rng.hpp"
#include "hyla/rwkv.hpp"
#include "hyla/ssm.hpp"

namespace hyla {

struct PropertyResult {
    std::string suite;
    std::string name;
    bool passed = false;
    std::string detail;
};

enum class VerifyScope { all, poincare, attention, model };

namespace detail {

inline std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(3);
    os << std::scientific << v;
    return os.str();
}

// Random vector with a given norm and a Gaussian direction.
inline Array random_with_norm(Rng& rng, std::size_t f, double target) {
    Array x = normal_array<double>(rng, {f});
    const double n = norm(x.values());
    return scale(x, target / n);
}

inline Array random_ball_tokens(Rng& rng, std::size_t n, std::size_t f, Curvature c, double max_frac = 0.99) {
    Array x({n, f});
    for (std::size_t i = 0; i < n; ++i) {
        const Array row = random_with_norm(rng, f, uniform_real(rng, 0.0, max_frac) * c.radius());
        std::copy(row.values().begin(), row.values().end(), x.row(i).begin());
    }
    return x;
}

inline double log_uniform(Rng& rng, double lo, double hi) {
    return std::exp(uniform_real(rng, std::log(lo), std::log(hi)));
}

inline PropertyResult check(std::string suite, std::string name, bool ok, std::string detail) {
    return {std::move(suite), std::move(name), ok, std::move(detail)};
}

} // namespace detail

inline std::vector<PropertyResult> verify_poincare(Curvature c, std::uint64_t seed) {
    using namespace detail;
    std::vector<PropertyResult> out;
    Rng rng(seed);
    const double r = c.radius();
    const double k = -c.kappa();

    {
        std::size_t failures = 0;
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const std::size_t f = uniform_index(rng, 1, 16);
            const double sc = log_uniform(rng, 1e-3, 1e3);
            const Array x = scale(normal_array<double>(rng, {1, f}), sc);
            const PoincareBatch y = htc_forward(x, c);
            const double n = norm(y.tokens().row(0));
            worst = std::max(worst, n / r);
            if (!(n < r)) ++failures;
        }
        out.push_back(check("poincare", "htc_ball_constraint", failures == 0,
                            std::to_string(failures) + " failures / 10000, max |y|/radius = " + fmt_double(worst)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const Array x = random_with_norm(rng, uniform_index(rng, 1, 16), log_uniform(rng, 1e-3, 1e3) / k);
            const Array y = htc_forward(x.reshaped({1, x.size()}), c).tokens();
            const double nx = norm(x.values()), ny = norm(y.values());
            for (std::size_t j = 0; j < x.size(); ++j) worst = std::max(worst, std::abs(x[j] / nx - y[j] / ny));
        }
        out.push_back(check("poincare", "direction_preserved", worst <= 1e-12, "max unit-vector diff " + fmt_double(worst)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double target = uniform_real(rng, 1e-2, 5.0) / k;
            const Array row = random_with_norm(rng, uniform_index(rng, 1, 16), target);
            const Array xm = row.reshaped({1, row.size()});
            const Array back = htc_inverse(htc_forward(xm, c));
            worst = std::max(worst, max_abs_diff(back, xm) / norm(xm.values()));
        }
        out.push_back(check("poincare", "htc_round_trip", worst <= 1e-10, "max relative error " + fmt_double(worst)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const std::size_t f = uniform_index(rng, 1, 8);
            const Array x = random_with_norm(rng, f, uniform_real(rng, 0.1, 3.0) / k);
            const Array v = normal_array<double>(rng, {f});
            const Array jvp = htc_jvp(x, v, c);
            const double h = 1e-5 * (1.0 + norm(x.values()));
            const Array plus = htc_forward(add(x, scale(v, h)).reshaped({1, f}), c).tokens();
            const Array minus = htc_forward(add(x, scale(v, -h)).reshaped({1, f}), c).tokens();
            Array fd({f});
            for (std::size_t j = 0; j < f; ++j) fd[j] = (plus[j] - minus[j]) / (2 * h);
            worst = std::max(worst, norm(add(fd, scale(jvp, -1.0)).values()) / std::max(norm(jvp.values()), 1e-300));
        }
        out.push_back(check("poincare", "htc_jvp_finite_difference", worst <= 1e-6, "max relative error " + fmt_double(worst)));
    }
    {
        std::vector<double> norms;
        for (double t : {1.0, 2.0, 5.0, 10.0}) {
            Array x({1, 3});
            x[0] = t / k;
            norms.push_back(norm(htc_forward(x, c).tokens().values()));
        }
        bool strict = std::adjacent_find(norms.begin(), norms.end(), std::greater_equal<>()) == norms.end();
        out.push_back(check("poincare", "norm_monotone", strict && norms.back() < r, "norms at -kappa|x| in {1,2,5,10}"));
    }
    {
        const Array origin({4});
        const double lam = metric_factor(origin, c);
        out.push_back(check("poincare", "metric_factor_origin", lam == 4.0, "lambda(0) = " + fmt_double(lam)));
    }
    return out;
}

inline std::vector<PropertyResult> verify_attention(Curvature c, std::uint64_t seed) {
    using namespace detail;
    std::vector<PropertyResult> out;
    Rng rng(seed + 1);

    {
        double worst = 0.0;
        AttentionConfig cfg;
        cfg.kernel = Kernel::identity;
        cfg.normalize = Normalize::none;
        for (int i = 0; i < 20; ++i) {
            const std::size_t n = uniform_index(rng, 1, 128), f = uniform_index(rng, 1, 32);
            const Array q = uniform_array<double>(rng, {n, f}, -1, 1);
            const Array kk = uniform_array<double>(rng, {n, f}, -1, 1);
            const Array v = uniform_array<double>(rng, {n, f}, -1, 1);
            const Array quad = matmul(matmul(q, transpose(kk)), v);
            worst = std::max(worst, max_abs_diff(linear_attention(q, kk, v, cfg), quad));
        }
        out.push_back(check("attention", "reordering_equals_quadratic", worst <= 1e-10, "max |diff| " + fmt_double(worst)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 10; ++i) {
            const std::size_t n = uniform_index(rng, 1, 64), f = uniform_index(rng, 1, 16);
            const Array p = softmax_weights(uniform_array<double>(rng, {n, f}, -2, 2), uniform_array<double>(rng, {n, f}, -2, 2));
            for (std::size_t r = 0; r < n; ++r) {
                const auto row = p.row(r);
                worst = std::max(worst, std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0));
            }
        }
        out.push_back(check("attention", "softmax_rows_sum_to_one", worst <= 1e-12, "max |sum - 1| " + fmt_double(worst)));
    }
    {
        std::size_t failures = 0;
        AttentionConfig cfg;
        cfg.kappa = c;
        for (int i = 0; i < 1000; ++i) {
            const std::size_t n = uniform_index(rng, 1, 16), f = uniform_index(rng, 1, 8);
            const Array x = random_ball_tokens(rng, n, f, c);
            Rng wrng(seed + static_cast<std::uint64_t>(i));
            const auto w = init_projection_weights(f, wrng);
            const PoincareBatch y = hyperbolic_linear_attention(PoincareBatch(x, c), cfg, w);
            for (std::size_t r = 0; r < y.size(); ++r)
                if (!(norm(y.tokens().row(r)) < c.radius())) ++failures;
        }
        out.push_back(check("attention", "hla_ball_constraint", failures == 0, std::to_string(failures) + " rows outside"));
    }
    {
        double worst = 0.0;
        AttentionConfig cfg;
        for (int i = 0; i < 10; ++i) {
            const std::size_t n = uniform_index(rng, 2, 32), f = uniform_index(rng, 1, 8);
            const Array x = uniform_array<double>(rng, {n, f}, -1, 1);
            Rng wrng(seed + 100 + static_cast<std::uint64_t>(i));
            const auto w = init_projection_weights(f, wrng);
            std::vector<std::size_t> perm(n);
            std::iota(perm.begin(), perm.end(), 0);
            std::shuffle(perm.begin(), perm.end(), rng);
            Array xp({n, f});
            for (std::size_t r = 0; r < n; ++r) std::copy(x.row(perm[r]).begin(), x.row(perm[r]).end(), xp.row(r).begin());
            const Qkv a = qkv_views(x, QkvMode::projection, w), b = qkv_views(xp, QkvMode::projection, w);
            const Array ya = linear_attention(a.q, a.k, a.v, cfg), yb = linear_attention(b.q, b.k, b.v, cfg);
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t j = 0; j < f; ++j) worst = std::max(worst, std::abs(yb(r, j) - ya(perm[r], j)));
        }
        out.push_back(check("attention", "permutation_equivariance", worst <= 1e-12, "max |diff| " + fmt_double(worst)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const std::size_t n = uniform_index(rng, 1, 64), f = uniform_index(rng, 1, 8);
            RWKVParams p{uniform_array<double>(rng, {f}, 0, 1), uniform_array<double>(rng, {f}, 0, 1),
                         uniform_array<double>(rng, {f}, 0, 1), uniform_array<double>(rng, {f}, 0, 1),
                         Array::identity(f), Array::identity(f), Array::identity(f), Array::identity(f),
                         uniform_array<double>(rng, {f}, 0.01, 0.99), uniform_array<double>(rng, {f}, -1, 1)};
            const Array kk = uniform_array<double>(rng, {n, f}, -1, 1), v = uniform_array<double>(rng, {n, f}, -1, 1);
            worst = std::max(worst, max_abs_diff(rwkv_wkv_states(kk, v, p, WkvMode::direct),
                                                 rwkv_wkv_states(kk, v, p, WkvMode::recurrent)));
        }
        out.push_back(check("attention", "rwkv_direct_equals_recurrent", worst <= 1e-12, "max |diff| " + fmt_double(worst)));
    }
    {
        double worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const std::size_t s = uniform_index(rng, 1, 16), m = uniform_index(rng, 1, 64);
            SSMParams p{Array({s, s}), uniform_array<double>(rng, {s, 1}, -1, 1), uniform_array<double>(rng, {1, s}, -1, 1),
                        uniform_real(rng, 0.01, 1.0)};
            for (std::size_t j = 0; j < s; ++j) p.a(j, j) = -uniform_real(rng, 0.0, 3.0);
            const DiscreteSSM d = ssm_discretize(p);
            const Array x = uniform_array<double>(rng, {m}, -1, 1);
            worst = std::max(worst, max_abs_diff(ssm_scan(d.a_bar, d.b_bar, p.c, x), ssm_conv(d.a_bar, d.b_bar, p.c, x)));
        }
        out.push_back(check("attention", "ssm_scan_equals_conv", worst <= 1e-10, "max |diff| " + fmt_double(worst)));
    }
    {
        SSMParams p{Array({3, 3}), Array({3, 1}, {1.0, -2.0, 0.5}), Array({1, 3}, {1.0, 1.0, 1.0}), 0.3};
        const DiscreteSSM d = ssm_discretize(p);
        bool exact = d.a_bar == Array::identity(3);
        for (std::size_t i = 0; i < 3; ++i) exact = exact && d.b_bar[i] == p.delta * p.b[i];
        out.push_back(check("attention", "zoh_zero_matrix_limit", exact, "A = 0 gives A_bar = I, B_bar = delta B"));
    }
    return out;
}

inline std::vector<PropertyResult> verify_model(Curvature c, std::uint64_t seed) {
    using namespace detail;
    std::vector<PropertyResult> out;
    Rng rng(seed + 2);
    ModelConfig cfg;
    cfg.kappa = c;
    cfg.layers = 2;
    cfg.channels = 4;
    cfg.seed = seed;

    {
        bool ok = true;
        for (int i = 0; i < 20 && ok; ++i) {
            const Array tokens = scale(normal_array<double>(rng, {12, 8}), log_uniform(rng, 1e-2, 1e2));
            Rng wrng(seed + static_cast<std::uint64_t>(i));
            const BlockTrace tr = hyliformer_block_traced(tokens, cfg, init_projection_weights(8, wrng));
            ok = all_finite(tr.ball->tokens()) && all_finite(tr.attended->tokens()) && all_finite(tr.branch) &&
                 all_finite(tr.output);
        }
        out.push_back(check("model", "pipeline_finite_and_in_ball", ok, "intermediates finite, ball stages validated"));
    }
    {
        ModelConfig z = cfg;
        z.attention.kernel = Kernel::identity;
        z.attention.normalize = Normalize::none;
        z.residual = false;
        const Array y = hyliformer_block(Array({6, 5}), z, ProjectionWeights::identity(5));
        out.push_back(check("model", "origin_fixed_point", y == Array({6, 5}), "zero tokens stay at the origin"));
    }
    {
        const Shape dims{5, 3, 2, 4};
        const SkeletonSequence seq(normal_array<double>(rng, dims));
        const auto w = init_layer_weights(model_feature_dim(dims, cfg), cfg.layers, cfg.seed);
        const Array a = hyliformer_forward(seq, cfg, w), b = hyliformer_forward(seq, cfg, w);
        out.push_back(check("model", "deterministic_forward", a == b, "two runs bit-identical"));
        bool round_trip = true;
        for (AttentionAxis axis : {AttentionAxis::temporal, AttentionAxis::spatial, AttentionAxis::flattened})
            round_trip = round_trip && untokenize(tokenize(seq, axis), axis, dims).data() == seq.data();
        out.push_back(check("model", "tokenize_round_trip", round_trip, "all three axes"));
    }
    return out;
}

inline std::vector<PropertyResult> run_verify(VerifyScope scope, Curvature c, std::uint64_t seed) {
    std::vector<PropertyResult> all;
    auto append = [&all](std::vector<PropertyResult> part) { all.insert(all.end(), part.begin(), part.end()); };
    if (scope == VerifyScope::all || scope == VerifyScope::poincare) append(verify_poincare(c, seed));
    if (scope == VerifyScope::all || scope == VerifyScope::attention) append(verify_attention(c, seed));
    if (scope == VerifyScope::all || scope == VerifyScope::model) append(verify_model(c, seed));
    return all;
}

} // namespace hyla
