#pragma once

// HTC -> hyperbolic linear attention -> inverse HTC blocks over skeleton
// sequences, stacked and mean-pooled into one feature vector.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hyla/attention.hpp"
#include "hyla/poincare.hpp"
#include "hyla/rng.hpp"

namespace hyla {

inline constexpr std::size_t kDefaultFrames = 64;
inline constexpr std::size_t kDefaultJoints = 48;
inline constexpr std::size_t kDefaultPersons = 8;
inline constexpr std::size_t kDefaultLayers = 4;
inline constexpr std::size_t kDefaultChannels = 96;
inline constexpr double kDefaultKappa = -1.0;

// [T x V x M x C] joint features: frames, joints, persons, channels.
class SkeletonSequence {
public:
    explicit SkeletonSequence(Array data) : data_(std::move(data)) {
        if (data_.rank() != 4) throw DimensionError("SkeletonSequence: expected [T,V,M,C], got " + shape_string(data_.shape()));
        for (std::size_t e : data_.shape())
            if (e == 0) throw DimensionError("SkeletonSequence: every extent must be >= 1");
        require_finite(data_, "SkeletonSequence");
    }

    const Array& data() const noexcept { return data_; }
    std::size_t frames() const { return data_.extent(0); }
    std::size_t joints() const { return data_.extent(1); }
    std::size_t persons() const { return data_.extent(2); }
    std::size_t channels() const { return data_.extent(3); }

    double at(std::size_t t, std::size_t v, std::size_t m, std::size_t c) const {
        return data_[((t * joints() + v) * persons() + m) * channels() + c];
    }

private:
    Array data_;
};

enum class AttentionAxis { temporal, spatial, flattened };

struct ModelConfig {
    std::size_t layers = kDefaultLayers;
    std::size_t channels = kDefaultChannels;
    Curvature kappa{kDefaultKappa};
    AttentionAxis axis = AttentionAxis::temporal;
    AttentionConfig attention{};
    std::uint64_t seed = 42;
    bool residual = true;

    AttentionConfig attention_for_model() const {
        AttentionConfig a = attention;
        a.kappa = kappa;
        a.feature_dim = 0;
        return a;
    }
};

struct TokenLayout {
    std::size_t tokens;
    std::size_t features;
};

inline TokenLayout token_layout(const Shape& dims, AttentionAxis axis) {
    const std::size_t t = dims[0], v = dims[1], m = dims[2], c = dims[3];
    switch (axis) {
    case AttentionAxis::temporal:
        return {t, v * m * c};
    case AttentionAxis::spatial:
        return {v * m, t * c};
    case AttentionAxis::flattened:
        return {t * v * m, c};
    }
    throw DomainError("unknown attention axis");
}

// temporal: one token per frame; spatial: one token per (joint, person) with
// features ordered (frame, channel); flattened: one token per (frame, joint, person).
inline Array tokenize(const SkeletonSequence& seq, AttentionAxis axis) {
    const TokenLayout lay = token_layout(seq.data().shape(), axis);
    if (axis != AttentionAxis::spatial) return seq.data().reshaped({lay.tokens, lay.features});
    const std::size_t t_n = seq.frames(), v_n = seq.joints(), m_n = seq.persons(), c_n = seq.channels();
    Array out({lay.tokens, lay.features});
    for (std::size_t t = 0; t < t_n; ++t)
        for (std::size_t v = 0; v < v_n; ++v)
            for (std::size_t m = 0; m < m_n; ++m)
                for (std::size_t c = 0; c < c_n; ++c) out(v * m_n + m, t * c_n + c) = seq.at(t, v, m, c);
    return out;
}

inline SkeletonSequence untokenize(const Array& tokens, AttentionAxis axis, const Shape& dims) {
    if (dims.size() != 4) throw DimensionError("untokenize: dims must be [T,V,M,C]");
    const TokenLayout lay = token_layout(dims, axis);
    if (tokens.rank() != 2 || tokens.rows() != lay.tokens || tokens.cols() != lay.features)
        throw DimensionError("untokenize: token matrix " + shape_string(tokens.shape()) + " does not match " +
                             shape_string(dims));
    if (axis != AttentionAxis::spatial) return SkeletonSequence(tokens.reshaped(dims));
    const std::size_t t_n = dims[0], v_n = dims[1], m_n = dims[2], c_n = dims[3];
    Array out(dims);
    for (std::size_t t = 0; t < t_n; ++t)
        for (std::size_t v = 0; v < v_n; ++v)
            for (std::size_t m = 0; m < m_n; ++m)
                for (std::size_t c = 0; c < c_n; ++c)
                    out[((t * v_n + v) * m_n + m) * c_n + c] = tokens(v * m_n + m, t * c_n + c);
    return SkeletonSequence(std::move(out));
}

// Projection weights drawn from uniform(-1/sqrt(F), 1/sqrt(F)).
inline ProjectionWeights init_projection_weights(std::size_t f, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(f));
    auto draw = [&] { return uniform_array<double>(rng, {f, f}, -bound, bound); };
    Array q = draw();
    Array k = draw();
    Array v = draw();
    return {std::move(q), std::move(k), std::move(v)};
}

inline std::vector<ProjectionWeights> init_layer_weights(std::size_t f, std::size_t layers, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<ProjectionWeights> out;
    out.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) out.push_back(init_projection_weights(f, rng));
    return out;
}

// Fixed random lift of the per-joint channels to the model width. Identity
// when the sequence already has `channels` channels.
inline SkeletonSequence embed_channels(const SkeletonSequence& seq, std::size_t channels, std::uint64_t seed) {
    const std::size_t c_in = seq.channels();
    if (c_in == channels) return seq;
    Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
    const double bound = 1.0 / std::sqrt(static_cast<double>(c_in));
    const Array lift = uniform_array<double>(rng, {c_in, channels}, -bound, bound);
    const std::size_t rows = seq.data().size() / c_in;
    const Array lifted = matmul(seq.data().reshaped({rows, c_in}), lift);
    return SkeletonSequence(
        lifted.reshaped({seq.frames(), seq.joints(), seq.persons(), channels}));
}

inline std::size_t model_feature_dim(const Shape& dims, const ModelConfig& config) {
    return token_layout({dims[0], dims[1], dims[2], config.channels}, config.axis).features;
}

struct BlockTrace {
    std::optional<PoincareBatch> ball;
    std::optional<PoincareBatch> attended;
    Array branch;
    Array output;
};

// tokens -> HTC -> HLA -> inverse HTC, plus the residual tokens when enabled.
// In shift mode the attended sequence is N - 3 long and lines up with tokens[3:].
inline BlockTrace hyliformer_block_traced(const Array& tokens, const ModelConfig& config, const ProjectionWeights& weights) {
    require_finite(tokens, "hyliformer_block");
    BlockTrace tr;
    tr.ball = htc_forward(tokens, config.kappa);
    tr.attended = hyperbolic_linear_attention(*tr.ball, config.attention_for_model(), weights);
    tr.branch = htc_inverse(*tr.attended);
    if (!config.residual) {
        tr.output = tr.branch;
    } else {
        const std::size_t offset = tokens.rows() - tr.branch.rows();
        tr.output = add(slice_rows(tokens, offset, tr.branch.rows()), tr.branch);
    }
    require_finite(tr.output, "hyliformer_block");
    return tr;
}

inline Array hyliformer_block(const Array& tokens, const ModelConfig& config, const ProjectionWeights& weights) {
    return hyliformer_block_traced(tokens, config, weights).output;
}

inline Array hyliformer_forward(const SkeletonSequence& seq, const ModelConfig& config,
                                const std::vector<ProjectionWeights>& weights) {
    if (weights.size() != config.layers)
        throw DimensionError("hyliformer_forward: " + std::to_string(weights.size()) + " weight sets for " +
                             std::to_string(config.layers) + " layers");
    Array tokens = tokenize(embed_channels(seq, config.channels, config.seed), config.axis);
    if (config.attention.qkv_mode == QkvMode::shift && tokens.rows() < 3 * config.layers + 1)
        throw InputTooShort("hyliformer_forward: shift mode consumes 3 tokens per layer");
    for (const auto& w : weights) tokens = hyliformer_block(tokens, config, w);
    return mean_rows(tokens);
}

} // namespace hyla
