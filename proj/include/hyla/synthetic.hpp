#pragma once

// Seeded synthetic skeleton data: each class moves every joint sinusoidally
// around a shared rest pose with its own frequency, per-joint amplitudes and
// phases. Per-sample variation (noise plus amplitude/phase jitter) scales with
// noise_sigma, so noise_sigma = 0 yields identical samples within a class.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyla/array_io.hpp"
#include "hyla/model.hpp"
#include "hyla/rng.hpp"

namespace hyla {

struct SyntheticDatasetSpec {
    std::size_t num_classes = 4;
    std::size_t samples_per_class = 100;
    std::size_t frames = 32;
    std::size_t joints = 6;
    std::size_t persons = 1;
    std::size_t channels = 3;
    double freq_lo = 0.5; // cycles per sequence
    double freq_hi = 3.0;
    double noise_sigma = 0.05;
    std::uint64_t seed = 42;

    void validate() const {
        if (num_classes < 1 || samples_per_class < 1) throw DomainError("synthetic: need at least one class and sample");
        if (frames < 1 || joints < 1 || persons < 1 || channels < 1) throw DomainError("synthetic: extents must be >= 1");
        if (!(freq_lo > 0.0 && freq_hi >= freq_lo)) throw DomainError("synthetic: bad frequency range");
        if (!(noise_sigma >= 0.0)) throw DomainError("synthetic: noise_sigma must be >= 0");
    }
};

inline void to_json(nlohmann::json& j, const SyntheticDatasetSpec& s) {
    j = {{"num_classes", s.num_classes}, {"samples_per_class", s.samples_per_class},
         {"frames", s.frames},           {"joints", s.joints},
         {"persons", s.persons},         {"channels", s.channels},
         {"motion_frequency_range", {s.freq_lo, s.freq_hi}},
         {"noise_sigma", s.noise_sigma}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, SyntheticDatasetSpec& s) {
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.samples_per_class = j.at("samples_per_class").get<std::size_t>();
    s.frames = j.at("frames").get<std::size_t>();
    s.joints = j.at("joints").get<std::size_t>();
    s.persons = j.at("persons").get<std::size_t>();
    s.channels = j.at("channels").get<std::size_t>();
    s.freq_lo = j.at("motion_frequency_range").at(0).get<double>();
    s.freq_hi = j.at("motion_frequency_range").at(1).get<double>();
    s.noise_sigma = j.at("noise_sigma").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
}

// FNV-1a over the canonical JSON text of the spec, as 16 hex digits.
inline std::string spec_hash(const SyntheticDatasetSpec& spec) {
    const std::string text = nlohmann::json(spec).dump();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

struct LabeledSequence {
    SkeletonSequence sequence;
    int label;
};

inline std::vector<LabeledSequence> gen_synthetic_skeletons(const SyntheticDatasetSpec& spec) {
    spec.validate();
    const std::size_t t_n = spec.frames, v_n = spec.joints, m_n = spec.persons, c_n = spec.channels;
    const std::size_t per_frame = v_n * m_n * c_n;
    constexpr double two_pi = 2.0 * std::numbers::pi;

    Rng rng(spec.seed);
    const Array rest = uniform_array<double>(rng, {per_frame}, -1.0, 1.0);
    std::vector<Array> amplitude, phase;
    std::vector<double> freq;
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        freq.push_back(spec.freq_lo + (spec.freq_hi - spec.freq_lo) * (static_cast<double>(c) + 0.5) /
                                          static_cast<double>(spec.num_classes));
        amplitude.push_back(uniform_array<double>(rng, {per_frame}, 0.5, 1.0));
        phase.push_back(uniform_array<double>(rng, {per_frame}, 0.0, two_pi));
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<LabeledSequence> out;
    out.reserve(spec.num_classes * spec.samples_per_class);
    for (std::size_t c = 0; c < spec.num_classes; ++c) {
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            const double amp_jitter = 1.0 + spec.noise_sigma * gauss(rng);
            const double phase_jitter = spec.noise_sigma * gauss(rng);
            Array data({t_n, v_n, m_n, c_n});
            for (std::size_t t = 0; t < t_n; ++t) {
                const double tau = two_pi * freq[c] * static_cast<double>(t) / static_cast<double>(t_n);
                for (std::size_t i = 0; i < per_frame; ++i)
                    data[t * per_frame + i] = rest[i] + amp_jitter * amplitude[c][i] * std::sin(tau + phase[c][i] + phase_jitter) +
                                              spec.noise_sigma * gauss(rng);
            }
            out.push_back({SkeletonSequence(std::move(data)), static_cast<int>(c)});
        }
    }
    return out;
}

inline std::string sample_file_name(std::size_t index) {
    std::ostringstream os;
    os << "sample_" << std::setw(5) << std::setfill('0') << index << ".bin";
    return os.str();
}

// Writes sample_NNNNN.bin files plus manifest.json. A non-empty target
// directory is refused unless force is set, in which case it is cleared first.
inline void write_dataset(const std::filesystem::path& dir, const SyntheticDatasetSpec& spec,
                          const std::vector<LabeledSequence>& samples, bool force) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        if (!fs::is_directory(dir, ec)) throw IoError(dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir, ec)) {
            if (!force) throw IoError(dir.string() + " is not empty (use --force to overwrite)");
            for (const auto& entry : fs::directory_iterator(dir)) fs::remove_all(entry.path(), ec);
        }
    } else if (!fs::create_directories(dir, ec) || ec) {
        throw IoError("cannot create " + dir.string());
    }

    nlohmann::json manifest;
    manifest["generator"] = "hyla-synthetic";
    manifest["spec"] = spec;
    manifest["spec_hash"] = spec_hash(spec);
    manifest["samples"] = nlohmann::json::array();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string name = sample_file_name(i);
        save_array(dir / name, samples[i].sequence.data());
        manifest["samples"].push_back(
            {{"file", name}, {"label", samples[i].label}, {"shape", samples[i].sequence.data().shape()}});
    }
    std::ofstream os(dir / "manifest.json", std::ios::trunc);
    if (!os) throw IoError("cannot write manifest in " + dir.string());
    os << manifest.dump(2) << '\n';
    if (!os) throw IoError("cannot write manifest in " + dir.string());
}

struct Dataset {
    SyntheticDatasetSpec spec;
    std::vector<LabeledSequence> samples;
};

inline Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.json");
    if (!is) throw IoError("missing manifest.json in " + dir.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(is);
        Dataset ds{manifest.at("spec").get<SyntheticDatasetSpec>(), {}};
        for (const auto& entry : manifest.at("samples")) {
            Array data = load_array(dir / entry.at("file").get<std::string>());
            if (data.shape() != entry.at("shape").get<Shape>())
                throw IoError("sample shape disagrees with manifest: " + entry.at("file").get<std::string>());
            ds.samples.push_back({SkeletonSequence(std::move(data)), entry.at("label").get<int>()});
        }
        return ds;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("corrupt manifest: ") + e.what());
    } catch (const DimensionError& e) {
        throw IoError(std::string("corrupt sample: ") + e.what());
    }
}

// Pooled HyLiFormer features for every sample, with freshly initialised
// per-layer weights derived from config.seed.
struct FeatureSet {
    Array features; // samples x F
    std::vector<int> labels;
    int num_classes = 0;
};

inline FeatureSet extract_features(const std::vector<LabeledSequence>& samples, const ModelConfig& config) {
    if (samples.empty()) throw DomainError("extract_features: no samples");
    const Shape dims = samples.front().sequence.data().shape();
    const std::size_t f = model_feature_dim(dims, config);
    const auto weights = init_layer_weights(f, config.layers, config.seed);
    FeatureSet out{Array({samples.size(), f}), {}, 0};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].sequence.data().shape() != dims) throw DimensionError("extract_features: ragged sample shapes");
        const Array pooled = hyliformer_forward(samples[i].sequence, config, weights);
        std::copy(pooled.values().begin(), pooled.values().end(), out.features.row(i).begin());
        out.labels.push_back(samples[i].label);
        out.num_classes = std::max(out.num_classes, samples[i].label + 1);
    }
    return out;
}

inline std::vector<int> shuffled_labels(std::vector<int> labels, std::uint64_t seed) {
    Rng rng(seed);
    std::shuffle(labels.begin(), labels.end(), rng);
    return labels;
}

} // namespace hyla
