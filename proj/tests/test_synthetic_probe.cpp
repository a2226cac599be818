#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "hyla/probe.hpp"
#include "hyla/synthetic.hpp"

using namespace hyla;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("hyla_test_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

Array flatten_samples(const std::vector<LabeledSequence>& s) {
    const std::size_t f = s.front().sequence.data().size();
    Array out({s.size(), f});
    for (std::size_t i = 0; i < s.size(); ++i)
        std::copy(s[i].sequence.data().values().begin(), s[i].sequence.data().values().end(), out.row(i).begin());
    return out;
}

std::vector<int> labels_of(const std::vector<LabeledSequence>& s) {
    std::vector<int> out;
    for (const auto& x : s) out.push_back(x.label);
    return out;
}

} // namespace

TEST(Synthetic, ShapesAndLabels) {
    SyntheticDatasetSpec spec;
    spec.samples_per_class = 5;
    const auto s = gen_synthetic_skeletons(spec);
    ASSERT_EQ(s.size(), 20u);
    EXPECT_EQ(s[0].sequence.data().shape(), (Shape{32, 6, 1, 3}));
    EXPECT_EQ(s[0].label, 0);
    EXPECT_EQ(s[19].label, 3);
}

TEST(Synthetic, NoiseFreeSamplesOfAClassAreIdentical) {
    SyntheticDatasetSpec spec;
    spec.noise_sigma = 0.0;
    spec.samples_per_class = 3;
    const auto a = gen_synthetic_skeletons(spec), b = gen_synthetic_skeletons(spec);
    EXPECT_EQ(a[0].sequence.data(), a[1].sequence.data());
    EXPECT_EQ(a[0].sequence.data(), b[0].sequence.data());
    EXPECT_NE(a[0].sequence.data(), a[3].sequence.data());
}

TEST(Synthetic, SeedsDiffer) {
    SyntheticDatasetSpec spec;
    spec.samples_per_class = 2;
    const auto a = gen_synthetic_skeletons(spec);
    spec.seed = 43;
    const auto b = gen_synthetic_skeletons(spec);
    EXPECT_NE(a[0].sequence.data(), b[0].sequence.data());
}

TEST(Synthetic, SpecValidation) {
    SyntheticDatasetSpec spec;
    spec.noise_sigma = -1.0;
    EXPECT_THROW(gen_synthetic_skeletons(spec), DomainError);
    spec = {};
    spec.freq_lo = 0.0;
    EXPECT_THROW(gen_synthetic_skeletons(spec), DomainError);
}

TEST(Synthetic, HashTracksSpec) {
    SyntheticDatasetSpec a, b;
    EXPECT_EQ(spec_hash(a), spec_hash(b));
    EXPECT_EQ(spec_hash(a).size(), 16u);
    b.noise_sigma = 0.1;
    EXPECT_NE(spec_hash(a), spec_hash(b));
}

TEST(Dataset, WriteReadRoundTrip) {
    SyntheticDatasetSpec spec;
    spec.samples_per_class = 3;
    const auto s = gen_synthetic_skeletons(spec);
    const fs::path dir = fresh_dir("roundtrip");
    write_dataset(dir, spec, s, false);
    const Dataset ds = read_dataset(dir);
    ASSERT_EQ(ds.samples.size(), s.size());
    EXPECT_EQ(spec_hash(ds.spec), spec_hash(spec));
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(ds.samples[i].label, s[i].label);
        EXPECT_EQ(ds.samples[i].sequence.data(), s[i].sequence.data());
    }
    EXPECT_THROW(write_dataset(dir, spec, s, false), IoError);
    EXPECT_NO_THROW(write_dataset(dir, spec, s, true));
    fs::remove_all(dir);
}

TEST(Dataset, CorruptManifestIsIoError) {
    const fs::path dir = fresh_dir("corrupt");
    EXPECT_THROW(read_dataset(dir), IoError);
    fs::create_directories(dir);
    std::ofstream(dir / "manifest.json") << "{\"spec\": 3";
    EXPECT_THROW(read_dataset(dir), IoError);
    fs::remove_all(dir);
}

TEST(Probe, SeparableClustersAreFit) {
    Rng rng(1);
    Array x({40, 2});
    std::vector<int> y;
    for (std::size_t i = 0; i < 40; ++i) {
        const int label = i < 20 ? 0 : 1;
        x(i, 0) = (label ? 5.0 : -5.0) + uniform_real(rng, -1, 1);
        x(i, 1) = uniform_real(rng, -1, 1);
        y.push_back(label);
    }
    const LinearProbe p = linear_probe(x, y, 2);
    EXPECT_EQ(p.train_accuracy, 1.0);
    EXPECT_EQ(p.predict(Array::vector({4.0, 0.0}).values()), 1);
}

TEST(Probe, ShuffledLabelsNearChance) {
    // Low-dimensional features so the probe cannot memorise the permutation.
    Rng rng(2);
    double total = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        Array x = normal_array<double>(rng, {400, 3});
        std::vector<int> y;
        for (int i = 0; i < 400; ++i) y.push_back(i % 4);
        y = shuffled_labels(y, rng());
        const double acc = linear_probe(x, y, 4).train_accuracy;
        EXPECT_NEAR(acc, 0.25, 0.10);
        total += acc;
    }
    EXPECT_NEAR(total / trials, 0.25, 0.05);
}

TEST(Probe, RawSyntheticFeaturesAreSeparable) {
    const auto s = gen_synthetic_skeletons({});
    EXPECT_GE(linear_probe(flatten_samples(s), labels_of(s), 4).train_accuracy, 0.9);
}

TEST(Probe, Errors) {
    EXPECT_THROW(linear_probe(Array({3, 2}), {0, 1}, 2), DimensionError);
    EXPECT_THROW(linear_probe(Array({2, 2}), {0, 5}, 2), DomainError);
}

TEST(EndToEnd, ModelFeaturesBeatShuffledControl) {
    SyntheticDatasetSpec spec;
    spec.samples_per_class = 40;
    const auto s = gen_synthetic_skeletons(spec);
    ModelConfig c;
    c.layers = 2;
    c.channels = 16;
    const FeatureSet fs = extract_features(s, c);
    EXPECT_EQ(fs.num_classes, 4);
    const double acc = linear_probe(fs.features, fs.labels, 4).train_accuracy;
    const double ctrl = linear_probe(fs.features, shuffled_labels(fs.labels, 7), 4).train_accuracy;
    EXPECT_GE(acc, 0.9);
    EXPECT_GE(acc - ctrl, 0.3);
}
