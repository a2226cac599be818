// hyla: verification suites, scaling benchmark, synthetic data generation
// and a demo forward pass with a linear probe.
//
// Exit codes: 0 success, 1 property/acceptance failure, 2 usage error, 3 I/O error.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hyla/bench.hpp"
#include "hyla/model.hpp"
#include "hyla/probe.hpp"
#include "hyla/synthetic.hpp"
#include "hyla/verify.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommonOptions {
    double kappa = hyla::kDefaultKappa;
    std::uint64_t seed = 42;
    std::optional<std::size_t> threads;
};

std::size_t resolve_threads(const CommonOptions& o, std::size_t fallback) {
    if (o.threads) return *o.threads;
    if (const char* env = std::getenv("HYLA_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v > 0) return static_cast<std::size_t>(v);
        } catch (const std::exception&) {
        }
        throw UsageError("HYLA_THREADS must be a positive integer");
    }
    return fallback;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
    cmd->add_option("--kappa", o.kappa, "Curvature (strictly negative)")
        ->check([](const std::string& s) -> std::string {
            try {
                return std::stod(s) < 0.0 ? "" : "kappa must be negative";
            } catch (const std::exception&) {
                return "kappa must be a number";
            }
        });
    cmd->add_option("--seed", o.seed, "Seed of the single random generator");
    cmd->add_option("--threads", o.threads, "Kernel thread count (overrides HYLA_THREADS)")->check(CLI::PositiveNumber);
}

// ---- verify ---------------------------------------------------------------

struct VerifyOptions {
    CommonOptions common;
    std::string scope = "all";
};

int cmd_verify(const VerifyOptions& o) {
    static const std::map<std::string, hyla::VerifyScope> scopes = {{"all", hyla::VerifyScope::all},
                                                                    {"poincare", hyla::VerifyScope::poincare},
                                                                    {"attention", hyla::VerifyScope::attention},
                                                                    {"model", hyla::VerifyScope::model}};
    resolve_threads(o.common, 1);
    std::cout << "verify scope=" << o.scope << " kappa=" << o.common.kappa << " seed=" << o.common.seed << '\n';
    const auto results = hyla::run_verify(scopes.at(o.scope), hyla::Curvature(o.common.kappa), o.common.seed);
    std::size_t failed = 0;
    for (const auto& r : results) {
        std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.suite << '/' << r.name << ": " << r.detail << '\n';
        if (!r.passed) ++failed;
    }
    std::cout << results.size() - failed << '/' << results.size() << " properties passed\n";
    if (failed) {
        for (const auto& r : results)
            if (!r.passed) std::cerr << "failing property: " << r.suite << '/' << r.name << '\n';
        return kExitFailure;
    }
    return kExitOk;
}

// ---- bench ----------------------------------------------------------------

struct BenchOptions {
    CommonOptions common;
    std::vector<std::string> mechanisms;
    std::vector<std::size_t> grid = hyla::kDefaultGrid;
    std::size_t features = hyla::kDefaultBenchFeatures;
    std::size_t repeats = hyla::kDefaultBenchRepeats;
    std::size_t warmup = hyla::kDefaultBenchWarmup;
    std::string out = "bench_out";
    std::optional<std::string> format;
};

int cmd_bench(const BenchOptions& o) {
    hyla::BenchConfig cfg;
    if (!o.mechanisms.empty()) {
        cfg.mechanisms.clear();
        for (const auto& name : o.mechanisms) {
            try {
                cfg.mechanisms.push_back(hyla::parse_mechanism(name));
            } catch (const hyla::DomainError& e) {
                throw UsageError(e.what());
            }
        }
    }
    cfg.ns = o.grid;
    cfg.f = o.features;
    cfg.repeats = o.repeats;
    cfg.warmup = o.warmup;
    cfg.threads = resolve_threads(o.common, hyla::hardware_threads());
    cfg.seed = o.common.seed;
    try {
        cfg.validate();
    } catch (const hyla::Error& e) {
        throw UsageError(e.what());
    }

    std::cout << "bench seed=" << cfg.seed << " F=" << cfg.f << " repeats=" << cfg.repeats << " warmup=" << cfg.warmup
              << " threads=" << cfg.threads << '\n';
    const auto records = hyla::run_scaling_bench(cfg, [](const hyla::BenchRecord& r) {
        std::cout << "  " << std::left << std::setw(16) << hyla::mechanism_name(r.mechanism) << " N=" << std::setw(6)
                  << r.n << " median_ns=" << std::setw(12) << r.runtime_ns << " peak_bytes=" << r.peak_bytes << '\n';
    });
    const auto slopes = hyla::fit_all_slopes(records);

    std::cout << "\n" << std::left << std::setw(16) << "mechanism" << std::setw(10) << "slope" << std::setw(10) << "r2"
              << "note\n";
    for (const auto& s : slopes)
        std::cout << std::setw(16) << hyla::mechanism_name(s.mechanism) << std::setw(10) << std::fixed
                  << std::setprecision(3) << s.slope << std::setw(10) << s.r_squared << (s.flagged() ? "r2 < 0.95" : "")
                  << '\n';

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec) throw hyla::IoError("cannot create " + o.out);
    if (!o.format || *o.format == "csv") hyla::emit_report(fs::path(o.out) / "bench.csv", records, slopes, hyla::ReportFormat::csv);
    if (!o.format || *o.format == "json")
        hyla::emit_report(fs::path(o.out) / "bench.json", records, slopes, hyla::ReportFormat::json);
    std::cout << "reports written to " << o.out << '\n';
    return kExitOk;
}

// ---- gen-data -------------------------------------------------------------

struct GenOptions {
    CommonOptions common;
    hyla::SyntheticDatasetSpec spec;
    std::string out = "synthetic_data";
    bool force = false;
};

int cmd_gen_data(GenOptions o) {
    o.spec.seed = o.common.seed;
    try {
        o.spec.validate();
    } catch (const hyla::Error& e) {
        throw UsageError(e.what());
    }
    const auto samples = hyla::gen_synthetic_skeletons(o.spec);
    hyla::write_dataset(o.out, o.spec, samples, o.force);
    std::cout << "wrote " << samples.size() << " samples to " << o.out << " (seed=" << o.spec.seed
              << ", spec_hash=" << hyla::spec_hash(o.spec) << ")\n";
    return kExitOk;
}

// ---- demo -----------------------------------------------------------------

struct DemoOptions {
    CommonOptions common;
    std::string data;
    std::size_t layers = 2;
    std::size_t channels = 16;
    std::string axis = "temporal";
    std::string qkv = "projection";
    bool shuffle_labels = false;
};

int cmd_demo(const DemoOptions& o) {
    const hyla::Dataset ds = hyla::read_dataset(o.data);
    if (ds.samples.empty()) throw hyla::IoError("dataset has no samples");

    hyla::ModelConfig cfg;
    cfg.layers = o.layers;
    cfg.channels = o.channels;
    cfg.kappa = hyla::Curvature(o.common.kappa);
    cfg.seed = o.common.seed;
    cfg.axis = o.axis == "spatial" ? hyla::AttentionAxis::spatial
               : o.axis == "flattened" ? hyla::AttentionAxis::flattened
                                       : hyla::AttentionAxis::temporal;
    cfg.attention.qkv_mode = o.qkv == "shift" ? hyla::QkvMode::shift : hyla::QkvMode::projection;
    cfg.attention.threads = resolve_threads(o.common, 1);

    hyla::FeatureSet fs = hyla::extract_features(ds.samples, cfg);
    if (o.shuffle_labels) fs.labels = hyla::shuffled_labels(std::move(fs.labels), cfg.seed);
    const hyla::LinearProbe probe = hyla::linear_probe(fs.features, fs.labels, fs.num_classes);
    std::cout << "demo seed=" << cfg.seed << " samples=" << ds.samples.size() << " layers=" << cfg.layers
              << " channels=" << cfg.channels << " axis=" << o.axis << " qkv=" << o.qkv << " kappa=" << o.common.kappa
              << (o.shuffle_labels ? " labels=shuffled" : "") << '\n';
    std::cout << std::fixed << std::setprecision(4) << "probe train accuracy: " << probe.train_accuracy << '\n'
              << "chance baseline: " << 1.0 / fs.num_classes << '\n';
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperbolic linear attention toolkit"};
    app.require_subcommand(1);

    VerifyOptions verify;
    auto* v = app.add_subcommand("verify", "Run the invariant and oracle suites");
    add_common(v, verify.common);
    v->add_option("--scope", verify.scope, "Suites to run")->check(CLI::IsMember({"all", "poincare", "attention", "model"}));

    BenchOptions bench;
    auto* b = app.add_subcommand("bench", "Sequence-length scaling benchmark");
    add_common(b, bench.common);
    b->add_option("--mechanisms", bench.mechanisms, "Comma-separated mechanisms")->delimiter(',');
    b->add_option("--grid", bench.grid, "Comma-separated sequence lengths")->delimiter(',');
    b->add_option("--features", bench.features, "Feature dimension F")->check(CLI::PositiveNumber);
    b->add_option("--repeats", bench.repeats, "Timed repeats per point (>= 5)");
    b->add_option("--warmup", bench.warmup, "Discarded warmup runs");
    b->add_option("--out", bench.out, "Output directory");
    b->add_option("--format", bench.format, "Write only this format")->check(CLI::IsMember({"csv", "json"}));

    GenOptions gen;
    auto* g = app.add_subcommand("gen-data", "Write a synthetic skeleton dataset");
    add_common(g, gen.common);
    g->add_option("--out", gen.out, "Output directory");
    g->add_option("--classes", gen.spec.num_classes, "Number of classes")->check(CLI::PositiveNumber);
    g->add_option("--per-class", gen.spec.samples_per_class, "Samples per class")->check(CLI::PositiveNumber);
    g->add_option("--noise", gen.spec.noise_sigma, "Gaussian noise sigma")->check(CLI::NonNegativeNumber);
    g->add_option("--frames", gen.spec.frames, "Frames T")->check(CLI::PositiveNumber);
    g->add_option("--joints", gen.spec.joints, "Joints V")->check(CLI::PositiveNumber);
    g->add_option("--persons", gen.spec.persons, "Persons M")->check(CLI::PositiveNumber);
    g->add_flag("--force", gen.force, "Overwrite a non-empty output directory");

    DemoOptions demo;
    auto* d = app.add_subcommand("demo", "Forward pass over a dataset plus a linear probe");
    add_common(d, demo.common);
    d->add_option("--data", demo.data, "Dataset directory")->required();
    d->add_option("--layers", demo.layers, "Number of blocks L");
    d->add_option("--channels", demo.channels, "Model channels C")->check(CLI::PositiveNumber);
    d->add_option("--axis", demo.axis, "Token axis")->check(CLI::IsMember({"temporal", "spatial", "flattened"}));
    d->add_option("--qkv", demo.qkv, "Query/key/value construction")->check(CLI::IsMember({"projection", "shift"}));
    d->add_flag("--shuffle-labels", demo.shuffle_labels, "Shuffle labels before fitting (chance control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (v->parsed()) return cmd_verify(verify);
        if (b->parsed()) return cmd_bench(bench);
        if (g->parsed()) return cmd_gen_data(gen);
        if (d->parsed()) return cmd_demo(demo);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const hyla::IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kExitIo;
    } catch (const hyla::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}
