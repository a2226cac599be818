#pragma once

// Sequence-length scaling benchmark for the attention and sequence-mixing
// kernels: median wall time and counted working-set bytes per (mechanism, N),
// plus log-log slope fits.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyla/alloc_counter.hpp"
#include "hyla/attention.hpp"
#include "hyla/rng.hpp"
#include "hyla/rwkv.hpp"
#include "hyla/ssm.hpp"

namespace hyla {

enum class Mechanism { softmax, hla, linear_identity, rwkv, ssm_scan, ssm_conv };

inline constexpr Mechanism kAllMechanisms[] = {Mechanism::softmax, Mechanism::hla,      Mechanism::linear_identity,
                                               Mechanism::rwkv,    Mechanism::ssm_scan, Mechanism::ssm_conv};

inline std::string_view mechanism_name(Mechanism m) {
    switch (m) {
    case Mechanism::softmax: return "softmax";
    case Mechanism::hla: return "hla";
    case Mechanism::linear_identity: return "linear_identity";
    case Mechanism::rwkv: return "rwkv";
    case Mechanism::ssm_scan: return "ssm_scan";
    case Mechanism::ssm_conv: return "ssm_conv";
    }
    return "?";
}

inline Mechanism parse_mechanism(std::string_view name) {
    for (Mechanism m : kAllMechanisms)
        if (mechanism_name(m) == name) return m;
    throw DomainError("unknown mechanism '" + std::string(name) + "'");
}

struct BenchRecord {
    Mechanism mechanism;
    std::size_t n = 0;
    std::size_t f = 0;
    std::int64_t runtime_ns = 0; // median over repeats
    std::size_t repeats = 0;
    std::size_t peak_bytes = 0;
    std::size_t threads = 1;

    bool operator==(const BenchRecord&) const = default;
};

struct SlopeReport {
    Mechanism mechanism;
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;

    static constexpr double kMinRSquared = 0.95;
    bool flagged() const { return r_squared < kMinRSquared; }
};

inline const std::vector<std::size_t> kDefaultGrid = {512, 1024, 2048, 4096, 8192};
inline constexpr std::size_t kDefaultBenchFeatures = 64;
inline constexpr std::size_t kDefaultBenchRepeats = 9;
inline constexpr std::size_t kDefaultBenchWarmup = 3;
inline constexpr std::size_t kBenchStateDim = 16;

struct BenchConfig {
    std::vector<Mechanism> mechanisms{std::begin(kAllMechanisms), std::end(kAllMechanisms)};
    std::vector<std::size_t> ns = kDefaultGrid;
    std::size_t f = kDefaultBenchFeatures;
    std::size_t repeats = kDefaultBenchRepeats;
    std::size_t warmup = kDefaultBenchWarmup;
    std::size_t threads = 1;
    std::uint64_t seed = 42;

    void validate() const {
        if (mechanisms.empty()) throw DomainError("bench: no mechanisms selected");
        if (ns.size() < 4) throw InsufficientData("bench: grid needs at least 4 sequence lengths");
        for (std::size_t i = 1; i < ns.size(); ++i)
            if (ns[i] <= ns[i - 1]) throw DomainError("bench: grid must be strictly increasing");
        if (ns.front() == 0 || ns.back() < 16 * ns.front()) throw DomainError("bench: grid must span at least 16x");
        if (repeats < 5) throw DomainError("bench: repeats must be >= 5");
        if (f == 0 || threads == 0) throw DomainError("bench: F and threads must be positive");
    }
};

// Smallest positive step observed on the steady clock.
inline std::int64_t timer_resolution_ns() {
    using clock = std::chrono::steady_clock;
    std::int64_t best = std::numeric_limits<std::int64_t>::max();
    for (int i = 0; i < 200; ++i) {
        const auto a = clock::now();
        auto b = clock::now();
        while (b == a) b = clock::now();
        best = std::min<std::int64_t>(best, std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
    }
    return std::max<std::int64_t>(best, 1);
}

namespace detail {

// Bench inputs for one N, shared by every mechanism: ball-interior tokens, their
// projections, and a scalar input sequence for the SSM kernels.
struct BenchInputs {
    DenseArray<float> q, k, v;
    DenseArray<float> sequence;
};

inline BenchInputs make_bench_inputs(std::size_t n, std::size_t f, std::uint64_t seed) {
    Rng rng(seed ^ (0x51ed270b27f1ull * n));
    DenseArray<float> x({n, f});
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = x.row(i);
        double nrm = 0.0;
        std::vector<double> dir(f);
        for (auto& d : dir) {
            d = gauss(rng);
            nrm += d * d;
        }
        const double radius = uniform_real(rng, 0.0, 0.9) / std::sqrt(nrm);
        for (std::size_t c = 0; c < f; ++c) row[c] = static_cast<float>(dir[c] * radius);
    }
    const float bound = 1.0f / std::sqrt(static_cast<float>(f));
    auto project = [&] { return matmul(x, uniform_array<float>(rng, {f, f}, -bound, bound)); };
    BenchInputs in{project(), project(), project(), DenseArray<float>({n})};
    for (std::size_t i = 0; i < n; ++i) in.sequence[i] = x(i, 0);
    return in;
}

struct BenchKernels {
    DenseArray<float> w, u;
    DenseArray<float> a_bar, b_bar, c;
};

inline BenchKernels make_bench_kernels(std::size_t f, std::uint64_t seed) {
    Rng rng(seed);
    BenchKernels k{uniform_array<float>(rng, {f}, 0.5f, 0.99f), uniform_array<float>(rng, {f}, -0.5f, 0.5f),
                   DenseArray<float>({kBenchStateDim, kBenchStateDim}), DenseArray<float>({kBenchStateDim, 1}),
                   DenseArray<float>({1, kBenchStateDim})};
    SSMParams p{Array({kBenchStateDim, kBenchStateDim}), uniform_array<double>(rng, {kBenchStateDim, 1}, -1.0, 1.0),
                uniform_array<double>(rng, {1, kBenchStateDim}, -1.0, 1.0), 0.1};
    for (std::size_t i = 0; i < kBenchStateDim; ++i) p.a(i, i) = -uniform_real(rng, 0.1, 2.0);
    const DiscreteSSM d = ssm_discretize(p);
    k.a_bar = d.a_bar.cast<float>();
    k.b_bar = d.b_bar.cast<float>();
    k.c = p.c.cast<float>();
    return k;
}

} // namespace detail

template <class Fn>
std::pair<std::int64_t, std::size_t> time_kernel(Fn&& fn, std::size_t warmup, std::size_t repeats) {
    using clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < warmup; ++i) fn();
    std::vector<std::int64_t> times;
    std::size_t peak = 0;
    for (std::size_t i = 0; i < repeats; ++i) {
        AllocScope scope;
        const auto t0 = clock::now();
        fn();
        const auto t1 = clock::now();
        peak = std::max(peak, scope.peak_bytes());
        times.push_back(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
    }
    std::sort(times.begin(), times.end());
    const std::size_t mid = times.size() / 2;
    const std::int64_t median = times.size() % 2 ? times[mid] : (times[mid - 1] + times[mid]) / 2;
    return {std::max<std::int64_t>(median, 1), peak};
}

using BenchProgress = std::function<void(const BenchRecord&)>;

inline std::vector<BenchRecord> run_scaling_bench(const BenchConfig& cfg, const BenchProgress& progress = {}) {
    cfg.validate();
    const std::int64_t resolution = timer_resolution_ns();
    const detail::BenchKernels kern = detail::make_bench_kernels(cfg.f, cfg.seed);
    std::vector<BenchRecord> records;

    AttentionConfig hla_cfg;
    hla_cfg.threads = cfg.threads;
    AttentionConfig ident_cfg = hla_cfg;
    ident_cfg.kernel = Kernel::identity;
    ident_cfg.normalize = Normalize::none;

    for (std::size_t n : cfg.ns) {
        const detail::BenchInputs in = detail::make_bench_inputs(n, cfg.f, cfg.seed);
        DenseArray<float> out({n, cfg.f});
        DenseArray<float> sink;
        const auto q = in.q.view(), k = in.k.view(), v = in.v.view();
        for (Mechanism m : cfg.mechanisms) {
            std::function<void()> fn;
            std::size_t threads = cfg.threads;
            switch (m) {
            case Mechanism::softmax:
                fn = [&] { softmax_attention_into<float>(q, k, v, out.view(), cfg.threads); };
                break;
            case Mechanism::hla:
                fn = [&] { hyperbolic_linear_attention_into<float>(q, k, v, hla_cfg, out.view()); };
                break;
            case Mechanism::linear_identity:
                fn = [&] { linear_attention_into<float>(q, k, v, ident_cfg, out.view()); };
                break;
            case Mechanism::rwkv:
                threads = 1;
                fn = [&] { rwkv_wkv_into<float>(q, k, v, kern.w.values(), kern.u.values(), out.view()); };
                break;
            case Mechanism::ssm_scan:
                threads = 1;
                fn = [&] { sink = ssm_scan(kern.a_bar, kern.b_bar, kern.c, in.sequence); };
                break;
            case Mechanism::ssm_conv:
                threads = 1;
                fn = [&] { sink = ssm_conv(kern.a_bar, kern.b_bar, kern.c, in.sequence); };
                break;
            }
            const auto [median, peak] = time_kernel(fn, cfg.warmup, cfg.repeats);
            if (resolution > median / 100)
                throw ResolutionError("bench: timer resolution " + std::to_string(resolution) + " ns exceeds 1% of " +
                                      std::string(mechanism_name(m)) + " runtime at N=" + std::to_string(n) +
                                      "; increase N or repeats");
            records.push_back({m, n, cfg.f, median, cfg.repeats, peak, threads});
            if (progress) progress(records.back());
        }
    }
    return records;
}

// Ordinary least squares of log(runtime) on log(N).
inline SlopeReport fit_loglog_slope(const std::vector<BenchRecord>& records) {
    if (records.size() < 4) throw InsufficientData("fit_loglog_slope: need at least 4 points");
    const double n = static_cast<double>(records.size());
    double sx = 0, sy = 0;
    for (const auto& r : records) {
        sx += std::log(static_cast<double>(r.n));
        sy += std::log(static_cast<double>(r.runtime_ns));
    }
    const double mx = sx / n, my = sy / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (const auto& r : records) {
        const double dx = std::log(static_cast<double>(r.n)) - mx;
        const double dy = std::log(static_cast<double>(r.runtime_ns)) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw InsufficientData("fit_loglog_slope: all points share one N");
    SlopeReport rep{records.front().mechanism, sxy / sxx, 0.0, 1.0, records.size()};
    rep.intercept = my - rep.slope * mx;
    const double ss_res = std::max(0.0, syy - rep.slope * sxy);
    if (syy > 1e-300) rep.r_squared = 1.0 - ss_res / syy;
    return rep;
}

// One slope per mechanism, in order of first appearance.
inline std::vector<SlopeReport> fit_all_slopes(const std::vector<BenchRecord>& records) {
    std::vector<Mechanism> order;
    for (const auto& r : records)
        if (std::find(order.begin(), order.end(), r.mechanism) == order.end()) order.push_back(r.mechanism);
    std::vector<SlopeReport> out;
    for (Mechanism m : order) {
        std::vector<BenchRecord> sub;
        std::copy_if(records.begin(), records.end(), std::back_inserter(sub),
                     [m](const BenchRecord& r) { return r.mechanism == m; });
        out.push_back(fit_loglog_slope(sub));
    }
    return out;
}

// ---- reports --------------------------------------------------------------

enum class ReportFormat { csv, json };

inline constexpr std::string_view kCsvHeader = "mechanism,N,F,runtime_ns,repeats,peak_bytes,threads";

inline std::string records_to_csv(const std::vector<BenchRecord>& records) {
    std::ostringstream os;
    os << kCsvHeader << '\n';
    for (const auto& r : records)
        os << mechanism_name(r.mechanism) << ',' << r.n << ',' << r.f << ',' << r.runtime_ns << ',' << r.repeats << ','
           << r.peak_bytes << ',' << r.threads << '\n';
    return os.str();
}

inline std::vector<BenchRecord> records_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) throw IoError("bench csv: unexpected header");
    std::vector<BenchRecord> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
        if (cells.size() != 7) throw IoError("bench csv: expected 7 columns in '" + line + "'");
        try {
            out.push_back({parse_mechanism(cells[0]), std::stoul(cells[1]), std::stoul(cells[2]), std::stoll(cells[3]),
                           std::stoul(cells[4]), std::stoul(cells[5]), std::stoul(cells[6])});
        } catch (const std::logic_error& e) {
            throw IoError("bench csv: bad row '" + line + "': " + e.what());
        }
    }
    return out;
}

inline nlohmann::json report_to_json(const std::vector<BenchRecord>& records, const std::vector<SlopeReport>& slopes) {
    nlohmann::json doc;
    doc["format"] = "hyla-bench-report";
    doc["version"] = 1;
    doc["records"] = nlohmann::json::array();
    for (const auto& r : records)
        doc["records"].push_back({{"mechanism", mechanism_name(r.mechanism)},
                                  {"N", r.n},
                                  {"F", r.f},
                                  {"runtime_ns", r.runtime_ns},
                                  {"repeats", r.repeats},
                                  {"peak_bytes", r.peak_bytes},
                                  {"threads", r.threads}});
    doc["slopes"] = nlohmann::json::array();
    for (const auto& s : slopes)
        doc["slopes"].push_back({{"mechanism", mechanism_name(s.mechanism)},
                                 {"slope", s.slope},
                                 {"intercept", s.intercept},
                                 {"r_squared", s.r_squared},
                                 {"points", s.points},
                                 {"flagged", s.flagged()}});
    return doc;
}

inline std::vector<BenchRecord> records_from_json(const nlohmann::json& doc) {
    try {
        std::vector<BenchRecord> out;
        for (const auto& r : doc.at("records"))
            out.push_back({parse_mechanism(r.at("mechanism").get<std::string>()), r.at("N").get<std::size_t>(),
                           r.at("F").get<std::size_t>(), r.at("runtime_ns").get<std::int64_t>(),
                           r.at("repeats").get<std::size_t>(), r.at("peak_bytes").get<std::size_t>(),
                           r.at("threads").get<std::size_t>()});
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("bench json: ") + e.what());
    }
}

inline void emit_report(const std::filesystem::path& path, const std::vector<BenchRecord>& records,
                        const std::vector<SlopeReport>& slopes, ReportFormat format) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open " + path.string() + " for writing");
    if (format == ReportFormat::csv)
        os << records_to_csv(records);
    else
        os << report_to_json(records, slopes).dump(2) << '\n';
    if (!os) throw IoError("write failed for " + path.string());
}

} // namespace hyla
