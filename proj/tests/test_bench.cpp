#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hyla/bench.hpp"

using namespace hyla;

namespace {

std::vector<BenchRecord> power_law(Mechanism m, double c, double p) {
    std::vector<BenchRecord> out;
    for (std::size_t n : kDefaultGrid)
        out.push_back({m, n, 64, static_cast<std::int64_t>(std::llround(c * std::pow(static_cast<double>(n), p))), 9, 0, 1});
    return out;
}

} // namespace

TEST(Slope, ExactPowerLaws) {
    const SlopeReport q = fit_loglog_slope(power_law(Mechanism::softmax, 3.0, 2.0));
    EXPECT_NEAR(q.slope, 2.0, 1e-6);
    EXPECT_NEAR(q.r_squared, 1.0, 1e-9);
    EXPECT_FALSE(q.flagged());
    const SlopeReport l = fit_loglog_slope(power_law(Mechanism::hla, 1000.0, 1.0));
    EXPECT_NEAR(l.slope, 1.0, 1e-6);
    EXPECT_NEAR(std::exp(l.intercept), 1000.0, 1e-3);
    const SlopeReport flat = fit_loglog_slope(power_law(Mechanism::rwkv, 5000.0, 0.0));
    EXPECT_NEAR(flat.slope, 0.0, 1e-12);
}

TEST(Slope, NeedsFourPoints) {
    auto r = power_law(Mechanism::hla, 1.0, 1.0);
    r.resize(3);
    EXPECT_THROW(fit_loglog_slope(r), InsufficientData);
}

TEST(Slope, NoisyDataIsFlagged) {
    std::vector<BenchRecord> r;
    const std::int64_t times[] = {100, 5000, 80, 4000, 150};
    for (std::size_t i = 0; i < 5; ++i) r.push_back({Mechanism::hla, kDefaultGrid[i], 64, times[i], 9, 0, 1});
    EXPECT_TRUE(fit_loglog_slope(r).flagged());
}

TEST(Slope, OnePerMechanismInOrder) {
    auto r = power_law(Mechanism::softmax, 1.0, 2.0);
    const auto l = power_law(Mechanism::ssm_scan, 1.0, 1.0);
    r.insert(r.end(), l.begin(), l.end());
    const auto s = fit_all_slopes(r);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].mechanism, Mechanism::softmax);
    EXPECT_EQ(s[1].mechanism, Mechanism::ssm_scan);
}

TEST(Report, EmptyCsvIsHeaderOnly) { EXPECT_EQ(records_to_csv({}), std::string(kCsvHeader) + "\n"); }

TEST(Report, CsvAndJsonRoundTrip) {
    auto r = power_law(Mechanism::linear_identity, 7.0, 1.1);
    r[2].peak_bytes = 12345;
    r[3].threads = 4;
    EXPECT_EQ(records_from_csv(records_to_csv(r)), r);
    const auto doc = nlohmann::json::parse(report_to_json(r, fit_all_slopes(r)).dump());
    EXPECT_EQ(records_from_json(doc), r);
    EXPECT_EQ(doc["slopes"].size(), 1u);
    EXPECT_EQ(doc["format"], "hyla-bench-report");
}

TEST(Report, MalformedCsvIsIoError) {
    EXPECT_THROW(records_from_csv("nope\n"), IoError);
    EXPECT_THROW(records_from_csv(std::string(kCsvHeader) + "\nhla,1,2\n"), IoError);
    EXPECT_THROW(records_from_csv(std::string(kCsvHeader) + "\nhla,x,2,3,4,5,6\n"), IoError);
}

TEST(Report, EmitWritesBothFormatsAndRejectsBadPath) {
    const auto dir = std::filesystem::temp_directory_path();
    const auto r = power_law(Mechanism::hla, 1.0, 1.0);
    emit_report(dir / "hyla_test_bench.csv", r, {}, ReportFormat::csv);
    std::ifstream is(dir / "hyla_test_bench.csv");
    std::stringstream ss;
    ss << is.rdbuf();
    EXPECT_EQ(records_from_csv(ss.str()), r);
    EXPECT_THROW(emit_report("/nonexistent/dir/bench.csv", r, {}, ReportFormat::csv), IoError);
}

TEST(Mechanisms, NamesRoundTrip) {
    for (Mechanism m : kAllMechanisms) EXPECT_EQ(parse_mechanism(mechanism_name(m)), m);
    EXPECT_THROW(parse_mechanism("transformer"), DomainError);
}

TEST(BenchConfig, Validation) {
    BenchConfig c;
    EXPECT_NO_THROW(c.validate());
    c.ns = {512, 1024, 2048};
    EXPECT_THROW(c.validate(), InsufficientData);
    c.ns = {512, 1024, 2048, 4096};
    EXPECT_THROW(c.validate(), DomainError); // spans only 8x
    c.ns = {512, 1024, 1024, 8192};
    EXPECT_THROW(c.validate(), DomainError);
    c = {};
    c.repeats = 3;
    EXPECT_THROW(c.validate(), DomainError);
    c = {};
    c.mechanisms.clear();
    EXPECT_THROW(c.validate(), DomainError);
}

TEST(Bench, SmallGridCardinalityAndMemoryShape) {
    BenchConfig c;
    c.mechanisms = {Mechanism::softmax, Mechanism::hla};
    c.ns = {128, 256, 512, 2048};
    c.f = 16;
    c.repeats = 5;
    c.warmup = 1;
    const auto r = run_scaling_bench(c);
    ASSERT_EQ(r.size(), 8u);
    std::vector<std::size_t> soft, lin;
    for (const auto& rec : r) {
        EXPECT_GT(rec.runtime_ns, 0);
        EXPECT_EQ(rec.f, 16u);
        (rec.mechanism == Mechanism::softmax ? soft : lin).push_back(rec.peak_bytes);
    }
    // Quadratic scratch for softmax, constant for the reordered form.
    EXPECT_GE(static_cast<double>(soft[3]) / static_cast<double>(soft[0]), 100.0);
    EXPECT_EQ(lin.front(), lin.back());
}
