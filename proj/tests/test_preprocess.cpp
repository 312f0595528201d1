#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "specbench/error.hpp"
#include "specbench/preprocess.hpp"
#include "specbench/rng.hpp"

#ifndef SPECBENCH_TEST_DATA
#define SPECBENCH_TEST_DATA "tests/data"
#endif

using namespace specbench;
using Catch::Matchers::WithinAbs;

namespace {

ErrorCode code_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

std::filesystem::path temp_path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "specbench_tests";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::vector<double> white_noise(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

std::vector<double> cumsum(std::vector<double> v) {
    for (std::size_t i = 1; i < v.size(); ++i) v[i] += v[i - 1];
    return v;
}

}  // namespace

TEST_CASE("CSV parsing groups rows by id in file order", "[preprocess]") {
    const auto rows = parse_csv("unique_id,ds,y\na,2020-01-01,1\nb,2020-01-01,10\na,2020-01-02,2\nb,x,20\na,3,3\nb,y,30\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].series.id == "a");
    CHECK(rows[0].series.values == std::vector<double>{1, 2, 3});
    CHECK(rows[1].series.values == std::vector<double>{10, 20, 30});
    CHECK(rows[0].stamps[1] == "2020-01-02");
}

TEST_CASE("CSV schema errors", "[preprocess]") {
    CHECK(code_of([] { parse_csv("unique_id,ds\na,1\n"); }) == ErrorCode::SchemaError);
    CHECK(code_of([] { parse_csv("unique_id,ds,y\na,1,abc\n"); }) == ErrorCode::SchemaError);
    CHECK(code_of([] { parse_csv(""); }) == ErrorCode::EmptyFile);
}

TEST_CASE("CSV round trip is bit-exact", "[preprocess]") {
    Rng rng(3);
    std::vector<TimeSeries> series;
    for (int i = 0; i < 3; ++i) {
        auto v = white_noise(rng, 17);
        v[0] = 1e-300;
        v[1] = -0.1;
        series.emplace_back("id_" + std::to_string(i), v);
    }
    const auto path = temp_path("roundtrip.csv");
    write_csv(path, series);
    const auto back = load_csv(path);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back[i].id == series[i].id);
        CHECK(back[i].values == series[i].values);
    }
    for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("segmentation counts and slices", "[preprocess]") {
    std::vector<double> v(1584);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 0.25;
    const TimeSeries s("p", v);
    const auto segs = segment(s);
    REQUIRE(segs.size() == 2);
    CHECK(segs[0].offset == 0);
    CHECK(segs[1].offset == 528);
    for (const auto& g : segs) {
        REQUIRE(g.values.size() == 1056);
        for (std::size_t i = 0; i < 1056; ++i) CHECK(g.values[i] == v[g.offset + i]);
    }
    CHECK(segs[1].id() == "p_528");
    CHECK(segment(TimeSeries("q", std::vector<double>(1056, 1.0))).size() == 1);
    CHECK(code_of([] { segment(TimeSeries("q", std::vector<double>(1055, 1.0))); }) == ErrorCode::TooShort);
}

TEST_CASE("mean ACF matches the direct sum", "[preprocess]") {
    std::vector<double> sq;
    for (int rep = 0; rep < 10; ++rep)
        for (double v : {1.0, 1.0, -1.0, -1.0}) sq.push_back(v);
    // Direct oracle: biased autocorrelation of a zero-mean square wave.
    const std::size_t n = sq.size();
    double expected = 0.0;
    for (std::size_t lag = 1; lag <= 4; ++lag) {
        double num = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) num += sq[t] * sq[t + lag];
        expected += num / static_cast<double>(n);
    }
    expected /= 4.0;
    CHECK_THAT(mean_acf(sq, 4), WithinAbs(expected, 1e-12));
    CHECK(code_of([] { mean_acf(std::vector<double>(20, 2.0), 3); }) == ErrorCode::ZeroVariance);
}

TEST_CASE("ADF matches the frozen reference implementation", "[preprocess][adf]") {
    std::ifstream f(std::string(SPECBENCH_TEST_DATA) + "/adf_reference.json");
    REQUIRE(f.good());
    const auto ref = nlohmann::json::parse(f);
    std::size_t n = 0;
    for (const auto& c : ref.at("cases")) {
        const auto values = c.at("values").get<std::vector<double>>();
        const auto r = adf_test(values, ref.at("alpha").get<double>());
        INFO("case " << n << " kind " << c.at("kind").get<std::string>());
        CHECK_THAT(r.statistic, WithinAbs(c.at("statistic").get<double>(), 1e-6));
        CHECK_THAT(r.p_value, WithinAbs(c.at("p_value").get<double>(), 1e-6));
        CHECK(r.lag_used == c.at("lag_used").get<std::size_t>());
        CHECK(r.stationary == c.at("stationary").get<bool>());
        ++n;
    }
    CHECK(n == 50);
}

TEST_CASE("ADF separates noise from random walks", "[preprocess][adf]") {
    Rng rng(99);
    const auto noise = white_noise(rng, 1056);
    CHECK(adf_test(noise).stationary);
    CHECK_FALSE(adf_test(cumsum(noise)).stationary);
    CHECK(code_of([] { adf_test(std::vector<double>(100, 4.0)); }) == ErrorCode::DegenerateInput);
    const auto r = adf_test(noise, 0.05);
    CHECK(r.stationary == (r.p_value < 0.05));
}

TEST_CASE("series selection keeps the most autocorrelated stationary segments", "[preprocess]") {
    Rng rng(5);
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < 6; ++i) {
        std::vector<double> v(1056);
        for (std::size_t t = 0; t < v.size(); ++t)
            v[t] = std::sin(2.0 * 3.141592653589793 * static_cast<double>(t) / (20.0 + 4.0 * i)) + 0.1 * rng.normal();
        segs.push_back({"sine" + std::to_string(i), 0, v});
    }
    for (std::size_t i = 0; i < 6; ++i) segs.push_back({"walk" + std::to_string(i), 0, cumsum(white_noise(rng, 1056))});
    const auto kept = select_series(segs, 4);
    REQUIRE(kept.size() == 4);
    for (const auto& s : kept) CHECK(s.parent_id.rfind("sine", 0) == 0);
    for (std::size_t i = 1; i < kept.size(); ++i) CHECK(mean_acf(kept[i - 1].values) >= mean_acf(kept[i].values));
    CHECK(code_of([&] { select_series(segs, 7); }) == ErrorCode::NotEnoughStationary);
}

TEST_CASE("selection truncates to keep", "[preprocess]") {
    Rng rng(6);
    std::vector<Segment> segs;
    for (std::size_t i = 0; i < 150; ++i) segs.push_back({"n" + std::to_string(i), i, white_noise(rng, 200)});
    const auto kept = select_series(segs, 100, 0.001, 10);
    CHECK(kept.size() == 100);
}
