#include <catch2/catch_amalgamated.hpp>

#include "specbench/error.hpp"
#include "specbench/series.hpp"

using namespace specbench;

namespace {

bool throws_code(ErrorCode code, const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code() == code;
    }
    return false;
}

}  // namespace

TEST_CASE("make_windows enumerates anchors by hand", "[series]") {
    const std::vector<double> v{1, 2, 3, 4, 5};
    const auto w = make_windows(v, ForecastTask(2, 1), 1, IndexRange{0, 5});
    REQUIRE(w.size() == 3);
    CHECK(w[0].context == std::vector<double>{1, 2});
    CHECK(w[0].target == std::vector<double>{3});
    CHECK(w[0].anchor == 2);
    CHECK(w[1].context == std::vector<double>{2, 3});
    CHECK(w[1].target == std::vector<double>{4});
    CHECK(w[2].context == std::vector<double>{3, 4});
    CHECK(w[2].target == std::vector<double>{5});
}

TEST_CASE("make_windows rejects short ranges", "[series]") {
    const std::vector<double> v{1, 2, 3, 4, 5};
    CHECK(throws_code(ErrorCode::RangeTooShort, [&] { make_windows(v, ForecastTask(5, 1), 1, IndexRange{0, 5}); }));
}

TEST_CASE("stride 2 anchors follow the window count formula", "[series]") {
    const std::vector<double> v{0, 1, 2, 3, 4, 5, 6};
    const auto w = make_windows(v, ForecastTask(2, 1), 2, IndexRange{0, 7});
    REQUIRE(w.size() == 3);
    CHECK(w[0].anchor == 2);
    CHECK(w[1].anchor == 4);
    CHECK(w[2].anchor == 6);
    // Anchors 2 and 4 are the ones whose whole target fits when the range ends at 6.
    const auto w6 = make_windows(v, ForecastTask(2, 1), 2, IndexRange{0, 6});
    REQUIRE(w6.size() == 2);
    CHECK(w6[0].anchor == 2);
    CHECK(w6[1].anchor == 4);
}

TEST_CASE("window count follows floor((hi-lo-l-h)/stride)+1", "[series]") {
    std::vector<double> v(97);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i) * 0.5;
    for (std::size_t l : {1, 3, 8}) {
        for (std::size_t h : {1, 4}) {
            for (std::size_t s : {1, 2, 5}) {
                for (std::size_t lo : {0, 7}) {
                    const std::size_t hi = 90;
                    const auto w = make_windows(v, ForecastTask(l, h), s, IndexRange{lo, hi});
                    CHECK(w.size() == (hi - lo - l - h) / s + 1);
                    for (const auto& p : w) CHECK(static_cast<std::size_t>(p.anchor) + h <= hi);
                }
            }
        }
    }
}

TEST_CASE("stride-s windows equal every s-th stride-1 window", "[series][property]") {
    std::vector<double> v(64);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(0.3 * static_cast<double>(i)) + 0.01 * i;
    const ForecastTask task(6, 3);
    const auto all = make_windows(v, task, 1, IndexRange{0, 64});
    for (std::size_t s : {2, 3, 7}) {
        const auto strided = make_windows(v, task, s, IndexRange{0, 64});
        REQUIRE(strided.size() == (all.size() + s - 1) / s);
        for (std::size_t i = 0; i < strided.size(); ++i) {
            CHECK(strided[i].anchor == all[i * s].anchor);
            CHECK(strided[i].context == all[i * s].context);
            CHECK(strided[i].target == all[i * s].target);
        }
    }
}

TEST_CASE("window contents are bit-equal slices", "[series][property]") {
    std::vector<double> v(50);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + static_cast<double>(i));
    const auto w = make_windows(v, ForecastTask(5, 4), 1, IndexRange{3, 50});
    for (const auto& p : w) {
        for (std::size_t i = 0; i < 5; ++i) CHECK(p.context[i] == v[p.anchor - 5 + i]);
        for (std::size_t i = 0; i < 4; ++i) CHECK(p.target[i] == v[p.anchor + i]);
    }
}

TEST_CASE("split_traditional on a length-1200 series", "[series]") {
    std::vector<double> v(1200);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
    const TimeSeries s("s", v);
    const ForecastTask task(256, 192);
    const auto split = split_traditional(s, task, 1008, 1);
    CHECK(split.mode == SplitMode::ID);
    REQUIRE(!split.train.empty());
    for (const auto& w : split.train) CHECK(w.anchor + 192 <= 1008);
    REQUIRE(split.test.size() == 1);
    CHECK(split.test[0].anchor == 1008);
    CHECK(split.test[0].context.back() == 1007.0);
}

TEST_CASE("split at length - h gives exactly one test window", "[series]") {
    std::vector<double> v(300, 1.0);
    const TimeSeries s("s", v);
    const auto split = split_traditional(s, ForecastTask(20, 10), 290, 1);
    CHECK(split.test.size() == 1);
}

TEST_CASE("split invariants hold for many split points", "[series][property]") {
    std::vector<double> v(400);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::cos(0.1 * static_cast<double>(i));
    const TimeSeries s("s", v);
    const ForecastTask task(32, 16);
    for (std::size_t T = 48; T + 16 <= 400; T += 23) {
        const auto split = split_traditional(s, task, T, 3);
        for (const auto& w : split.train) CHECK(static_cast<std::size_t>(w.anchor) + 16 <= T);
        for (const auto& w : split.test) CHECK(static_cast<std::size_t>(w.anchor) >= T);
        CHECK(!split.test.empty());
    }
}

TEST_CASE("split point too small is rejected", "[series]") {
    std::vector<double> v(100, 0.0);
    const TimeSeries s("s", v);
    CHECK(throws_code(ErrorCode::RangeTooShort, [&] { split_traditional(s, ForecastTask(30, 20), 40, 1); }));
}

TEST_CASE("TimeSeries invariants", "[series]") {
    CHECK(throws_code(ErrorCode::InvalidArgument, [] { TimeSeries("", {1.0}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument, [] { TimeSeries("a", {}); }));
    CHECK(throws_code(ErrorCode::NonFinite, [] { TimeSeries("a", {1.0, std::nan("")}); }));
    CHECK(throws_code(ErrorCode::InvalidArgument, [] { ForecastTask(0, 1); }));
}
