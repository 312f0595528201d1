#include <catch2/catch_amalgamated.hpp>
#include <numbers>

#include "oracles.hpp"
#include "specbench/error.hpp"
#include "specbench/rng.hpp"
#include "specbench/spectral.hpp"
#include "specbench/synthgen.hpp"

using namespace specbench;
using Catch::Matchers::WithinAbs;

namespace {

std::vector<double> random_series(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

constexpr double kTwoPi = 2.0 * std::numbers::pi;

}  // namespace

TEST_CASE("constant series has only a DC coefficient", "[spectral]") {
    const auto dec = dft(std::vector<double>(8, 3.5));
    CHECK_THAT(dec.coeffs[0].real(), WithinAbs(3.5, 1e-12));
    for (std::size_t w = 1; w < 8; ++w) CHECK(std::abs(dec.coeffs[w]) < 1e-12);
}

TEST_CASE("cosine at bin 3 of 16 has half-amplitude conjugate bins", "[spectral]") {
    std::vector<double> y(16);
    for (std::size_t t = 0; t < 16; ++t) y[t] = std::cos(kTwoPi * 3.0 * t / 16.0);
    const auto dec = dft(y);
    CHECK_THAT(std::abs(dec.coeffs[3]), WithinAbs(0.5, 1e-12));
    CHECK_THAT(std::abs(dec.coeffs[13]), WithinAbs(0.5, 1e-12));
}

TEST_CASE("fast transform matches the naive oracle", "[spectral]") {
    Rng rng(11);
    for (std::size_t n : {2, 3, 5, 8, 16, 17, 64, 100, 128}) {
        const auto y = random_series(rng, n);
        const auto fast = dft(y);
        const auto naive = oracle::dft(y);
        double m = 0.0;
        for (std::size_t w = 0; w < n; ++w) m = std::max(m, std::abs(fast.coeffs[w] - naive[w]));
        CHECK(m < 1e-10);
    }
}

TEST_CASE("round trip and Parseval on random series", "[spectral][property]") {
    Rng rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const std::size_t n = 8 + rng.below(249);
        const auto y = random_series(rng, n);
        const auto dec = dft(y);
        CHECK(max_abs_diff(reconstruct_full(dec), y) < 1e-9);
        double energy = 0.0, spec = 0.0;
        for (double v : y) energy += v * v;
        for (const auto& c : dec.coeffs) spec += std::norm(c);
        CHECK(std::fabs(energy - static_cast<double>(n) * spec) / energy < 1e-9);
        for (std::size_t w = 1; w < n; ++w) CHECK(std::abs(dec.coeffs[n - w] - std::conj(dec.coeffs[w])) < 1e-12);
    }
}

TEST_CASE("zero coefficients reconstruct to zeros", "[spectral]") {
    SpectralDecomposition dec;
    dec.n = 6;
    dec.coeffs.assign(6, {0.0, 0.0});
    for (double v : reconstruct_full(dec)) CHECK(v == 0.0);
}

TEST_CASE("single conjugate pair reconstructs a cosine", "[spectral]") {
    SpectralDecomposition dec;
    dec.n = 16;
    dec.coeffs.assign(16, {0.0, 0.0});
    dec.coeffs[3] = dec.coeffs[13] = 0.5;
    const auto y = reconstruct_full(dec);
    for (std::size_t t = 0; t < 16; ++t) CHECK_THAT(y[t], WithinAbs(std::cos(kTwoPi * 3.0 * t / 16.0), 1e-12));
}

TEST_CASE("top-k picks the two generating sinusoids", "[spectral]") {
    const std::size_t n = 64;
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = 3.0 * std::sin(kTwoPi * 5.0 * t / n) + std::cos(kTwoPi * 9.0 * t / n);
    const auto dec = dft(y);
    const auto top = top_k_components(dec, 2);
    REQUIRE(top.size() == 2);
    CHECK(top[0].freq_index == 5);
    CHECK(top[1].freq_index == 9);
    CHECK_THAT(top[0].amplitude, WithinAbs(3.0, 1e-12));
    CHECK_THAT(top[1].amplitude, WithinAbs(1.0, 1e-12));

    // Brute-force amplitude scan of every bin agrees on the order.
    const auto naive = oracle::dft(y);
    std::vector<std::pair<double, std::size_t>> amps;
    for (std::size_t w = 1; w < n / 2; ++w) amps.push_back({2.0 * std::abs(naive[w]), w});
    std::sort(amps.begin(), amps.end(), [](auto a, auto b) { return a.first > b.first; });
    CHECK(amps[0].second == 5);
    CHECK(amps[1].second == 9);
}

TEST_CASE("k=1 on a pure sinusoid returns its bin, too large k throws", "[spectral]") {
    const std::size_t n = 40;
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = 2.0 * std::sin(kTwoPi * 7.0 * t / n);
    const auto dec = dft(y);
    CHECK(top_k_components(dec, 1)[0].freq_index == 7);
    CHECK_THROWS_AS(top_k_components(dec, 2), Error);
    try {
        top_k_components(dec, 2);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::KTooLarge);
    }
}

TEST_CASE("basis series values", "[spectral]") {
    BasisComponent dc{0, 4.0, 0.0, false};
    for (double v : basis_series(dc, 10, IndexRange{0, 10})) CHECK(v == 4.0);

    const std::size_t n = 64;
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = std::sin(kTwoPi * 7.0 * t / n);
    const auto comp = top_k_components(dft(y), 1)[0];
    const auto b = basis_series(comp, n, IndexRange{0, n});
    for (std::size_t t = 0; t < n; ++t) CHECK_THAT(b[t], WithinAbs(y[t], 1e-9));
    for (double a : {comp.phase}) CHECK((a > -std::numbers::pi && a <= std::numbers::pi));
}

TEST_CASE("sum of all basis series reproduces the input", "[spectral][property]") {
    Rng rng(13);
    for (std::size_t n : {32, 33}) {
        const auto y = random_series(rng, n);
        const auto dec = dft(y);
        std::vector<double> acc(n, 0.0);
        for (const auto& c : all_components(dec)) {
            const auto b = basis_series(c, n, IndexRange{0, n});
            for (std::size_t t = 0; t < n; ++t) acc[t] += b[t];
        }
        CHECK(max_abs_diff(acc, y) < 1e-9);
        CHECK(max_abs_diff(partial_sum(dec, ranked_components(dec).size(), IndexRange{0, n}), y) < 1e-9);
    }
}

TEST_CASE("partial sum with k=1 equals the largest basis series", "[spectral]") {
    Rng rng(14);
    const auto y = random_series(rng, 48);
    const auto dec = dft(y);
    const auto naive = oracle::dft(y);
    std::size_t best = 0;
    double best_amp = -1.0;
    for (std::size_t w = 0; w <= 24; ++w) {
        const double a = (w == 0 || w == 24) ? std::abs(naive[w]) : 2.0 * std::abs(naive[w]);
        if (a > best_amp) {
            best_amp = a;
            best = w;
        }
    }
    const auto p1 = partial_sum(dec, 1, IndexRange{0, 48});
    std::vector<double> expect(48);
    for (std::size_t t = 0; t < 48; ++t) {
        const double ang = kTwoPi * static_cast<double>(best * t) / 48.0;
        expect[t] = best == 0 || best == 24 ? (naive[best] * std::polar(1.0, ang)).real()
                                            : 2.0 * (naive[best] * std::polar(1.0, ang)).real();
    }
    CHECK(max_abs_diff(p1, expect) < 1e-9);
}

TEST_CASE("two-sinusoid signal equals its k=2 partial sum", "[spectral]") {
    const std::size_t n = 100;
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) y[t] = 2.0 * std::cos(kTwoPi * 4.0 * t / n) - 5.0 * std::sin(kTwoPi * 11.0 * t / n);
    CHECK(max_abs_diff(partial_sum(dft(y), 2, IndexRange{0, n}), y) < 1e-9);
}

TEST_CASE("partial sum MSE is non-increasing in k", "[spectral][property]") {
    Rng rng(15);
    const auto y = random_series(rng, 60);
    const auto dec = dft(y);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= ranked_components(dec).size(); ++k) {
        const auto p = partial_sum(dec, k, IndexRange{0, 60});
        double mse = 0.0;
        for (std::size_t t = 0; t < 60; ++t) mse += (p[t] - y[t]) * (p[t] - y[t]);
        CHECK(mse <= prev + 1e-12);
        prev = mse;
    }
}

TEST_CASE("compositional split recovers generator components", "[spectral]") {
    const auto ds = gen_sinusoid_dataset(4, 2, 3);
    const ForecastTask task(256, 192);
    for (std::size_t i = 0; i < ds.composed.size(); ++i) {
        const auto& s = ds.composed[i];
        const auto split = build_compositional_split(s, task, 2, 1008, 1, DecompositionWindow::FullSeries);
        const auto trad = split_traditional(s, task, 1008, 1);
        const auto per_series = make_windows(s, task, 1, IndexRange{0, 1008}).size();
        CHECK(split.mode == SplitMode::OOD_COMPOSITIONAL);
        CHECK(split.train.size() == 2 * per_series);
        REQUIRE(split.test.size() == trad.test.size());
        for (std::size_t j = 0; j < split.test.size(); ++j) {
            CHECK(split.test[j].context == trad.test[j].context);
            CHECK(split.test[j].target == trad.test[j].target);
            CHECK(split.test[j].anchor == trad.test[j].anchor);
        }
        // Each train stream matches one generator component.
        for (std::size_t c = 0; c < 2; ++c) {
            const auto& first = split.train[c * per_series];
            double best = std::numeric_limits<double>::infinity();
            for (const auto& comp : ds.components[i]) {
                std::vector<double> ref(comp.values.begin(), comp.values.begin() + 256);
                best = std::min(best, oracle::mae(first.context, ref));
            }
            CHECK(best < 1e-6);
        }
    }
}

TEST_CASE("train-region decomposition stays within the train samples", "[spectral]") {
    std::vector<double> y(300);
    for (std::size_t t = 0; t < 300; ++t) y[t] = std::sin(0.05 * t * t / 300.0);
    const TimeSeries s("s", y);
    const auto dec = decompose_for_split(s, 200, DecompositionWindow::TrainRegion);
    CHECK(dec.n == 200);
    const auto split = build_compositional_split(s, ForecastTask(20, 10), 3, 200, 1);
    for (const auto& w : split.train) CHECK(w.anchor + 10 <= 200);
}

TEST_CASE("transform rejects non-finite input", "[spectral]") {
    const std::vector<double> y{1.0, std::numeric_limits<double>::infinity(), 0.0};
    try {
        dft(y);
        FAIL("expected NonFinite");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::NonFinite);
    }
}
