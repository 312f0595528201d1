#include "specbench/synthgen.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "specbench/error.hpp"
#include "specbench/rng.hpp"

namespace specbench {
namespace {

std::vector<SinusoidSpec> sinusoid_pool(std::size_t length) {
    using D = SyntheticDefaults;
    std::vector<SinusoidSpec> pool;
    for (WaveKind kind : {WaveKind::SIN, WaveKind::COS}) {
        for (int a = D::min_amplitude; a <= D::max_amplitude; ++a) {
            for (int b = D::min_freq; b <= D::max_freq; ++b) {
                if (length > static_cast<std::size_t>(2 * b)) {
                    pool.push_back({kind, static_cast<double>(a), b, length});
                }
            }
        }
    }
    return pool;
}

TimeSeries sum_of(const std::string& id, const std::vector<TimeSeries>& parts) {
    std::vector<double> values(parts.front().size(), 0.0);
    for (const auto& p : parts) {
        for (std::size_t t = 0; t < values.size(); ++t) values[t] += p.values[t];
    }
    return TimeSeries(id, std::move(values));
}

/// Draws the next unused tuple whose frequency is not already in `taken_freqs`.
SinusoidSpec draw_without_replacement(std::vector<SinusoidSpec>& pool, std::vector<bool>& used,
                                      const std::vector<int>& taken_freqs) {
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        bool clash = false;
        for (int f : taken_freqs) clash = clash || f == pool[i].freq;
        if (clash) continue;
        used[i] = true;
        return pool[i];
    }
    fail(ErrorCode::ExhaustedParameterSpace, "not enough distinct sinusoid parameter tuples");
}

}  // namespace

std::string composed_id(const std::string& prefix, std::size_t index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", index);
    return prefix + "_" + buf;
}

std::string component_id(const std::string& parent, std::size_t j) { return parent + "__c" + std::to_string(j); }

TimeSeries gen_sinusoid(const SinusoidSpec& spec, const std::string& id) {
    require(spec.length > static_cast<std::size_t>(2 * spec.freq) && spec.freq > 0, ErrorCode::InvalidArgument,
            "sinusoid needs length > 2 * freq and freq > 0");
    const double n = static_cast<double>(spec.length);
    std::vector<double> values(spec.length);
    for (std::size_t t = 0; t < spec.length; ++t) {
        // Exact phase reduction keeps integer-frequency series on the DFT grid.
        const std::size_t m = (static_cast<std::size_t>(spec.freq) * t) % spec.length;
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / n;
        values[t] = spec.amplitude * (spec.kind == WaveKind::SIN ? std::sin(angle) : std::cos(angle));
    }
    return TimeSeries(id, std::move(values));
}

TimeSeries gen_trend(const TrendSpec& spec, const std::string& id) {
    require(spec.length >= 1, ErrorCode::InvalidArgument, "trend length must be positive");
    const double n = static_cast<double>(spec.length);
    std::vector<double> values(spec.length);
    for (std::size_t t = 0; t < spec.length; ++t) values[t] = spec.slope * static_cast<double>(t) / n;
    return TimeSeries(id, std::move(values));
}

SyntheticDataset gen_sinusoid_dataset(std::size_t num_series, std::size_t composition_size, std::uint64_t seed,
                                      std::size_t length) {
    require(num_series >= 1 && composition_size >= 1, ErrorCode::InvalidArgument,
            "need at least one series and one component");
    SyntheticDataset ds;
    ds.variant = SyntheticVariant::SINUSOID;
    ds.seed = seed;
    auto pool = sinusoid_pool(length);
    Rng rng(derive_seed(seed, hash_string("sinusoid-pool")));
    rng.shuffle(pool.begin(), pool.end());
    std::vector<bool> used(pool.size(), false);

    for (std::size_t i = 0; i < num_series; ++i) {
        const std::string id = composed_id("syn", i);
        std::vector<int> freqs;
        std::vector<SinusoidSpec> specs;
        std::vector<TimeSeries> parts;
        for (std::size_t j = 0; j < composition_size; ++j) {
            auto spec = draw_without_replacement(pool, used, freqs);
            freqs.push_back(spec.freq);
            specs.push_back(spec);
            parts.push_back(gen_sinusoid(spec, component_id(id, j)));
        }
        ds.composed.push_back(sum_of(id, parts));
        ds.test_components.push_back(parts);
        ds.components.push_back(std::move(parts));
        ds.sinusoids.push_back(std::move(specs));
    }
    return ds;
}

SyntheticDataset gen_trend_dataset(SyntheticVariant variant, std::size_t num_series, std::uint64_t seed,
                                   std::size_t length) {
    require(variant == SyntheticVariant::TREND1 || variant == SyntheticVariant::TREND2, ErrorCode::InvalidArgument,
            "trend dataset variant must be TREND1 or TREND2");
    require(num_series >= 1, ErrorCode::InvalidArgument, "need at least one series");
    constexpr int kMaxSlope = SyntheticDefaults::max_abs_slope;
    SyntheticDataset ds;
    ds.variant = variant;
    ds.seed = seed;
    auto pool = sinusoid_pool(length);
    Rng rng(derive_seed(seed, hash_string(to_string(variant))));
    rng.shuffle(pool.begin(), pool.end());
    std::vector<bool> used(pool.size(), false);

    auto draw_slope = [&](int lo, int hi) {
        return static_cast<double>(lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))));
    };

    const std::string prefix = variant == SyntheticVariant::TREND1 ? "trend1" : "trend2";
    for (std::size_t i = 0; i < num_series; ++i) {
        const std::string id = composed_id(prefix, i);
        const auto spec = draw_without_replacement(pool, used, {});
        double train_slope = 0.0;
        double test_slope = 0.0;
        if (variant == SyntheticVariant::TREND1) {
            train_slope = test_slope = draw_slope(-kMaxSlope, kMaxSlope);
        } else {
            train_slope = draw_slope(1, kMaxSlope);
            test_slope = draw_slope(-kMaxSlope, -1);
        }
        auto wave = gen_sinusoid(spec, component_id(id, 0));
        auto train_trend = gen_trend({train_slope, length}, component_id(id, 1));
        auto test_trend = gen_trend({test_slope, length}, component_id(id, 1));

        std::vector<TimeSeries> train_parts{wave, train_trend};
        std::vector<TimeSeries> test_parts{wave, test_trend};
        ds.composed.push_back(sum_of(id, test_parts));
        ds.components.push_back(std::move(train_parts));
        ds.test_components.push_back(std::move(test_parts));
        ds.sinusoids.push_back({spec});
        ds.train_slopes.push_back(train_slope);
        ds.test_slopes.push_back(test_slope);
    }
    return ds;
}

std::string to_string(SyntheticVariant v) {
    switch (v) {
        case SyntheticVariant::SINUSOID: return "sinusoid";
        case SyntheticVariant::TREND1: return "trend1";
        case SyntheticVariant::TREND2: return "trend2";
    }
    return "sinusoid";
}

SyntheticVariant synthetic_variant_from_string(const std::string& s) {
    if (s == "sinusoid") return SyntheticVariant::SINUSOID;
    if (s == "trend1") return SyntheticVariant::TREND1;
    if (s == "trend2") return SyntheticVariant::TREND2;
    fail(ErrorCode::InvalidArgument, "unknown synthetic variant '" + s + "' (sinusoid|trend1|trend2)");
}

}  // namespace specbench
