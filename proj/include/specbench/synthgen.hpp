#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "specbench/series.hpp"

namespace specbench {

enum class WaveKind { SIN, COS };

struct SinusoidSpec {
    WaveKind kind = WaveKind::SIN;
    double amplitude = 1.0;
    int freq = 3;  ///< whole cycles over the series
    std::size_t length = 0;
};

struct TrendSpec {
    double slope = 0.0;
    std::size_t length = 0;
};

enum class SyntheticVariant { SINUSOID, TREND1, TREND2 };

/// Generator defaults for the synthetic benchmark.
struct SyntheticDefaults {
    static constexpr std::size_t num_series = 100;
    static constexpr std::size_t composition_size = 2;
    static constexpr std::size_t series_length = 1200;
    static constexpr std::size_t horizon = 192;
    static constexpr int min_amplitude = 1;
    static constexpr int max_amplitude = 32;
    static constexpr int min_freq = 3;
    static constexpr int max_freq = 32;
    static constexpr int max_abs_slope = 32;
};

/// Generated dataset. `components[i]` are the train-phase basis series;
/// `test_components[i]` sum exactly to `composed[i]`. The two differ only for
/// TREND2, whose test compositions use slopes from a disjoint pool.
struct SyntheticDataset {
    std::vector<TimeSeries> composed;
    std::vector<std::vector<TimeSeries>> components;
    std::vector<std::vector<TimeSeries>> test_components;
    std::vector<std::vector<SinusoidSpec>> sinusoids;
    std::vector<double> train_slopes;  ///< empty for SINUSOID
    std::vector<double> test_slopes;
    SyntheticVariant variant = SyntheticVariant::SINUSOID;
    std::uint64_t seed = 0;
};

TimeSeries gen_sinusoid(const SinusoidSpec& spec, const std::string& id = "sinusoid");
TimeSeries gen_trend(const TrendSpec& spec, const std::string& id = "trend");

SyntheticDataset gen_sinusoid_dataset(std::size_t num_series, std::size_t composition_size, std::uint64_t seed,
                                      std::size_t length = SyntheticDefaults::series_length);

SyntheticDataset gen_trend_dataset(SyntheticVariant variant, std::size_t num_series, std::uint64_t seed,
                                   std::size_t length = SyntheticDefaults::series_length);

std::string to_string(SyntheticVariant v);
SyntheticVariant synthetic_variant_from_string(const std::string& s);

/// Series id helpers: composed "<prefix>_0007", component "<prefix>_0007__c1".
std::string composed_id(const std::string& prefix, std::size_t index);
std::string component_id(const std::string& parent, std::size_t j);

}  // namespace specbench
