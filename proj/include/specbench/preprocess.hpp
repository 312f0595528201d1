#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "specbench/series.hpp"

namespace specbench {

/// Real-data preprocessing constants.
struct PreprocessDefaults {
    static constexpr std::size_t patch_len = 1056;
    static constexpr std::size_t patch_stride = 528;
    static constexpr double adf_alpha = 0.001;
    static constexpr std::size_t keep = 100;
    static constexpr std::size_t nlags = 48;
    static constexpr std::size_t train_len = 1008;
    static constexpr std::size_t horizon = 48;
};

// ---- CSV (header `unique_id,ds,y`) ----

struct CsvSeries {
    TimeSeries series;
    std::vector<std::string> stamps;  ///< opaque `ds` strings, one per sample
};

std::vector<CsvSeries> load_csv_with_stamps(const std::filesystem::path& path);
std::vector<TimeSeries> load_csv(const std::filesystem::path& path);

/// Parses CSV text already in memory (same rules as load_csv).
std::vector<CsvSeries> parse_csv(const std::string& text);

/// Writes series in file order; `ds` is the integer sample index
/// (origin_index + t) unless stamps are supplied.
void write_csv(const std::filesystem::path& path, const std::vector<TimeSeries>& series);
void write_csv(const std::filesystem::path& path, const std::vector<CsvSeries>& series);
std::string format_csv(const std::vector<CsvSeries>& series);

/// Shortest decimal literal that round-trips to the same double.
std::string format_double(double v);

// ---- segmentation ----

struct Segment {
    std::string parent_id;
    std::size_t offset = 0;
    std::vector<double> values;

    std::string id() const { return parent_id + "_" + std::to_string(offset); }
    TimeSeries to_series() const;
};

std::vector<Segment> segment(const TimeSeries& series, std::size_t patch_len = PreprocessDefaults::patch_len,
                             std::size_t stride = PreprocessDefaults::patch_stride);

// ---- stationarity screen ----

struct AdfReport {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t lag_used = 0;
    std::size_t nobs = 0;
    bool stationary = false;
};

/// Augmented Dickey-Fuller test with a constant term. Lag order picked by AIC
/// over 0..ceil(12 (n/100)^(1/4)) on a common sample, then refit on the full
/// usable sample. p-value from MacKinnon's response-surface approximation.
AdfReport adf_test(std::span<const double> values, double alpha = PreprocessDefaults::adf_alpha);

/// MacKinnon approximate p-value for the constant-only, single-series case.
double mackinnon_p(double tau);

/// Mean of the biased sample autocorrelation over lags 1..nlags.
double mean_acf(std::span<const double> values, std::size_t nlags = PreprocessDefaults::nlags);

/// ADF screen (drop p >= alpha), rank by mean ACF descending, keep the first
/// `keep`. Ties broken by (parent_id, offset).
std::vector<Segment> select_series(const std::vector<Segment>& segments, std::size_t keep = PreprocessDefaults::keep,
                                   double alpha = PreprocessDefaults::adf_alpha,
                                   std::size_t nlags = PreprocessDefaults::nlags);

}  // namespace specbench
