#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace specbench {

/// A univariate signal indexed by integer sample position.
struct TimeSeries {
    std::string id;
    std::vector<double> values;
    long origin_index = 0;

    TimeSeries() = default;
    TimeSeries(std::string id_, std::vector<double> values_, long origin = 0);

    std::size_t size() const { return values.size(); }
};

struct ForecastTask {
    std::size_t context_len = 0;
    std::size_t horizon = 0;

    ForecastTask() = default;
    ForecastTask(std::size_t context, std::size_t h);
};

/// One supervision pair. A window anchored at t has context y[t-l, t) and
/// target y[t, t+h).
struct WindowPair {
    std::vector<double> context;
    std::vector<double> target;
    long anchor = 0;
    /// Index of the source series inside its dataset; used for batch grouping.
    std::size_t series_index = 0;
};

enum class SplitMode { ID, OOD_COMPOSITIONAL };

struct SplitDataset {
    std::vector<WindowPair> train;
    std::vector<WindowPair> test;
    SplitMode mode = SplitMode::ID;
};

/// Half-open sample range [lo, hi).
struct IndexRange {
    std::size_t lo = 0;
    std::size_t hi = 0;
};

std::vector<WindowPair> make_windows(std::span<const double> values, const ForecastTask& task,
                                     std::size_t stride, IndexRange range);

std::vector<WindowPair> make_windows(const TimeSeries& series, const ForecastTask& task,
                                     std::size_t stride, IndexRange range);

/// Test windows of a split at T: anchors T, T+stride, ... with target inside the series.
std::vector<WindowPair> test_windows(std::span<const double> values, const ForecastTask& task,
                                     std::size_t split_point, std::size_t stride);

/// Traditional in-distribution split: train targets end at or before T,
/// test windows are anchored at or after T.
SplitDataset split_traditional(const TimeSeries& series, const ForecastTask& task,
                               std::size_t split_point, std::size_t stride = 1);

std::string to_string(SplitMode mode);
SplitMode split_mode_from_string(const std::string& s);

}  // namespace specbench
