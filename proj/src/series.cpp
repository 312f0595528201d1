#include "specbench/series.hpp"

#include <cmath>

#include "specbench/error.hpp"

namespace specbench {

TimeSeries::TimeSeries(std::string id_, std::vector<double> values_, long origin)
    : id(std::move(id_)), values(std::move(values_)), origin_index(origin) {
    require(!id.empty(), ErrorCode::InvalidArgument, "time series id must be non-empty");
    require(!values.empty(), ErrorCode::InvalidArgument, "time series '" + id + "' is empty");
    for (double v : values) {
        require(std::isfinite(v), ErrorCode::NonFinite, "time series '" + id + "' has a non-finite value");
    }
}

ForecastTask::ForecastTask(std::size_t context, std::size_t h) : context_len(context), horizon(h) {
    require(context > 0 && h > 0, ErrorCode::InvalidArgument, "context_len and horizon must be positive");
}

std::vector<WindowPair> make_windows(std::span<const double> values, const ForecastTask& task,
                                     std::size_t stride, IndexRange range) {
    require(stride > 0, ErrorCode::InvalidArgument, "stride must be positive");
    require(range.lo <= range.hi && range.hi <= values.size(), ErrorCode::InvalidArgument,
            "window range outside the series");
    const std::size_t l = task.context_len;
    const std::size_t h = task.horizon;
    if (range.hi - range.lo < l + h) {
        fail(ErrorCode::RangeTooShort, "range of " + std::to_string(range.hi - range.lo) +
                                           " samples cannot hold context " + std::to_string(l) +
                                           " + horizon " + std::to_string(h));
    }
    const std::size_t count = (range.hi - range.lo - l - h) / stride + 1;
    std::vector<WindowPair> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t t = range.lo + l + i * stride;
        WindowPair w;
        w.context.assign(values.begin() + static_cast<long>(t - l), values.begin() + static_cast<long>(t));
        w.target.assign(values.begin() + static_cast<long>(t), values.begin() + static_cast<long>(t + h));
        w.anchor = static_cast<long>(t);
        out.push_back(std::move(w));
    }
    return out;
}

std::vector<WindowPair> make_windows(const TimeSeries& series, const ForecastTask& task,
                                     std::size_t stride, IndexRange range) {
    return make_windows(std::span<const double>(series.values), task, stride, range);
}

std::vector<WindowPair> test_windows(std::span<const double> values, const ForecastTask& task,
                                     std::size_t split_point, std::size_t stride) {
    const std::size_t l = task.context_len;
    require(split_point >= l, ErrorCode::RangeTooShort, "split point leaves no room for a test context");
    require(split_point + task.horizon <= values.size(), ErrorCode::RangeTooShort,
            "series too short for a test window after the split point");
    return make_windows(values, task, stride, IndexRange{split_point - l, values.size()});
}

SplitDataset split_traditional(const TimeSeries& series, const ForecastTask& task,
                               std::size_t split_point, std::size_t stride) {
    SplitDataset out;
    out.mode = SplitMode::ID;
    out.train = make_windows(series, task, stride, IndexRange{0, std::min(split_point, series.size())});
    out.test = test_windows(series.values, task, split_point, stride);
    return out;
}

std::string to_string(SplitMode mode) { return mode == SplitMode::ID ? "ID" : "OOD"; }

SplitMode split_mode_from_string(const std::string& s) {
    if (s == "ID") return SplitMode::ID;
    if (s == "OOD" || s == "OOD_COMPOSITIONAL") return SplitMode::OOD_COMPOSITIONAL;
    fail(ErrorCode::InvalidArgument, "unknown split mode '" + s + "'");
}

}  // namespace specbench
