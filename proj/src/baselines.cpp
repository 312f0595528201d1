#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "model_internal.hpp"
#include "ols.hpp"
#include "specbench/error.hpp"
#include "specbench/spectral.hpp"

namespace specbench {

std::vector<double> naive_last_forecast(std::span<const double> context, std::size_t h) {
    require(!context.empty(), ErrorCode::BadContextLength, "empty context");
    return std::vector<double>(h, context.back());
}

std::size_t dominant_period(std::span<const double> context) {
    const std::size_t n = context.size();
    if (n < 2) return 1;
    const auto dec = dft(context);
    std::size_t best_w = 0;
    double best = 0.0;
    for (std::size_t w = 1; w <= n / 2; ++w) {
        const double a = std::abs(dec.coeffs[w]);
        if (a > best) {
            best = a;
            best_w = w;
        }
    }
    if (best_w == 0) return 1;
    const auto p = static_cast<std::size_t>(std::lround(static_cast<double>(n) / static_cast<double>(best_w)));
    return std::clamp<std::size_t>(p, 1, n);
}

std::vector<double> seasonal_naive_forecast(std::span<const double> context, std::size_t h, std::size_t period) {
    const std::size_t n = context.size();
    require(period >= 1 && period <= n, ErrorCode::InvalidArgument, "seasonal period out of range");
    std::vector<double> out(h);
    for (std::size_t i = 0; i < h; ++i) out[i] = context[n - period + i % period];
    return out;
}

std::vector<double> ses_forecast(std::span<const double> context, std::size_t h) {
    require(!context.empty(), ErrorCode::BadContextLength, "empty context");
    double best_err = std::numeric_limits<double>::infinity();
    double best_level = context[0];
    for (std::size_t g = 0; g < kSmoothingGrid; ++g) {
        const double alpha = smoothing_weight(g);
        double level = context[0], err = 0.0;
        for (std::size_t t = 1; t < context.size(); ++t) {
            err += std::fabs(context[t] - level);
            level = alpha * context[t] + (1.0 - alpha) * level;
        }
        if (err < best_err) {
            best_err = err;
            best_level = level;
        }
    }
    return std::vector<double>(h, best_level);
}

std::vector<double> holt_forecast(std::span<const double> context, std::size_t h) {
    const std::size_t n = context.size();
    if (n < 2) return naive_last_forecast(context, h);
    double best_err = std::numeric_limits<double>::infinity();
    double best_level = 0.0, best_trend = 0.0;
    for (std::size_t ga = 0; ga < kSmoothingGrid; ++ga) {
        const double alpha = smoothing_weight(ga);
        for (std::size_t gb = 0; gb < kSmoothingGrid; ++gb) {
            const double beta = smoothing_weight(gb);
            double level = context[0], trend = context[1] - context[0], err = 0.0;
            for (std::size_t t = 1; t < n; ++t) {
                err += std::fabs(context[t] - (level + trend));
                const double next = alpha * context[t] + (1.0 - alpha) * (level + trend);
                trend = beta * (next - level) + (1.0 - beta) * trend;
                level = next;
            }
            if (err < best_err) {
                best_err = err;
                best_level = level;
                best_trend = trend;
            }
        }
    }
    std::vector<double> out(h);
    for (std::size_t i = 0; i < h; ++i) out[i] = best_level + static_cast<double>(i + 1) * best_trend;
    return out;
}

std::vector<double> fit_ar(const std::vector<WindowPair>& train, std::size_t order) {
    // Reassemble the underlying stretches: sample position -> value per series.
    std::map<std::size_t, std::map<long, double>> series;
    for (const auto& w : train) {
        auto& s = series[w.series_index];
        const long start = w.anchor - static_cast<long>(w.context.size());
        for (std::size_t i = 0; i < w.context.size(); ++i) s[start + static_cast<long>(i)] = w.context[i];
        for (std::size_t i = 0; i < w.target.size(); ++i) s[w.anchor + static_cast<long>(i)] = w.target[i];
    }
    std::vector<std::vector<double>> runs;
    for (const auto& [idx, s] : series) {
        long prev = 0;
        for (auto it = s.begin(); it != s.end(); ++it) {
            if (it == s.begin() || it->first != prev + 1) runs.emplace_back();
            runs.back().push_back(it->second);
            prev = it->first;
        }
    }
    std::size_t rows = 0;
    for (const auto& r : runs)
        if (r.size() > order) rows += r.size() - order;
    require(rows > 0, ErrorCode::EmptyTrainSet, "no training stretch is longer than the AR order");

    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(order + 1));
    Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
    Eigen::Index row = 0;
    for (const auto& r : runs) {
        for (std::size_t t = order; t < r.size(); ++t, ++row) {
            x(row, 0) = 1.0;
            for (std::size_t j = 1; j <= order; ++j) x(row, static_cast<Eigen::Index>(j)) = r[t - j];
            y(row) = r[t];
        }
    }
    const Eigen::VectorXd beta = detail::min_norm_lstsq(x, y);
    return {beta.data(), beta.data() + beta.size()};
}

std::vector<double> ar_forecast(std::span<const double> coef, std::span<const double> context, std::size_t h) {
    const std::size_t p = coef.size() - 1;
    require(context.size() >= p, ErrorCode::BadContextLength, "context shorter than the AR order");
    std::vector<double> hist(context.end() - static_cast<long>(p), context.end());
    std::vector<double> out(h);
    for (std::size_t i = 0; i < h; ++i) {
        double v = coef[0];
        for (std::size_t j = 1; j <= p; ++j) v += coef[j] * hist[hist.size() - j];
        out[i] = v;
        hist.push_back(v);
    }
    return out;
}

}  // namespace specbench
