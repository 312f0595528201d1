#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "specbench/models.hpp"

namespace specbench {

/// Smoothing weights searched by SES and Holt: 0.05, 0.10, ..., 0.95.
inline constexpr std::size_t kSmoothingGrid = 19;
inline double smoothing_weight(std::size_t i) { return 0.05 * static_cast<double>(i + 1); }

std::vector<std::string> parameter_names(const ModelConfig& cfg);

std::vector<double> naive_last_forecast(std::span<const double> context, std::size_t h);
std::size_t dominant_period(std::span<const double> context);
std::vector<double> seasonal_naive_forecast(std::span<const double> context, std::size_t h, std::size_t period);
std::vector<double> ses_forecast(std::span<const double> context, std::size_t h);
std::vector<double> holt_forecast(std::span<const double> context, std::size_t h);

/// Least-squares AR(p) with intercept over every contiguous stretch of the
/// training windows. Returns [intercept, phi_1 .. phi_p].
std::vector<double> fit_ar(const std::vector<WindowPair>& train, std::size_t order);
std::vector<double> ar_forecast(std::span<const double> coef, std::span<const double> context, std::size_t h);

}  // namespace specbench
