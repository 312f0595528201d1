#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "specbench/series.hpp"

namespace specbench {

/// Fourier coefficients with the forward transform scaled by 1/n, so that
/// y_t = sum_w c_w exp(i 2 pi w t / n) holds without extra factors.
struct SpectralDecomposition {
    std::vector<std::complex<double>> coeffs;
    std::size_t n = 0;
};

/// One real sinusoid: a conjugate pair (w, n-w) collapsed, or a lone DC /
/// Nyquist bin.
struct BasisComponent {
    std::size_t freq_index = 0;
    double amplitude = 0.0;
    double phase = 0.0;
    bool is_pair = true;
};

/// Which samples feed the decomposition behind a compositional split.
enum class DecompositionWindow {
    TrainRegion,  ///< y[0, T): no information from the test side
    FullSeries,   ///< y[0, n): basis defined on the whole generator grid
};

/// Components below this fraction of the largest amplitude count as zero.
inline constexpr double kNegligibleAmplitude = 1e-9;

SpectralDecomposition dft(std::span<const double> values);

/// O(n^2) direct transform with the same normalization. Always available,
/// used as the non-power-of-two path.
SpectralDecomposition dft_direct(std::span<const double> values);

std::vector<double> reconstruct_full(const SpectralDecomposition& dec);

/// All pair-collapsed components with non-negligible amplitude, ranked by
/// descending amplitude (ties: lower frequency first).
std::vector<BasisComponent> ranked_components(const SpectralDecomposition& dec);

/// Every pair-collapsed component, including zero-amplitude ones, in
/// frequency order. Summing all of them reproduces the series.
std::vector<BasisComponent> all_components(const SpectralDecomposition& dec);

std::vector<BasisComponent> top_k_components(const SpectralDecomposition& dec, std::size_t k);

std::vector<double> basis_series(const BasisComponent& comp, std::size_t n, IndexRange range);

std::vector<double> partial_sum(const SpectralDecomposition& dec, std::size_t k, IndexRange range);

/// Decomposition used for both the compositional split and the Top-k metric.
SpectralDecomposition decompose_for_split(const TimeSeries& series, std::size_t split_point,
                                          DecompositionWindow window = DecompositionWindow::TrainRegion);

/// Train on the top-k basis series (t < T), test on the original series.
/// Train windows carry the component rank in series_index.
SplitDataset build_compositional_split(const TimeSeries& series, const ForecastTask& task, std::size_t k,
                                       std::size_t split_point, std::size_t stride = 1,
                                       DecompositionWindow window = DecompositionWindow::TrainRegion);

}  // namespace specbench
