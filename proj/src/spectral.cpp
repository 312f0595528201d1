#include "specbench/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "specbench/error.hpp"

namespace specbench {
namespace {

using cplx = std::complex<double>;

bool is_power_of_two(std::size_t n) { return n >= 1 && (n & (n - 1)) == 0; }

/// Table of exp(sign * i 2 pi m / n), m in [0, n).
std::vector<cplx> twiddles(std::size_t n, double sign) {
    std::vector<cplx> table(n);
    for (std::size_t m = 0; m < n; ++m) {
        const double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
        table[m] = {std::cos(angle), std::sin(angle)};
    }
    return table;
}

/// In-place iterative radix-2 transform (unnormalized).
void fft_inplace(std::vector<cplx>& a, double sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const auto table = twiddles(n, sign);
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t j = 0; j < len / 2; ++j) {
                const cplx u = a[i + j];
                const cplx v = a[i + j + len / 2] * table[j * step];
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
            }
        }
    }
}

std::vector<cplx> direct_transform(std::span<const cplx> in, double sign) {
    const std::size_t n = in.size();
    const auto table = twiddles(n, sign);
    std::vector<cplx> out(n);
    for (std::size_t w = 0; w < n; ++w) {
        cplx acc = 0.0;
        std::size_t m = 0;  // (w * t) mod n, advanced incrementally
        for (std::size_t t = 0; t < n; ++t) {
            acc += in[t] * table[m];
            m += w;
            if (m >= n) m -= n;
        }
        out[w] = acc;
    }
    return out;
}

void check_input(std::span<const double> values) {
    require(values.size() >= 2, ErrorCode::InvalidArgument, "transform needs at least 2 samples");
    for (double v : values) require(std::isfinite(v), ErrorCode::NonFinite, "non-finite sample in transform input");
}

BasisComponent make_component(const SpectralDecomposition& dec, std::size_t w) {
    const std::size_t n = dec.n;
    BasisComponent c;
    c.freq_index = w;
    c.is_pair = !(w == 0 || 2 * w == n);
    const cplx cw = dec.coeffs[w];
    c.amplitude = (c.is_pair ? 2.0 : 1.0) * std::abs(cw);
    double phase = std::arg(cw);
    if (phase <= -std::numbers::pi) phase = std::numbers::pi;
    c.phase = phase;
    return c;
}

}  // namespace

SpectralDecomposition dft_direct(std::span<const double> values) {
    check_input(values);
    const std::size_t n = values.size();
    std::vector<cplx> in(values.begin(), values.end());
    SpectralDecomposition dec{direct_transform(in, -1.0), n};
    for (auto& c : dec.coeffs) c /= static_cast<double>(n);
    return dec;
}

SpectralDecomposition dft(std::span<const double> values) {
    check_input(values);
    const std::size_t n = values.size();
    if (!is_power_of_two(n)) return dft_direct(values);
    std::vector<cplx> a(values.begin(), values.end());
    fft_inplace(a, -1.0);
    for (auto& c : a) c /= static_cast<double>(n);
    return {std::move(a), n};
}

std::vector<double> reconstruct_full(const SpectralDecomposition& dec) {
    require(dec.coeffs.size() == dec.n && dec.n >= 1, ErrorCode::InvalidArgument, "malformed decomposition");
    std::vector<cplx> time;
    if (is_power_of_two(dec.n)) {
        time = dec.coeffs;
        fft_inplace(time, +1.0);
    } else {
        time = direct_transform(dec.coeffs, +1.0);
    }
    std::vector<double> out(dec.n);
    for (std::size_t t = 0; t < dec.n; ++t) out[t] = time[t].real();
    return out;
}

std::vector<BasisComponent> all_components(const SpectralDecomposition& dec) {
    std::vector<BasisComponent> out;
    for (std::size_t w = 0; 2 * w <= dec.n; ++w) out.push_back(make_component(dec, w));
    return out;
}

std::vector<BasisComponent> ranked_components(const SpectralDecomposition& dec) {
    auto comps = all_components(dec);
    double max_amp = 0.0;
    for (const auto& c : comps) max_amp = std::max(max_amp, c.amplitude);
    std::erase_if(comps, [&](const BasisComponent& c) {
        return !(c.amplitude > kNegligibleAmplitude * max_amp) || c.amplitude == 0.0;
    });
    std::stable_sort(comps.begin(), comps.end(), [](const BasisComponent& a, const BasisComponent& b) {
        if (a.amplitude != b.amplitude) return a.amplitude > b.amplitude;
        return a.freq_index < b.freq_index;
    });
    return comps;
}

std::vector<BasisComponent> top_k_components(const SpectralDecomposition& dec, std::size_t k) {
    require(k >= 1, ErrorCode::InvalidArgument, "k must be positive");
    auto comps = ranked_components(dec);
    if (k > comps.size()) {
        fail(ErrorCode::KTooLarge, "k = " + std::to_string(k) + " exceeds the " + std::to_string(comps.size()) +
                                       " non-negligible components");
    }
    comps.resize(k);
    return comps;
}

std::vector<double> basis_series(const BasisComponent& comp, std::size_t n, IndexRange range) {
    require(n >= 1 && range.lo <= range.hi, ErrorCode::InvalidArgument, "invalid basis evaluation range");
    std::vector<double> out;
    out.reserve(range.hi - range.lo);
    const double dc = comp.amplitude * std::cos(comp.phase);
    for (std::size_t t = range.lo; t < range.hi; ++t) {
        if (comp.freq_index == 0) {
            out.push_back(dc);
        } else if (!comp.is_pair) {
            out.push_back((t % 2 == 0) ? dc : -dc);
        } else {
            // Reduce w*t modulo n first so the angle stays exact for long ranges.
            const std::size_t m = (comp.freq_index % n) * (t % n) % n;
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(n);
            out.push_back(comp.amplitude * std::cos(angle + comp.phase));
        }
    }
    return out;
}

std::vector<double> partial_sum(const SpectralDecomposition& dec, std::size_t k, IndexRange range) {
    const auto comps = top_k_components(dec, k);
    std::vector<double> out(range.hi - range.lo, 0.0);
    for (const auto& c : comps) {
        const auto s = basis_series(c, dec.n, range);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += s[i];
    }
    return out;
}

SpectralDecomposition decompose_for_split(const TimeSeries& series, std::size_t split_point,
                                          DecompositionWindow window) {
    const std::size_t n = window == DecompositionWindow::FullSeries ? series.size() : split_point;
    require(n <= series.size(), ErrorCode::RangeTooShort, "split point beyond the end of the series");
    return dft(std::span<const double>(series.values.data(), n));
}

SplitDataset build_compositional_split(const TimeSeries& series, const ForecastTask& task, std::size_t k,
                                       std::size_t split_point, std::size_t stride, DecompositionWindow window) {
    require(split_point <= series.size(), ErrorCode::RangeTooShort, "split point beyond the end of the series");
    SplitDataset out;
    out.mode = SplitMode::OOD_COMPOSITIONAL;
    out.test = test_windows(series.values, task, split_point, stride);
    const auto dec = decompose_for_split(series, split_point, window);
    const auto comps = top_k_components(dec, k);
    for (std::size_t j = 0; j < comps.size(); ++j) {
        const auto basis = basis_series(comps[j], dec.n, IndexRange{0, split_point});
        auto windows = make_windows(basis, task, stride, IndexRange{0, split_point});
        for (auto& w : windows) {
            w.series_index = j;
            out.train.push_back(std::move(w));
        }
    }
    return out;
}

}  // namespace specbench
