#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include "specbench/rng.hpp"
#include "specbench/tensor.hpp"

namespace oracle {

/// Textbook O(n^2) DFT with the 1/n forward scaling.
inline std::vector<std::complex<double>> dft(const std::vector<double>& y) {
    const std::size_t n = y.size();
    std::vector<std::complex<double>> c(n);
    for (std::size_t w = 0; w < n; ++w) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(w * t % n) / static_cast<double>(n);
            acc += y[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        c[w] = acc / static_cast<double>(n);
    }
    return c;
}

inline double mae(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::fabs(a[i] - b[i]);
    return s / static_cast<double>(a.size());
}

/// Two-sided signed-rank p-value by enumerating all 2^n sign assignments of
/// the nonzero differences (mid-ranks for ties).
inline double wilcoxon_enumerate(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i]) d.push_back(a[i] - b[i]);
    const std::size_t n = d.size();
    if (n == 0) return 1.0;
    std::vector<double> rank(n);
    for (std::size_t i = 0; i < n; ++i) {
        double less = 0.0, equal = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (std::fabs(d[j]) < std::fabs(d[i])) less += 1.0;
            else if (std::fabs(d[j]) == std::fabs(d[i])) equal += 1.0;
        }
        rank[i] = less + (equal + 1.0) / 2.0;
    }
    double observed = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        if (d[i] > 0) observed += rank[i];
    double le = 0.0, ge = 0.0;
    const std::size_t total = std::size_t{1} << n;
    for (std::size_t mask = 0; mask < total; ++mask) {
        double t = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask >> i & 1U) t += rank[i];
        if (t <= observed) le += 1.0;
        if (t >= observed) ge += 1.0;
    }
    return std::min(1.0, 2.0 * std::min(le, ge) / static_cast<double>(total));
}

/// Loss builder for finite-difference checks: maps the parameter leaves on a
/// fresh tape to a scalar.
using LossFn = std::function<specbench::nn::Var(specbench::nn::Tape&, const std::vector<specbench::nn::Var>&)>;

struct GradCheck {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
};

/// Central differences (step h) on up to `per_tensor` randomly picked entries
/// of every parameter. Relative error is |a - n| / max(|a|, |n|, floor).
inline GradCheck gradient_check(std::vector<specbench::nn::Tensor> params, const LossFn& loss,
                                std::size_t per_tensor = 12, double h = 1e-5, double floor = 1e-5,
                                std::uint64_t seed = 7) {
    using namespace specbench::nn;
    Tape tape;
    std::vector<Var> leaves;
    for (const auto& p : params) leaves.push_back(tape.leaf(p));
    const Var l = loss(tape, leaves);
    tape.backward(l);
    std::vector<Tensor> analytic;
    for (const auto& v : leaves) analytic.push_back(tape.grad(v));

    const auto eval = [&](const std::vector<Tensor>& ps) {
        Tape t;
        std::vector<Var> lv;
        for (const auto& p : ps) lv.push_back(t.leaf(p));
        return loss(t, lv).value().item();
    };

    specbench::Rng rng(seed);
    GradCheck out;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        const std::size_t n = params[pi].size();
        std::vector<std::size_t> idx(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        rng.shuffle(idx.begin(), idx.end());
        idx.resize(std::min(n, per_tensor));
        for (std::size_t i : idx) {
            const double orig = params[pi][i];
            params[pi][i] = orig + h;
            const double up = eval(params);
            params[pi][i] = orig - h;
            const double down = eval(params);
            params[pi][i] = orig;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][i];
            const double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), floor});
            out.max_rel_error = std::max(out.max_rel_error, rel);
            ++out.checked;
        }
    }
    return out;
}

inline specbench::nn::Tensor random_tensor(specbench::nn::Shape shape, specbench::Rng& rng, double scale = 1.0) {
    specbench::nn::Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.normal();
    return t;
}

}  // namespace oracle
