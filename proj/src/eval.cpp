#include "specbench/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <numeric>

#include "specbench/error.hpp"

namespace specbench {

double mae(std::span<const double> y, std::span<const double> yhat) {
    require(y.size() == yhat.size() && !y.empty(), ErrorCode::ShapeMismatch,
            "mae needs equal non-empty lengths, got " + std::to_string(y.size()) + " and " + std::to_string(yhat.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::fabs(y[i] - yhat[i]);
    return acc / static_cast<double>(y.size());
}

namespace {

void check_range(std::span<const double> y, IndexRange range) {
    require(range.hi >= range.lo && range.hi - range.lo == y.size(), ErrorCode::ShapeMismatch,
            "index range does not match the series length");
}

}  // namespace

bool topk_basis_win(std::span<const double> y, std::span<const double> yhat, const SpectralDecomposition& dec,
                    std::size_t k, IndexRange range) {
    check_range(y, range);
    const auto ref = partial_sum(dec, k, range);
    return mae(y, yhat) <= mae(y, ref);
}

BasisWinReport basis_win_report(std::span<const double> y, std::span<const double> yhat,
                                const SpectralDecomposition& dec, IndexRange range) {
    check_range(y, range);
    const double err = mae(y, yhat);
    const auto comps = ranked_components(dec);
    BasisWinReport r;
    r.wins.resize(comps.size());
    // Running partial sum over the ranked components.
    std::vector<double> acc(y.size(), 0.0);
    for (std::size_t k = 1; k <= comps.size(); ++k) {
        const auto b = basis_series(comps[k - 1], dec.n, range);
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += b[i];
        r.wins[k - 1] = err <= mae(y, acc);
        if (r.wins[k - 1]) r.k_max = k;
    }
    r.threshold_pass = r.k_max >= kBasisWinThreshold;
    return r;
}

std::size_t topk_max(std::span<const double> y, std::span<const double> yhat, const SpectralDecomposition& dec,
                     IndexRange range) {
    return basis_win_report(y, yhat, dec, range).k_max;
}

// ------------------------------------------------------------------ ranks

void ScoreMatrix::validate() const {
    require(scores.size() == methods.size(), ErrorCode::ShapeMismatch, "one score row per method required");
    for (const auto& row : scores) {
        require(row.size() == datasets.size(), ErrorCode::ShapeMismatch, "one score per dataset required");
        for (double v : row) require(std::isfinite(v), ErrorCode::NonFinite, "score matrix holds a non-finite value");
    }
}

std::vector<std::vector<double>> rank_matrix(const ScoreMatrix& sm) {
    sm.validate();
    const std::size_t m = sm.methods.size(), d = sm.datasets.size();
    std::vector<std::vector<double>> ranks(m, std::vector<double>(d));
    std::vector<std::size_t> idx(m);
    for (std::size_t j = 0; j < d; ++j) {
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return sm.scores[a][j] < sm.scores[b][j]; });
        for (std::size_t i = 0; i < m;) {
            std::size_t e = i + 1;
            while (e < m && sm.scores[idx[e]][j] == sm.scores[idx[i]][j]) ++e;
            const double mid = 0.5 * static_cast<double>(i + 1 + e);
            for (std::size_t t = i; t < e; ++t) ranks[idx[t]][j] = mid;
            i = e;
        }
    }
    return ranks;
}

std::vector<double> average_ranks(const ScoreMatrix& sm) {
    const auto r = rank_matrix(sm);
    std::vector<double> avg(r.size(), 0.0);
    for (std::size_t i = 0; i < r.size(); ++i) {
        for (double v : r[i]) avg[i] += v;
        if (!r[i].empty()) avg[i] /= static_cast<double>(r[i].size());
    }
    return avg;
}

double chi2_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double normal_sf(double z) { return boost::math::cdf(boost::math::complement(boost::math::normal_distribution<double>(), z)); }

FriedmanResult friedman(const ScoreMatrix& sm, double alpha) {
    const std::size_t m = sm.methods.size(), d = sm.datasets.size();
    require(m >= 3, ErrorCode::TooFewMethods, "Friedman needs at least 3 methods, got " + std::to_string(m));
    require(d >= 2, ErrorCode::TooFewMethods, "Friedman needs at least 2 datasets, got " + std::to_string(d));
    const auto avg = average_ranks(sm);
    const double M = static_cast<double>(m), D = static_cast<double>(d);
    double ss = 0.0;
    for (double r : avg) ss += (r - (M + 1.0) / 2.0) * (r - (M + 1.0) / 2.0);
    FriedmanResult f;
    f.statistic = 12.0 * D / (M * (M + 1.0)) * ss;
    f.p_value = chi2_sf(f.statistic, M - 1.0);
    f.reject = f.p_value < alpha;
    return f;
}

double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::ShapeMismatch, "paired samples differ in length");
    require(a.size() >= 3, ErrorCode::InvalidArgument, "signed-rank test needs at least 3 pairs");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
    const std::size_t n = d.size();
    if (n == 0) return 1.0;

    // Mid-ranks of |d|, kept doubled so they stay integral.
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto x, auto y) { return std::fabs(d[x]) < std::fabs(d[y]); });
    std::vector<std::size_t> rank2(n);
    double tie_term = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t e = i + 1;
        while (e < n && std::fabs(d[idx[e]]) == std::fabs(d[idx[i]])) ++e;
        for (std::size_t t = i; t < e; ++t) rank2[idx[t]] = i + 1 + e;  // 2 * mid-rank
        const double tcount = static_cast<double>(e - i);
        tie_term += tcount * tcount * tcount - tcount;
        i = e;
    }
    std::size_t t_plus2 = 0, total2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        total2 += rank2[i];
        if (d[i] > 0.0) t_plus2 += rank2[i];
    }

    if (n <= kWilcoxonExactMax) {
        // Null distribution of the doubled positive-rank sum over all 2^n sign patterns.
        std::vector<double> count(total2 + 1, 0.0);
        count[0] = 1.0;
        std::size_t reach = 0;
        for (std::size_t i = 0; i < n; ++i) {
            reach += rank2[i];
            for (std::size_t s = reach + 1; s-- > rank2[i];) count[s] += count[s - rank2[i]];
        }
        double le = 0.0, ge = 0.0;
        for (std::size_t s = 0; s <= total2; ++s) {
            if (s <= t_plus2) le += count[s];
            if (s >= t_plus2) ge += count[s];
        }
        const double total = std::ldexp(1.0, static_cast<int>(n));
        return std::min(1.0, 2.0 * std::min(le, ge) / total);
    }

    const double N = static_cast<double>(n);
    const double mean = N * (N + 1.0) / 4.0;
    const double var = N * (N + 1.0) * (2.0 * N + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) return 1.0;
    double diff = 0.5 * static_cast<double>(t_plus2) - mean;
    if (diff > 0.0) diff -= 0.5;
    else if (diff < 0.0) diff += 0.5;
    const double z = std::fabs(diff) / std::sqrt(var);
    return std::min(1.0, 2.0 * normal_sf(z));
}

std::vector<double> holm_correct(std::span<const double> p) {
    for (double v : p) require(v >= 0.0 && v <= 1.0, ErrorCode::InvalidArgument, "p-values must lie in [0, 1]");
    const std::size_t m = p.size();
    std::vector<std::size_t> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return p[a] < p[b]; });
    std::vector<double> out(m);
    double running = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double adj = std::min(1.0, static_cast<double>(m - i) * p[idx[i]]);
        running = std::max(running, adj);
        out[idx[i]] = running;
    }
    return out;
}

std::vector<std::vector<std::size_t>> cd_groups(const std::vector<std::size_t>& order,
                                                const std::vector<std::vector<double>>& adjusted_p, double alpha) {
    const std::size_t m = order.size();
    std::vector<std::vector<std::size_t>> groups;
    std::size_t covered_to = 0;  // positions < covered_to are already in a group
    std::size_t end = 0;
    for (std::size_t i = 0; i < m; ++i) {
        end = std::max(end, i);
        // Extend while the next method agrees with everyone already in the run.
        while (end + 1 < m) {
            bool ok = true;
            for (std::size_t t = i; t <= end && ok; ++t) ok = adjusted_p[order[t]][order[end + 1]] >= alpha;
            if (!ok) break;
            ++end;
        }
        if (end + 1 > covered_to) {
            groups.emplace_back(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(end + 1));
            covered_to = end + 1;
        }
    }
    return groups;
}

CdResult cd_analysis(const ScoreMatrix& sm, double alpha) {
    sm.validate();
    const std::size_t m = sm.methods.size();
    CdResult r;
    r.average_ranks = average_ranks(sm);
    r.order.resize(m);
    std::iota(r.order.begin(), r.order.end(), 0);
    std::stable_sort(r.order.begin(), r.order.end(),
                     [&](auto a, auto b) { return r.average_ranks[a] < r.average_ranks[b]; });
    r.adjusted_p.assign(m, std::vector<double>(m, 1.0));
    r.friedman = friedman(sm, alpha);
    r.gate_passed = r.friedman.reject;
    if (r.gate_passed && sm.datasets.size() >= 3) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        std::vector<double> raw;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = i + 1; j < m; ++j) {
                pairs.emplace_back(i, j);
                raw.push_back(wilcoxon_signed_rank(sm.scores[i], sm.scores[j]));
            }
        }
        const auto adj = holm_correct(raw);
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            r.adjusted_p[pairs[k].first][pairs[k].second] = adj[k];
            r.adjusted_p[pairs[k].second][pairs[k].first] = adj[k];
        }
    }
    r.groups = cd_groups(r.order, r.adjusted_p, alpha);
    return r;
}

double linear_cka(const nn::Tensor& x, const nn::Tensor& y) {
    require(x.rank() == 2 && y.rank() == 2, ErrorCode::ShapeMismatch, "CKA needs two matrices");
    require(x.dim(0) == y.dim(0), ErrorCode::ShapeMismatch, "CKA inputs need the same row count");
    require(x.dim(0) >= 2, ErrorCode::InvalidArgument, "CKA needs at least 2 rows");
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto center = [](const nn::Tensor& t) {
        RowMat m = Eigen::Map<const RowMat>(t.data().data(), static_cast<long>(t.dim(0)), static_cast<long>(t.dim(1)));
        m.rowwise() -= m.colwise().mean();
        return m;
    };
    const RowMat xc = center(x), yc = center(y);
    const double nx = (xc.transpose() * xc).norm();
    const double ny = (yc.transpose() * yc).norm();
    require(nx > 0.0 && ny > 0.0, ErrorCode::DegenerateInput, "CKA input has zero variance");
    const double cross = (xc.transpose() * yc).squaredNorm();
    return cross / (nx * ny);
}

}  // namespace specbench
