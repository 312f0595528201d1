#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "specbench/spectral.hpp"
#include "specbench/tensor.hpp"

namespace specbench {

double mae(std::span<const double> y, std::span<const double> yhat);

/// Forecast error no worse than the top-k partial
/// reconstruction evaluated over `range` (the indices covered by y).
bool topk_basis_win(std::span<const double> y, std::span<const double> yhat, const SpectralDecomposition& dec,
                    std::size_t k, IndexRange range);

struct BasisWinReport {
    std::size_t k_max = 0;
    std::vector<bool> wins;  ///< wins[k-1] for k = 1..component count
    bool threshold_pass = false;
};

inline constexpr std::size_t kBasisWinThreshold = 2;

/// Scans every k (no early exit) and reports the largest winning k.
BasisWinReport basis_win_report(std::span<const double> y, std::span<const double> yhat,
                                const SpectralDecomposition& dec, IndexRange range);
std::size_t topk_max(std::span<const double> y, std::span<const double> yhat, const SpectralDecomposition& dec,
                     IndexRange range);

// ---- rank statistics -----------------------------------------------------

struct ScoreMatrix {
    std::vector<std::string> methods;
    std::vector<std::string> datasets;
    std::vector<std::vector<double>> scores;  ///< [method][dataset], lower is better

    void validate() const;
};

/// Per-dataset mid-ranks (1 = best), [method][dataset].
std::vector<std::vector<double>> rank_matrix(const ScoreMatrix& sm);
std::vector<double> average_ranks(const ScoreMatrix& sm);

struct FriedmanResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool reject = false;
};

FriedmanResult friedman(const ScoreMatrix& sm, double alpha = 0.2);

/// Two-sided signed-rank test; zero differences dropped. Exact for n <= 12.
double wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kWilcoxonExactMax = 12;

double chi2_sf(double x, double df);
double normal_sf(double z);

std::vector<double> holm_correct(std::span<const double> pvalues);

struct CdResult {
    std::vector<double> average_ranks;                ///< per method, input order
    std::vector<std::size_t> order;                   ///< methods sorted by rank (best first)
    std::vector<std::vector<double>> adjusted_p;      ///< symmetric, 1 on the diagonal
    std::vector<std::vector<std::size_t>> groups;     ///< method indices, rank-sorted
    FriedmanResult friedman;
    bool gate_passed = false;
};

/// Maximal runs of rank-consecutive methods whose pairwise adjusted p are all
/// >= alpha. Methods left uncovered form singleton groups.
std::vector<std::vector<std::size_t>> cd_groups(const std::vector<std::size_t>& order,
                                                const std::vector<std::vector<double>>& adjusted_p, double alpha);

CdResult cd_analysis(const ScoreMatrix& sm, double alpha = 0.2);

// ---- representation similarity ------------------------------------------

/// Linear CKA between row-aligned matrices X [n, d1] and Y [n, d2].
double linear_cka(const nn::Tensor& x, const nn::Tensor& y);

}  // namespace specbench
