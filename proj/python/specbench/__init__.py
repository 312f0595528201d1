"""Spectral forecasting benchmark: synthetic data, spectral metrics, statistics, and experiment runs."""

from ._core import (
    BasisComponent,
    SpecbenchError,
    adf_test,
    average_ranks,
    basis_win_report,
    cd_groups,
    dft,
    effective_workers,
    friedman,
    gen_sinusoid_dataset,
    gen_trend_dataset,
    holm,
    linear_cka,
    mae,
    mean_acf,
    partial_sum,
    ranked_components,
    run_experiment,
    summarize,
    wilcoxon,
)

__all__ = [
    "BasisComponent",
    "SpecbenchError",
    "adf_test",
    "average_ranks",
    "basis_win_report",
    "cd_groups",
    "dft",
    "effective_workers",
    "friedman",
    "gen_sinusoid_dataset",
    "gen_trend_dataset",
    "holm",
    "linear_cka",
    "mae",
    "mean_acf",
    "partial_sum",
    "ranked_components",
    "run_experiment",
    "summarize",
    "wilcoxon",
]
