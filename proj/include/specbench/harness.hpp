#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specbench/eval.hpp"
#include "specbench/models.hpp"
#include "specbench/series.hpp"
#include "specbench/spectral.hpp"
#include "specbench/synthgen.hpp"

namespace specbench {

// ---- experiment configuration ------------------------------------------------

enum class DatasetKind { SINUSOID, TREND1, TREND2, GENERATED, CSV };

/// Source of the OOD training series: top-k spectral basis or the stored
/// generator components.
enum class OodBasis { SPECTRAL, COMPONENTS };

struct DatasetSpec {
    std::string name;
    DatasetKind kind = DatasetKind::SINUSOID;
    std::filesystem::path path;  ///< CSV file, or directory written by `gen`
    std::size_t n_series = 100;  ///< in-memory generation; also a cap on loaded series (0 = all)
    std::uint64_t seed = 1;
    std::size_t length = 1200;
    std::size_t context_len = 256;
    std::size_t horizon = 192;
    std::size_t split_point = 0;  ///< 0 = length - horizon
    std::size_t k = 2;
    std::size_t stride = 1;
    std::optional<DecompositionWindow> window;  ///< unset = per-kind default
    std::optional<OodBasis> ood_basis;
};

struct ModelSpec {
    std::string name;
    ModelConfig config;  ///< context_len / horizon are taken from the dataset
    TrainConfig train;   ///< seed is taken from the experiment
};

struct ExperimentConfig {
    std::vector<DatasetSpec> datasets;
    std::vector<ModelSpec> models;
    std::vector<std::uint64_t> seeds{1, 5, 10};
    std::vector<SplitMode> modes{SplitMode::ID, SplitMode::OOD_COMPOSITIONAL};
    std::size_t workers = 0;  ///< 0 = hardware concurrency
    bool save_checkpoints = true;
};

/// Parses the sectioned key = value format (grammar in the README).
/// Relative paths resolve against `base_dir`.
ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& s);

// ---- datasets ----------------------------------------------------------------

/// A loaded benchmark dataset. `components[i]` may be empty when the source
/// provides no generator components.
struct BenchmarkData {
    std::vector<TimeSeries> series;
    std::vector<std::vector<TimeSeries>> components;
    bool has_trend = false;
};

BenchmarkData load_dataset(const DatasetSpec& spec);

/// Writes `composed.csv`, `components.csv`, and `meta.json` into `dir`.
void write_synthetic_dir(const std::filesystem::path& dir, const SyntheticDataset& ds);
BenchmarkData read_synthetic_dir(const std::filesystem::path& dir);

/// Windows for one (dataset, mode) pair, pooled over all series.
struct PreparedSplit {
    std::vector<WindowPair> train;
    std::vector<WindowPair> valid;  ///< held-out tail of the train region
    std::vector<std::vector<WindowPair>> test;      ///< per series
    std::vector<SpectralDecomposition> decompositions;  ///< per series, for the k_max metric
};

PreparedSplit prepare_split(const DatasetSpec& spec, const BenchmarkData& data, SplitMode mode);

// ---- runs --------------------------------------------------------------------

struct RunKey {
    std::string dataset;
    std::string model;
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::ID;
};

struct RunResult {
    std::string run_id;
    std::string dataset;
    std::string model;
    std::uint64_t seed = 0;
    SplitMode mode = SplitMode::ID;
    std::string status = "ok";  ///< "ok" or "failed"
    std::string error;
    double mae = 0.0;  ///< mean over series
    double k_max = 0.0;  ///< mean over series
    bool threshold_pass = false;
    std::size_t n_series = 0;
    std::vector<double> series_mae;
    std::vector<std::size_t> series_k_max;
    std::size_t param_count = 0;
    std::size_t flops = 0;
    std::size_t steps_run = 0;
    std::size_t best_step = 0;

    bool ok() const { return status == "ok"; }
};

std::string run_result_to_json(const RunResult& r);
RunResult run_result_from_json(const std::string& text);

/// Content hash of a loaded dataset.
std::uint64_t fingerprint(const BenchmarkData& data);

/// Stable id: hash of the dataset spec and content, model and train configs,
/// seed, and mode.
std::string run_id(const DatasetSpec& d, std::uint64_t data_fingerprint, const ModelSpec& m, std::uint64_t seed,
                   SplitMode mode);

/// Model config with the dataset's task applied.
ModelConfig resolved_model_config(const DatasetSpec& d, const ModelSpec& m);

/// Fits and scores one run. Throws on failure. Leaves run_id empty.
RunResult execute_run(const DatasetSpec& d, const PreparedSplit& split, const ModelSpec& m, std::uint64_t seed,
                      SplitMode mode, const std::filesystem::path& checkpoint = {});

struct RunProgress {
    std::string run_id;
    RunKey key;
    std::string event;  ///< "cached", "done", "failed"
    double seconds = 0.0;
};

/// Runs every (dataset, model, seed, mode) cell. One result file per run id
/// under `out/runs/`; cached results are reused. Failures are recorded and the
/// matrix continues.
std::vector<RunResult> run_matrix(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                  const std::function<void(const RunProgress&)>& progress = {});

/// Worker count after applying SPECBENCH_WORKERS and the config cap.
std::size_t effective_workers(std::size_t requested);

// ---- aggregation -------------------------------------------------------------

struct CellSummary {
    std::string dataset;
    std::string model;
    double mae_mean = 0.0;
    double mae_std = 0.0;  ///< population
    double k_max_mean = 0.0;
    std::size_t n_seeds = 0;
};

struct MethodSummary {
    std::string model;
    double average_rank = 0.0;
    std::size_t top3_wins = 0;
    double k_max_mean = 0.0;
};

struct ModeSummary {
    SplitMode mode = SplitMode::ID;
    std::vector<CellSummary> cells;  ///< models x datasets, sorted
    std::vector<MethodSummary> methods;
    ScoreMatrix scores;
    std::optional<CdResult> cd;  ///< present when at least 3 methods and 2 datasets
};

struct Summary {
    std::vector<ModeSummary> modes;
    std::vector<std::string> failed_runs;
    std::vector<std::string> missing_cells;  ///< "mode/dataset/model"
};

std::vector<RunResult> load_results(const std::filesystem::path& results_dir);

/// Mean/std over seeds per cell, then ranks per mode. Throws MissingCells when
/// a (dataset, model) pair has no successful run, unless `allow_missing`, in
/// which case incomplete models are left out of the rankings.
Summary aggregate(const std::vector<RunResult>& results, bool allow_missing = false, double alpha = 0.2);
std::string summary_to_json(const Summary& s);

// ---- plotting ----------------------------------------------------------------

struct NamedForecast {
    std::string name;
    std::vector<double> values;
};

/// Context, target, and per-model forecasts as a deterministic SVG document.
std::string forecast_svg(const std::vector<double>& context, const std::vector<double>& target,
                         const std::vector<NamedForecast>& forecasts, const std::string& title = {});
void plot_forecast(const std::vector<double>& context, const std::vector<double>& target,
                   const std::vector<NamedForecast>& forecasts, const std::filesystem::path& path,
                   const std::string& title = {});

// ---- small file helpers --------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary file and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace specbench
