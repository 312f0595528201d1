#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "specbench/series.hpp"
#include "specbench/tensor.hpp"

namespace specbench {

enum class ModelFamily {
    NAIVE_LAST,
    SEASONAL_NAIVE,
    SES,
    HOLT,
    AR_LS,
    NLINEAR,
    DLINEAR,
    MLP,
    NBEATS_LITE,
    NHITS_LITE,
    PATCH_TRANSFORMER,
};
enum class Tokenization { NONE, PATCH, BINNING, LAGS };
enum class AttentionKind { BIDIRECTIONAL, CAUSAL };
enum class HeadKind { LINEAR, RESIDUAL };
enum class PosEncoding { RELATIVE, SINCOS, SINCOS_PLUS_RELATIVE, ROPE };
enum class LossKind { MAE, MSE, HUBER, STUDENT_T };
enum class ScalerKind { REVIN_STANDARD, ROBUST };
enum class Decomposition { NONE, MOVING_AVG };
enum class ModelSize { TINY, MINI, SMALL, BASE };

std::string to_string(ModelFamily v);
std::string to_string(Tokenization v);
std::string to_string(AttentionKind v);
std::string to_string(HeadKind v);
std::string to_string(PosEncoding v);
std::string to_string(LossKind v);
std::string to_string(ScalerKind v);
std::string to_string(Decomposition v);
std::string to_string(ModelSize v);

/// Parsers accept the enum spelling, case-insensitive. Throw ConfigError.
ModelFamily model_family_from_string(const std::string& s);
Tokenization tokenization_from_string(const std::string& s);
AttentionKind attention_from_string(const std::string& s);
HeadKind head_from_string(const std::string& s);
PosEncoding pos_encoding_from_string(const std::string& s);
LossKind loss_from_string(const std::string& s);
ScalerKind scaler_from_string(const std::string& s);
Decomposition decomposition_from_string(const std::string& s);
ModelSize model_size_from_string(const std::string& s);

bool is_trainable(ModelFamily f);

struct TransformerShape {
    std::size_t hidden = 0;
    std::size_t ff = 0;
    std::size_t layers = 0;
    std::size_t heads = 0;
};

/// Encoder shape of a named size (tiny 256/1024/4/4 up to base 768/3072/12/12).
TransformerShape transformer_shape(ModelSize size);

struct ModelConfig {
    ModelFamily family = ModelFamily::PATCH_TRANSFORMER;
    Tokenization tokenization = Tokenization::PATCH;
    std::size_t patch_len = 96;
    std::size_t patch_stride = 8;
    AttentionKind attention = AttentionKind::BIDIRECTIONAL;
    HeadKind head = HeadKind::LINEAR;
    PosEncoding pos_encoding = PosEncoding::SINCOS_PLUS_RELATIVE;
    LossKind loss = LossKind::MAE;
    ScalerKind scaler = ScalerKind::REVIN_STANDARD;
    std::size_t context_len = 256;
    std::size_t horizon = 192;
    Decomposition decomposition = Decomposition::NONE;
    ModelSize size = ModelSize::TINY;

    // Explicit transformer shape; 0 means "derive from size".
    std::size_t hidden = 0;
    std::size_t ff = 0;
    std::size_t layers = 0;
    std::size_t heads = 0;

    std::size_t mlp_width = 512;
    std::size_t mlp_layers = 3;    ///< MLP hidden layers
    std::size_t block_layers = 2;  ///< hidden layers per NBEATS/NHITS block
    std::size_t blocks = 3;
    std::vector<std::size_t> pool_rates{8, 4, 1};
    std::size_t ar_order = 48;
    std::size_t ma_kernel = 25;
    std::size_t bins = 256;
    double bin_clip = 5.0;
    double huber_delta = 1.0;

    TransformerShape shape() const;
    /// Outputs per horizon step: 3 for STUDENT_T, else 1.
    std::size_t output_dim() const { return loss == LossKind::STUDENT_T ? 3 : 1; }

    /// Structural checks needed to build a model. Throws ConfigError / PatchTooLong.
    void validate() const;
    /// Additionally restricts axes to the benchmark grid (patch lengths,
    /// context lengths). Applied to user-supplied experiment configs.
    void validate_grid() const;

    /// key=value pairs, sorted by key.
    std::map<std::string, std::string> to_map() const;
    static ModelConfig from_map(const std::map<std::string, std::string>& kv);
    std::string canonical() const;

    bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
    double lr = 1e-4;
    std::size_t batch_series = 4;
    std::size_t windows_batch = 256;
    std::size_t max_steps = 2000;
    std::size_t val_check_every = 100;
    std::size_t patience = 20;
    std::uint64_t seed = 1;
    double dropout = 0.0;

    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct HistoryEntry {
    std::size_t step = 0;
    double train_loss = 0.0;  ///< mean training loss since the previous check
    double val_loss = 0.0;
};

struct TrainedModel {
    ModelConfig config;
    std::vector<nn::Parameter> parameters;
    std::vector<HistoryEntry> history;
    std::size_t steps_run = 0;
    std::size_t best_step = 0;

    const nn::Tensor& parameter(const std::string& name) const;
};

// ---- scaling -------------------------------------------------------------

struct ScaleStats {
    double loc = 0.0;
    double scale = 1.0;
};

inline constexpr double kScaleEps = 1e-8;

/// REVIN_STANDARD: mean and population std + eps. ROBUST: median and MAD + eps.
ScaleStats scale_stats(ScalerKind kind, std::span<const double> context);
std::vector<double> scale(const ScaleStats& s, std::span<const double> values);
std::vector<double> unscale(const ScaleStats& s, std::span<const double> values);

// ---- building blocks -----------------------------------------------------

struct TrendSeasonal {
    std::vector<double> trend;
    std::vector<double> seasonal;
};

/// Centered moving average with edge replication; seasonal = x - trend.
TrendSeasonal moving_average_decompose(std::span<const double> x, std::size_t kernel);

std::size_t token_count(const ModelConfig& cfg);
std::size_t token_dim(const ModelConfig& cfg);

/// Token matrix [token_count, token_dim] of one scaled context.
nn::Tensor tokenize(const ModelConfig& cfg, std::span<const double> scaled_context);

std::size_t bin_index(double value, std::size_t bins, double clip);
double bin_midpoint(std::size_t bin, std::size_t bins, double clip);

/// Fixed sinusoidal table [tokens, dim]; even columns sin, odd columns cos.
nn::Tensor sincos_table(std::size_t tokens, std::size_t dim);

inline constexpr std::size_t kRelativeBuckets = 32;
inline constexpr std::size_t kRelativeMaxDistance = 128;

/// Bucket of key position j seen from query position i.
std::size_t relative_bucket(long query, long key, bool bidirectional, std::size_t buckets = kRelativeBuckets,
                            std::size_t max_distance = kRelativeMaxDistance);

/// Rotary transform of x [tokens, dim] (dim even), rotating pairs (c, c + dim/2).
nn::Tensor rope_rotate(const nn::Tensor& x);

// ---- losses --------------------------------------------------------------

/// Mean loss over all horizon steps. `pred` is [B, h] or, for STUDENT_T, the
/// raw head output [B, h, 3] mapped to (mu, softplus, 2 + softplus).
nn::Var loss_var(LossKind kind, nn::Var pred, nn::Var target, double huber_delta = 1.0);

/// Plain-number form. For STUDENT_T, `params` holds (mu, sigma, nu) triples.
double loss_value(LossKind kind, std::span<const double> y, std::span<const double> params,
                  double huber_delta = 1.0);

double student_t_nll(double y, double mu, double sigma, double nu);

// ---- model lifecycle -----------------------------------------------------

/// Freshly initialized parameters for a trainable family.
std::vector<nn::Parameter> init_parameters(const ModelConfig& cfg, std::uint64_t seed);

/// Forward pass on scaled contexts [B, l]. Returns [B, h] or [B, h, 3].
/// `embedding` receives the final encoder activations for the transformer.
nn::Var forward(const ModelConfig& cfg, nn::Tape& tape, const std::vector<nn::Var>& params,
                const nn::Tensor& scaled_contexts, nn::Var* embedding = nullptr);

TrainedModel fit(const ModelConfig& cfg, const std::vector<WindowPair>& train, const std::vector<WindowPair>& valid,
                 const TrainConfig& tc);

std::vector<double> predict(const TrainedModel& model, std::span<const double> context);
std::vector<std::vector<double>> predict_batch(const TrainedModel& model,
                                               const std::vector<std::vector<double>>& contexts);

/// Student-t quantiles per horizon step (original units). Requires a STUDENT_T model.
std::vector<std::vector<double>> predict_quantiles(const TrainedModel& model, std::span<const double> context,
                                                   const std::vector<double>& levels);

/// Final encoder activations [tokens, hidden]. Transformer only.
nn::Tensor embed(const TrainedModel& model, std::span<const double> context);

std::size_t count_params(const TrainedModel& model);
std::size_t count_params(const ModelConfig& cfg);

/// Multiply-add count of one forward pass for a single context.
std::size_t estimate_flops(const ModelConfig& cfg);

// ---- checkpoints ---------------------------------------------------------

std::string serialize_checkpoint(const TrainedModel& model);
TrainedModel deserialize_checkpoint(const std::string& bytes);
void save_checkpoint(const TrainedModel& model, const std::string& path);
TrainedModel load_checkpoint(const std::string& path);

}  // namespace specbench
