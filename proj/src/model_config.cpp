#include <algorithm>
#include <array>
#include <charconv>
#include <cctype>
#include <sstream>

#include "specbench/error.hpp"
#include "specbench/models.hpp"
#include "specbench/preprocess.hpp"

namespace specbench {

namespace {

template <typename E, std::size_t N>
struct EnumNames {
    std::array<std::pair<E, const char*>, N> entries;

    std::string name(E v) const {
        for (const auto& [e, s] : entries)
            if (e == v) return s;
        return "?";
    }

    E parse(const std::string& text, const char* what) const {
        std::string upper = text;
        std::transform(upper.begin(), upper.end(), upper.begin(),
                       [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
        std::replace(upper.begin(), upper.end(), '-', '_');
        for (const auto& [e, s] : entries)
            if (upper == s) return e;
        fail(ErrorCode::ConfigError, std::string("unknown ") + what + " '" + text + "'");
    }
};

constexpr EnumNames<ModelFamily, 11> kFamilies{{{
    {ModelFamily::NAIVE_LAST, "NAIVE_LAST"},
    {ModelFamily::SEASONAL_NAIVE, "SEASONAL_NAIVE"},
    {ModelFamily::SES, "SES"},
    {ModelFamily::HOLT, "HOLT"},
    {ModelFamily::AR_LS, "AR_LS"},
    {ModelFamily::NLINEAR, "NLINEAR"},
    {ModelFamily::DLINEAR, "DLINEAR"},
    {ModelFamily::MLP, "MLP"},
    {ModelFamily::NBEATS_LITE, "NBEATS_LITE"},
    {ModelFamily::NHITS_LITE, "NHITS_LITE"},
    {ModelFamily::PATCH_TRANSFORMER, "PATCH_TRANSFORMER"},
}}};
constexpr EnumNames<Tokenization, 4> kTokenizations{{{
    {Tokenization::NONE, "NONE"},
    {Tokenization::PATCH, "PATCH"},
    {Tokenization::BINNING, "BINNING"},
    {Tokenization::LAGS, "LAGS"},
}}};
constexpr EnumNames<AttentionKind, 2> kAttention{{{
    {AttentionKind::BIDIRECTIONAL, "BIDIRECTIONAL"},
    {AttentionKind::CAUSAL, "CAUSAL"},
}}};
constexpr EnumNames<HeadKind, 2> kHeads{{{
    {HeadKind::LINEAR, "LINEAR"},
    {HeadKind::RESIDUAL, "RESIDUAL"},
}}};
constexpr EnumNames<PosEncoding, 4> kPos{{{
    {PosEncoding::RELATIVE, "RELATIVE"},
    {PosEncoding::SINCOS, "SINCOS"},
    {PosEncoding::SINCOS_PLUS_RELATIVE, "SINCOS_PLUS_RELATIVE"},
    {PosEncoding::ROPE, "ROPE"},
}}};
constexpr EnumNames<LossKind, 4> kLosses{{{
    {LossKind::MAE, "MAE"},
    {LossKind::MSE, "MSE"},
    {LossKind::HUBER, "HUBER"},
    {LossKind::STUDENT_T, "STUDENT_T"},
}}};
constexpr EnumNames<ScalerKind, 2> kScalers{{{
    {ScalerKind::REVIN_STANDARD, "REVIN_STANDARD"},
    {ScalerKind::ROBUST, "ROBUST"},
}}};
constexpr EnumNames<Decomposition, 2> kDecomp{{{
    {Decomposition::NONE, "NONE"},
    {Decomposition::MOVING_AVG, "MOVING_AVG"},
}}};
constexpr EnumNames<ModelSize, 4> kSizes{{{
    {ModelSize::TINY, "TINY"},
    {ModelSize::MINI, "MINI"},
    {ModelSize::SMALL, "SMALL"},
    {ModelSize::BASE, "BASE"},
}}};

std::size_t parse_size(const std::string& key, const std::string& text) {
    std::size_t v = 0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) fail(ErrorCode::ConfigError, "'" + key + "' expects a non-negative integer, got '" + text + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    auto [p, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || p != end) fail(ErrorCode::ConfigError, "'" + key + "' expects a number, got '" + text + "'");
    return v;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += std::to_string(v[i]);
    }
    return s;
}

std::vector<std::size_t> split_sizes(const std::string& key, const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_size(key, item));
    return out;
}

}  // namespace

std::string to_string(ModelFamily v) { return kFamilies.name(v); }
std::string to_string(Tokenization v) { return kTokenizations.name(v); }
std::string to_string(AttentionKind v) { return kAttention.name(v); }
std::string to_string(HeadKind v) { return kHeads.name(v); }
std::string to_string(PosEncoding v) { return kPos.name(v); }
std::string to_string(LossKind v) { return kLosses.name(v); }
std::string to_string(ScalerKind v) { return kScalers.name(v); }
std::string to_string(Decomposition v) { return kDecomp.name(v); }
std::string to_string(ModelSize v) { return kSizes.name(v); }

ModelFamily model_family_from_string(const std::string& s) { return kFamilies.parse(s, "model family"); }
Tokenization tokenization_from_string(const std::string& s) { return kTokenizations.parse(s, "tokenization"); }
AttentionKind attention_from_string(const std::string& s) { return kAttention.parse(s, "attention"); }
HeadKind head_from_string(const std::string& s) { return kHeads.parse(s, "head"); }
PosEncoding pos_encoding_from_string(const std::string& s) { return kPos.parse(s, "positional encoding"); }
LossKind loss_from_string(const std::string& s) { return kLosses.parse(s, "loss"); }
ScalerKind scaler_from_string(const std::string& s) { return kScalers.parse(s, "scaler"); }
Decomposition decomposition_from_string(const std::string& s) { return kDecomp.parse(s, "decomposition"); }
ModelSize model_size_from_string(const std::string& s) { return kSizes.parse(s, "model size"); }

bool is_trainable(ModelFamily f) {
    switch (f) {
        case ModelFamily::NLINEAR:
        case ModelFamily::DLINEAR:
        case ModelFamily::MLP:
        case ModelFamily::NBEATS_LITE:
        case ModelFamily::NHITS_LITE:
        case ModelFamily::PATCH_TRANSFORMER:
            return true;
        default:
            return false;
    }
}

TransformerShape transformer_shape(ModelSize size) {
    switch (size) {
        case ModelSize::TINY: return {256, 1024, 4, 4};
        case ModelSize::MINI: return {384, 1536, 4, 8};
        case ModelSize::SMALL: return {512, 2048, 6, 8};
        case ModelSize::BASE: return {768, 3072, 12, 12};
    }
    return {};
}

TransformerShape ModelConfig::shape() const {
    TransformerShape s = transformer_shape(size);
    if (hidden) s.hidden = hidden;
    if (ff) s.ff = ff;
    if (layers) s.layers = layers;
    if (heads) s.heads = heads;
    return s;
}

void ModelConfig::validate() const {
    require(context_len > 0, ErrorCode::ConfigError, "context_len must be positive");
    require(horizon > 0, ErrorCode::ConfigError, "horizon must be positive");
    if (family == ModelFamily::AR_LS) {
        require(ar_order > 0 && ar_order < context_len, ErrorCode::ConfigError,
                "ar_order must lie in [1, context_len)");
    }
    if (family == ModelFamily::MLP) require(mlp_width > 0, ErrorCode::ConfigError, "mlp_width must be positive");
    if (family == ModelFamily::NBEATS_LITE || family == ModelFamily::NHITS_LITE) {
        require(mlp_width > 0 && blocks > 0, ErrorCode::ConfigError, "blocks and mlp_width must be positive");
    }
    if (family == ModelFamily::NHITS_LITE) {
        require(pool_rates.size() == blocks, ErrorCode::ConfigError, "NHITS needs one pooling rate per block");
        for (auto r : pool_rates) require(r > 0, ErrorCode::ConfigError, "pooling rates must be positive");
    }
    if (family == ModelFamily::DLINEAR || decomposition == Decomposition::MOVING_AVG) {
        require(ma_kernel > 0, ErrorCode::ConfigError, "ma_kernel must be positive");
    }
    if (family == ModelFamily::PATCH_TRANSFORMER) {
        const auto s = shape();
        require(s.hidden > 0 && s.ff > 0 && s.layers > 0 && s.heads > 0, ErrorCode::ConfigError,
                "transformer shape must be positive");
        require(s.hidden % s.heads == 0, ErrorCode::ConfigError, "hidden size must be divisible by heads");
        if (pos_encoding == PosEncoding::ROPE) {
            require((s.hidden / s.heads) % 2 == 0, ErrorCode::ConfigError, "ROPE needs an even head dimension");
        }
        if (pos_encoding == PosEncoding::SINCOS || pos_encoding == PosEncoding::SINCOS_PLUS_RELATIVE) {
            require(s.hidden % 2 == 0, ErrorCode::ConfigError, "SINCOS needs an even hidden size");
        }
        if (tokenization == Tokenization::PATCH) {
            require(patch_len > 0 && patch_stride > 0, ErrorCode::ConfigError, "patch length and stride must be positive");
            if (patch_len > context_len) {
                fail(ErrorCode::PatchTooLong, "patch_len " + std::to_string(patch_len) + " exceeds context_len " +
                                                  std::to_string(context_len));
            }
        }
        if (tokenization == Tokenization::BINNING) {
            require(bins >= 2 && bin_clip > 0.0, ErrorCode::ConfigError, "binning needs >= 2 bins and a positive clip");
        }
    }
    if (loss == LossKind::HUBER) require(huber_delta > 0.0, ErrorCode::ConfigError, "huber_delta must be positive");
}

void ModelConfig::validate_grid() const {
    validate();
    require(context_len == 256 || context_len == 512, ErrorCode::ConfigError, "context_len must be 256 or 512");
    if (family == ModelFamily::PATCH_TRANSFORMER && tokenization == Tokenization::PATCH) {
        static constexpr std::array<std::size_t, 6> kPatch{8, 16, 32, 64, 96, 128};
        require(std::find(kPatch.begin(), kPatch.end(), patch_len) != kPatch.end(), ErrorCode::ConfigError,
                "patch_len must be one of 8, 16, 32, 64, 96, 128");
    }
}

std::map<std::string, std::string> ModelConfig::to_map() const {
    std::map<std::string, std::string> m;
    m["family"] = to_string(family);
    m["tokenization"] = to_string(tokenization);
    m["patch_len"] = std::to_string(patch_len);
    m["patch_stride"] = std::to_string(patch_stride);
    m["attention"] = to_string(attention);
    m["head"] = to_string(head);
    m["pos_encoding"] = to_string(pos_encoding);
    m["loss"] = to_string(loss);
    m["scaler"] = to_string(scaler);
    m["context_len"] = std::to_string(context_len);
    m["horizon"] = std::to_string(horizon);
    m["decomposition"] = to_string(decomposition);
    m["size"] = to_string(size);
    m["hidden"] = std::to_string(hidden);
    m["ff"] = std::to_string(ff);
    m["layers"] = std::to_string(layers);
    m["heads"] = std::to_string(heads);
    m["mlp_width"] = std::to_string(mlp_width);
    m["mlp_layers"] = std::to_string(mlp_layers);
    m["block_layers"] = std::to_string(block_layers);
    m["blocks"] = std::to_string(blocks);
    m["pool_rates"] = join_sizes(pool_rates);
    m["ar_order"] = std::to_string(ar_order);
    m["ma_kernel"] = std::to_string(ma_kernel);
    m["bins"] = std::to_string(bins);
    m["bin_clip"] = format_double(bin_clip);
    m["huber_delta"] = format_double(huber_delta);
    return m;
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& kv) {
    ModelConfig c;
    for (const auto& [k, v] : kv) {
        if (k == "family") c.family = model_family_from_string(v);
        else if (k == "tokenization") c.tokenization = tokenization_from_string(v);
        else if (k == "patch_len") c.patch_len = parse_size(k, v);
        else if (k == "patch_stride") c.patch_stride = parse_size(k, v);
        else if (k == "attention") c.attention = attention_from_string(v);
        else if (k == "head") c.head = head_from_string(v);
        else if (k == "pos_encoding") c.pos_encoding = pos_encoding_from_string(v);
        else if (k == "loss") c.loss = loss_from_string(v);
        else if (k == "scaler") c.scaler = scaler_from_string(v);
        else if (k == "context_len") c.context_len = parse_size(k, v);
        else if (k == "horizon") c.horizon = parse_size(k, v);
        else if (k == "decomposition") c.decomposition = decomposition_from_string(v);
        else if (k == "size") c.size = model_size_from_string(v);
        else if (k == "hidden") c.hidden = parse_size(k, v);
        else if (k == "ff") c.ff = parse_size(k, v);
        else if (k == "layers") c.layers = parse_size(k, v);
        else if (k == "heads") c.heads = parse_size(k, v);
        else if (k == "mlp_width") c.mlp_width = parse_size(k, v);
        else if (k == "mlp_layers") c.mlp_layers = parse_size(k, v);
        else if (k == "block_layers") c.block_layers = parse_size(k, v);
        else if (k == "blocks") c.blocks = parse_size(k, v);
        else if (k == "pool_rates") c.pool_rates = split_sizes(k, v);
        else if (k == "ar_order") c.ar_order = parse_size(k, v);
        else if (k == "ma_kernel") c.ma_kernel = parse_size(k, v);
        else if (k == "bins") c.bins = parse_size(k, v);
        else if (k == "bin_clip") c.bin_clip = parse_real(k, v);
        else if (k == "huber_delta") c.huber_delta = parse_real(k, v);
        else fail(ErrorCode::ConfigError, "unknown model key '" + k + "'");
    }
    return c;
}

std::string ModelConfig::canonical() const {
    std::string s;
    for (const auto& [k, v] : to_map()) s += k + "=" + v + "\n";
    return s;
}

void TrainConfig::validate() const {
    require(lr > 0.0, ErrorCode::ConfigError, "lr must be positive");
    require(batch_series > 0 && windows_batch > 0, ErrorCode::ConfigError, "batch sizes must be positive");
    require(val_check_every > 0 && patience > 0, ErrorCode::ConfigError,
            "val_check_every and patience must be positive");
    require(dropout == 0.0, ErrorCode::ConfigError, "only dropout = 0 is supported");
}

}  // namespace specbench
