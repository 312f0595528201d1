#include <algorithm>
#include <cmath>
#include <numbers>

#include "specbench/error.hpp"
#include "specbench/models.hpp"

namespace specbench {

namespace {

double median_of(std::vector<double> v) {
    const std::size_t n = v.size();
    std::sort(v.begin(), v.end());
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

ScaleStats scale_stats(ScalerKind kind, std::span<const double> context) {
    require(!context.empty(), ErrorCode::InvalidArgument, "cannot scale an empty context");
    ScaleStats s;
    if (kind == ScalerKind::REVIN_STANDARD) {
        double mean = 0.0;
        for (double v : context) mean += v;
        mean /= static_cast<double>(context.size());
        double var = 0.0;
        for (double v : context) var += (v - mean) * (v - mean);
        var /= static_cast<double>(context.size());
        s.loc = mean;
        s.scale = std::sqrt(var) + kScaleEps;
    } else {
        const double med = median_of({context.begin(), context.end()});
        std::vector<double> dev(context.size());
        for (std::size_t i = 0; i < context.size(); ++i) dev[i] = std::fabs(context[i] - med);
        s.loc = med;
        s.scale = median_of(std::move(dev)) + kScaleEps;
    }
    return s;
}

std::vector<double> scale(const ScaleStats& s, std::span<const double> values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - s.loc) / s.scale;
    return out;
}

std::vector<double> unscale(const ScaleStats& s, std::span<const double> values) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] * s.scale + s.loc;
    return out;
}

TrendSeasonal moving_average_decompose(std::span<const double> x, std::size_t kernel) {
    require(kernel > 0, ErrorCode::InvalidArgument, "moving-average kernel must be positive");
    require(!x.empty(), ErrorCode::InvalidArgument, "cannot decompose an empty series");
    const std::size_t n = x.size();
    const std::size_t front = (kernel - 1) / 2;
    const auto at = [&](long i) { return x[static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(n) - 1))]; };
    TrendSeasonal out{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t j = 0; j < kernel; ++j) acc += at(static_cast<long>(t + j) - static_cast<long>(front));
        out.trend[t] = acc / static_cast<double>(kernel);
        out.seasonal[t] = x[t] - out.trend[t];
    }
    return out;
}

std::size_t token_count(const ModelConfig& cfg) {
    switch (cfg.tokenization) {
        case Tokenization::PATCH:
            if (cfg.patch_len > cfg.context_len) {
                fail(ErrorCode::PatchTooLong, "patch_len " + std::to_string(cfg.patch_len) + " exceeds context_len " +
                                                  std::to_string(cfg.context_len));
            }
            return (cfg.context_len - cfg.patch_len) / cfg.patch_stride + 1;
        default:
            return cfg.context_len;
    }
}

std::size_t token_dim(const ModelConfig& cfg) {
    std::size_t d = 1;
    switch (cfg.tokenization) {
        case Tokenization::NONE: d = 1; break;
        case Tokenization::PATCH: d = cfg.patch_len; break;
        case Tokenization::BINNING: d = cfg.bins; break;
        case Tokenization::LAGS: d = 3; break;
    }
    return cfg.decomposition == Decomposition::MOVING_AVG ? 2 * d : d;
}

std::size_t bin_index(double value, std::size_t bins, double clip) {
    const double u = (value + clip) / (2.0 * clip) * static_cast<double>(bins);
    if (!(u > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(u), bins - 1);
}

double bin_midpoint(std::size_t bin, std::size_t bins, double clip) {
    return -clip + (static_cast<double>(bin) + 0.5) * (2.0 * clip / static_cast<double>(bins));
}

namespace {

/// Token features of one stream, written into columns [col0, col0 + width) of out.
void tokenize_stream(const ModelConfig& cfg, std::span<const double> x, nn::Tensor& out, std::size_t col0) {
    const std::size_t n_tok = out.dim(0);
    const std::size_t stride = out.dim(1);
    auto o = out.data();
    switch (cfg.tokenization) {
        case Tokenization::NONE:
            for (std::size_t t = 0; t < n_tok; ++t) o[t * stride + col0] = x[t];
            break;
        case Tokenization::PATCH:
            for (std::size_t p = 0; p < n_tok; ++p)
                for (std::size_t j = 0; j < cfg.patch_len; ++j) o[p * stride + col0 + j] = x[p * cfg.patch_stride + j];
            break;
        case Tokenization::BINNING:
            for (std::size_t t = 0; t < n_tok; ++t) o[t * stride + col0 + bin_index(x[t], cfg.bins, cfg.bin_clip)] = 1.0;
            break;
        case Tokenization::LAGS:
            for (std::size_t t = 0; t < n_tok; ++t)
                for (std::size_t lag = 0; lag < 3; ++lag) o[t * stride + col0 + lag] = t >= lag ? x[t - lag] : 0.0;
            break;
    }
}

}  // namespace

nn::Tensor tokenize(const ModelConfig& cfg, std::span<const double> scaled_context) {
    if (scaled_context.size() != cfg.context_len) {
        fail(ErrorCode::BadContextLength, "context has length " + std::to_string(scaled_context.size()) +
                                              ", model expects " + std::to_string(cfg.context_len));
    }
    const std::size_t n_tok = token_count(cfg);
    const std::size_t dim = token_dim(cfg);
    nn::Tensor out(nn::Shape{n_tok, dim}, 0.0);
    if (cfg.decomposition == Decomposition::MOVING_AVG) {
        const auto parts = moving_average_decompose(scaled_context, cfg.ma_kernel);
        tokenize_stream(cfg, parts.trend, out, 0);
        tokenize_stream(cfg, parts.seasonal, out, dim / 2);
    } else {
        tokenize_stream(cfg, scaled_context, out, 0);
    }
    return out;
}

nn::Tensor sincos_table(std::size_t tokens, std::size_t dim) {
    nn::Tensor t(nn::Shape{tokens, dim}, 0.0);
    for (std::size_t p = 0; p < tokens; ++p) {
        for (std::size_t i = 0; 2 * i < dim; ++i) {
            const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
            const double a = static_cast<double>(p) * freq;
            t[p * dim + 2 * i] = std::sin(a);
            if (2 * i + 1 < dim) t[p * dim + 2 * i + 1] = std::cos(a);
        }
    }
    return t;
}

std::size_t relative_bucket(long query, long key, bool bidirectional, std::size_t buckets, std::size_t max_distance) {
    const long rel = key - query;
    std::size_t nb = buckets;
    std::size_t offset = 0;
    long n = 0;
    if (bidirectional) {
        nb /= 2;
        if (rel > 0) offset = nb;
        n = rel < 0 ? -rel : rel;
    } else {
        n = rel < 0 ? -rel : 0;
    }
    const std::size_t max_exact = nb / 2;
    if (static_cast<std::size_t>(n) < max_exact) return offset + static_cast<std::size_t>(n);
    const double scaled = std::log(static_cast<double>(n) / static_cast<double>(max_exact)) /
                          std::log(static_cast<double>(max_distance) / static_cast<double>(max_exact)) *
                          static_cast<double>(nb - max_exact);
    const std::size_t b = max_exact + static_cast<std::size_t>(scaled);
    return offset + std::min(b, nb - 1);
}

nn::Tensor rope_rotate(const nn::Tensor& x) {
    require(x.rank() == 2 && x.dim(1) % 2 == 0, ErrorCode::ShapeMismatch, "rope_rotate needs [tokens, even dim]");
    const std::size_t n = x.dim(0), d = x.dim(1), half = d / 2;
    nn::Tensor out(x.shape());
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t c = 0; c < half; ++c) {
            const double theta =
                static_cast<double>(p) * std::pow(10000.0, -2.0 * static_cast<double>(c) / static_cast<double>(d));
            const double a = x[p * d + c], b = x[p * d + c + half];
            out[p * d + c] = a * std::cos(theta) - b * std::sin(theta);
            out[p * d + c + half] = a * std::sin(theta) + b * std::cos(theta);
        }
    }
    return out;
}

// ------------------------------------------------------------------ losses

double student_t_nll(double y, double mu, double sigma, double nu) {
    const double z = (y - mu) / sigma;
    return -nn::lanczos_lgamma(0.5 * (nu + 1.0)) + nn::lanczos_lgamma(0.5 * nu) +
           0.5 * std::log(nu * std::numbers::pi) + std::log(sigma) + 0.5 * (nu + 1.0) * std::log1p(z * z / nu);
}

double loss_value(LossKind kind, std::span<const double> y, std::span<const double> params, double huber_delta) {
    const std::size_t per = kind == LossKind::STUDENT_T ? 3 : 1;
    require(params.size() == y.size() * per && !y.empty(), ErrorCode::ShapeMismatch,
            "loss inputs have mismatched lengths");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (kind == LossKind::STUDENT_T) {
            acc += student_t_nll(y[i], params[3 * i], params[3 * i + 1], params[3 * i + 2]);
            continue;
        }
        const double r = y[i] - params[i];
        switch (kind) {
            case LossKind::MAE: acc += std::fabs(r); break;
            case LossKind::MSE: acc += r * r; break;
            case LossKind::HUBER:
                acc += std::fabs(r) <= huber_delta ? 0.5 * r * r : huber_delta * (std::fabs(r) - 0.5 * huber_delta);
                break;
            default: break;
        }
    }
    return acc / static_cast<double>(y.size());
}

nn::Var loss_var(LossKind kind, nn::Var pred, nn::Var target, double huber_delta) {
    using namespace nn;
    if (kind != LossKind::STUDENT_T) {
        require(pred.shape() == target.shape(), ErrorCode::ShapeMismatch,
                "prediction " + shape_str(pred.shape()) + " vs target " + shape_str(target.shape()));
        const Var r = sub(pred, target);
        switch (kind) {
            case LossKind::MAE: return mean_all(nn::abs(r));
            case LossKind::MSE: return mean_all(mul(r, r));
            default: return mean_all(huber(r, huber_delta));
        }
    }
    const Shape& ps = pred.shape();
    require(ps.size() == 3 && ps[2] == 3 && target.shape() == Shape{ps[0], ps[1]}, ErrorCode::ShapeMismatch,
            "STUDENT_T expects [B, h, 3] against [B, h]");
    const Shape flat{ps[0], ps[1]};
    const Var mu = reshape(slice(pred, 2, 0, 1), flat);
    const Var sigma = softplus(reshape(slice(pred, 2, 1, 1), flat));
    const Var nu = add_scalar(softplus(reshape(slice(pred, 2, 2, 1), flat)), 2.0);
    const Var z = nn::div(sub(target, mu), sigma);
    const Var nu_half = mul_scalar(nu, 0.5);
    Var nll = neg(nn::lgamma(add_scalar(nu_half, 0.5)));
    nll = add(nll, nn::lgamma(nu_half));
    nll = add(nll, mul_scalar(nn::log(mul_scalar(nu, std::numbers::pi)), 0.5));
    nll = add(nll, nn::log(sigma));
    const Var tail = nn::log(add_scalar(nn::div(mul(z, z), nu), 1.0));
    nll = add(nll, mul(add_scalar(nu_half, 0.5), tail));
    return mean_all(nll);
}

}  // namespace specbench
