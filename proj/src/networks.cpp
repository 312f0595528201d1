#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "model_internal.hpp"
#include "specbench/error.hpp"
#include "specbench/rng.hpp"

namespace specbench {

using nn::Shape;
using nn::Tensor;
using nn::Var;

namespace {

enum class Init { Uniform, Zeros, Ones };

struct ParamSpec {
    std::string name;
    Shape shape;
    Init init;
    std::size_t fan_in;
};

struct Layout {
    std::vector<ParamSpec> specs;

    void linear(const std::string& name, std::size_t in, std::size_t out, bool bias = true) {
        specs.push_back({name + ".w", {in, out}, Init::Uniform, in});
        if (bias) specs.push_back({name + ".b", {out}, Init::Zeros, in});
    }
    void norm(const std::string& name, std::size_t d) {
        specs.push_back({name + ".g", {d}, Init::Ones, d});
        specs.push_back({name + ".b", {d}, Init::Zeros, d});
    }
};

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

bool uses_relative(PosEncoding p) { return p == PosEncoding::RELATIVE || p == PosEncoding::SINCOS_PLUS_RELATIVE; }
bool uses_sincos(PosEncoding p) { return p == PosEncoding::SINCOS || p == PosEncoding::SINCOS_PLUS_RELATIVE; }

Layout layout_of(const ModelConfig& cfg) {
    Layout L;
    const std::size_t l = cfg.context_len;
    const std::size_t out = cfg.horizon * cfg.output_dim();
    switch (cfg.family) {
        case ModelFamily::NLINEAR:
            L.linear("linear", l, out);
            break;
        case ModelFamily::DLINEAR:
            L.linear("trend", l, out);
            L.linear("seasonal", l, out);
            break;
        case ModelFamily::MLP: {
            std::size_t in = l;
            for (std::size_t i = 0; i < cfg.mlp_layers; ++i) {
                L.linear("mlp" + std::to_string(i), in, cfg.mlp_width);
                in = cfg.mlp_width;
            }
            L.linear("out", in, out);
            break;
        }
        case ModelFamily::NBEATS_LITE:
        case ModelFamily::NHITS_LITE: {
            const bool hits = cfg.family == ModelFamily::NHITS_LITE;
            for (std::size_t b = 0; b < cfg.blocks; ++b) {
                const std::string p = "block" + std::to_string(b);
                const std::size_t rate = hits ? cfg.pool_rates[b] : 1;
                std::size_t in = hits ? ceil_div(l, rate) : l;
                for (std::size_t j = 0; j < cfg.block_layers; ++j) {
                    L.linear(p + ".fc" + std::to_string(j), in, cfg.mlp_width);
                    in = cfg.mlp_width;
                }
                const std::size_t knots = hits ? ceil_div(cfg.horizon, rate) : cfg.horizon;
                L.linear(p + ".theta", in, l + knots * cfg.output_dim());
            }
            break;
        }
        case ModelFamily::PATCH_TRANSFORMER: {
            const auto s = cfg.shape();
            const std::size_t n_tok = token_count(cfg);
            L.linear("embed", token_dim(cfg), s.hidden);
            if (uses_relative(cfg.pos_encoding)) {
                L.specs.push_back({"rel_bias", {kRelativeBuckets, s.heads}, Init::Uniform, kRelativeBuckets});
            }
            for (std::size_t i = 0; i < s.layers; ++i) {
                const std::string p = "layer" + std::to_string(i);
                L.norm(p + ".ln1", s.hidden);
                L.linear(p + ".attn.q", s.hidden, s.hidden, false);
                L.linear(p + ".attn.k", s.hidden, s.hidden, false);
                L.linear(p + ".attn.v", s.hidden, s.hidden, false);
                L.linear(p + ".attn.o", s.hidden, s.hidden, false);
                L.norm(p + ".ln2", s.hidden);
                L.linear(p + ".ff1", s.hidden, s.ff);
                L.linear(p + ".ff2", s.ff, s.hidden);
            }
            L.norm("final_ln", s.hidden);
            const std::size_t flat = n_tok * s.hidden;
            if (cfg.head == HeadKind::LINEAR) {
                L.linear("head", flat, out);
            } else {
                L.linear("head.fc1", flat, s.hidden);
                L.linear("head.fc2", s.hidden, out);
                L.linear("head.skip", flat, out);
            }
            break;
        }
        default:
            break;
    }
    return L;
}

class Bound {
public:
    Bound(const Layout& layout, const std::vector<Var>& vars) {
        require(vars.size() == layout.specs.size(), ErrorCode::ShapeMismatch,
                "expected " + std::to_string(layout.specs.size()) + " parameters, got " + std::to_string(vars.size()));
        for (std::size_t i = 0; i < vars.size(); ++i) {
            require(vars[i].shape() == layout.specs[i].shape, ErrorCode::ShapeMismatch,
                    "parameter '" + layout.specs[i].name + "' has shape " + nn::shape_str(vars[i].shape()));
            by_name_.emplace(layout.specs[i].name, vars[i]);
        }
    }
    Var operator()(const std::string& name) const { return by_name_.at(name); }
    Var linear(const std::string& name, Var x) const {
        Var y = nn::matmul(x, (*this)(name + ".w"));
        auto it = by_name_.find(name + ".b");
        return it == by_name_.end() ? y : nn::add(y, it->second);
    }
    Var norm(const std::string& name, Var x) const {
        return nn::add(nn::mul(nn::layer_norm(x), (*this)(name + ".g")), (*this)(name + ".b"));
    }

private:
    std::map<std::string, Var> by_name_;
};

/// Column j averages x[j*rate, min((j+1)*rate, l)).
Tensor pooling_matrix(std::size_t l, std::size_t rate) {
    const std::size_t m = ceil_div(l, rate);
    Tensor p(Shape{l, m}, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t lo = j * rate, hi = std::min(l, lo + rate);
        for (std::size_t t = lo; t < hi; ++t) p[t * m + j] = 1.0 / static_cast<double>(hi - lo);
    }
    return p;
}

/// Linear interpolation from `knots` evenly spaced knots onto h steps (ends aligned).
Tensor interpolation_matrix(std::size_t knots, std::size_t h) {
    Tensor m(Shape{knots, h}, 0.0);
    for (std::size_t t = 0; t < h; ++t) {
        if (knots == 1 || h == 1) {
            m[t] = 1.0;
            continue;
        }
        const double u = static_cast<double>(t) * static_cast<double>(knots - 1) / static_cast<double>(h - 1);
        const std::size_t lo = std::min(static_cast<std::size_t>(u), knots - 1);
        const double frac = u - static_cast<double>(lo);
        m[lo * h + t] += 1.0 - frac;
        if (frac > 0.0) m[(lo + 1) * h + t] += frac;
    }
    return m;
}

/// [B, h*od] step-major -> [B, h] or [B, h, od].
Var shape_output(Var flat, std::size_t batch, const ModelConfig& cfg) {
    if (cfg.output_dim() == 1) return flat;
    return nn::reshape(flat, Shape{batch, cfg.horizon, cfg.output_dim()});
}

/// Adds a per-row level to the location channel of a [B, h*od] output.
Var add_level(Var out, const std::vector<double>& level, const ModelConfig& cfg) {
    const std::size_t b = level.size(), od = cfg.output_dim(), w = cfg.horizon * od;
    Tensor lv(Shape{b, w}, 0.0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t t = 0; t < cfg.horizon; ++t) lv[i * w + t * od] = level[i];
    return nn::add(out, out.tape->constant(std::move(lv)));
}

Var rope(Var x, const Tensor& cos_t, const Tensor& sin_t) {
    nn::Tape& t = *x.tape;
    const std::size_t d = x.shape().back(), half = d / 2, ax = x.shape().size() - 1;
    Var rotated = nn::concat({nn::neg(nn::slice(x, ax, half, half)), nn::slice(x, ax, 0, half)}, ax);
    return nn::add(nn::mul(x, t.constant(cos_t)), nn::mul(rotated, t.constant(sin_t)));
}

Var transformer_forward(const ModelConfig& cfg, nn::Tape& tape, const Bound& P, const Tensor& x, Var* embedding) {
    const auto s = cfg.shape();
    const std::size_t batch = x.dim(0), l = x.dim(1);
    const std::size_t n_tok = token_count(cfg), tdim = token_dim(cfg);
    const std::size_t d = s.hidden, heads = s.heads, dk = d / heads;

    Tensor tokens(Shape{batch, n_tok, tdim});
    for (std::size_t b = 0; b < batch; ++b) {
        const Tensor tk = tokenize(cfg, x.data().subspan(b * l, l));
        std::copy(tk.data().begin(), tk.data().end(), tokens.data().begin() + static_cast<long>(b * n_tok * tdim));
    }
    Var h = P.linear("embed", tape.constant(std::move(tokens)));
    if (uses_sincos(cfg.pos_encoding)) h = nn::add(h, tape.constant(sincos_table(n_tok, d)));

    const bool bidir = cfg.attention == AttentionKind::BIDIRECTIONAL;
    std::optional<Var> bias;
    if (uses_relative(cfg.pos_encoding)) {
        std::vector<std::size_t> idx(n_tok * n_tok);
        for (std::size_t i = 0; i < n_tok; ++i)
            for (std::size_t j = 0; j < n_tok; ++j)
                idx[i * n_tok + j] = relative_bucket(static_cast<long>(i), static_cast<long>(j), bidir);
        Var rb = nn::gather_rows(P("rel_bias"), idx);  // [N*N, H]
        bias = nn::permute(nn::reshape(rb, Shape{n_tok, n_tok, heads}), {2, 0, 1});
    }
    std::optional<Var> mask;
    if (!bidir) {
        Tensor m(Shape{n_tok, n_tok}, 0.0);
        for (std::size_t i = 0; i < n_tok; ++i)
            for (std::size_t j = i + 1; j < n_tok; ++j) m[i * n_tok + j] = -std::numeric_limits<double>::infinity();
        mask = tape.constant(std::move(m));
    }
    Tensor rope_cos, rope_sin;
    if (cfg.pos_encoding == PosEncoding::ROPE) {
        rope_cos = Tensor(Shape{n_tok, dk});
        rope_sin = Tensor(Shape{n_tok, dk});
        for (std::size_t p = 0; p < n_tok; ++p) {
            for (std::size_t c = 0; c < dk / 2; ++c) {
                const double th = static_cast<double>(p) *
                                  std::pow(10000.0, -2.0 * static_cast<double>(c) / static_cast<double>(dk));
                rope_cos[p * dk + c] = rope_cos[p * dk + c + dk / 2] = std::cos(th);
                rope_sin[p * dk + c] = rope_sin[p * dk + c + dk / 2] = std::sin(th);
            }
        }
    }

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
    const auto split_heads = [&](Var v) {
        return nn::permute(nn::reshape(v, Shape{batch, n_tok, heads, dk}), {0, 2, 1, 3});
    };
    for (std::size_t i = 0; i < s.layers; ++i) {
        const std::string p = "layer" + std::to_string(i);
        Var a = P.norm(p + ".ln1", h);
        Var q = split_heads(P.linear(p + ".attn.q", a));
        Var k = split_heads(P.linear(p + ".attn.k", a));
        Var v = split_heads(P.linear(p + ".attn.v", a));
        if (cfg.pos_encoding == PosEncoding::ROPE) {
            q = rope(q, rope_cos, rope_sin);
            k = rope(k, rope_cos, rope_sin);
        }
        Var scores = nn::mul_scalar(nn::matmul(q, k, false, true), inv_sqrt_dk);  // [B, H, N, N]
        if (bias) scores = nn::add(scores, *bias);
        if (mask) scores = nn::add(scores, *mask);
        Var ctx = nn::matmul(nn::softmax(scores), v);  // [B, H, N, dk]
        ctx = nn::reshape(nn::permute(ctx, {0, 2, 1, 3}), Shape{batch, n_tok, d});
        h = nn::add(h, P.linear(p + ".attn.o", ctx));
        Var f = P.norm(p + ".ln2", h);
        f = P.linear(p + ".ff2", nn::relu(P.linear(p + ".ff1", f)));
        h = nn::add(h, f);
    }
    h = P.norm("final_ln", h);
    if (embedding) *embedding = h;

    Var flat = nn::reshape(h, Shape{batch, n_tok * d});
    Var out;
    if (cfg.head == HeadKind::LINEAR) {
        out = P.linear("head", flat);
    } else {
        Var hidden = nn::relu(P.linear("head.fc1", flat));
        out = nn::add(P.linear("head.fc2", hidden), P.linear("head.skip", flat));
    }
    return shape_output(out, batch, cfg);
}

}  // namespace

std::vector<std::string> parameter_names(const ModelConfig& cfg) {
    std::vector<std::string> names;
    for (const auto& s : layout_of(cfg).specs) names.push_back(s.name);
    return names;
}

std::vector<nn::Parameter> init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (!is_trainable(cfg.family)) return {};
    Rng rng(derive_seed(seed, hash_string("init")));
    std::vector<nn::Parameter> params;
    for (const auto& spec : layout_of(cfg).specs) {
        Tensor t(spec.shape, 0.0);
        if (spec.init == Init::Ones) {
            for (auto& v : t.data()) v = 1.0;
        } else if (spec.init == Init::Uniform) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
            for (auto& v : t.data()) v = rng.uniform(-bound, bound);
        }
        params.push_back({spec.name, std::move(t)});
    }
    return params;
}

Var forward(const ModelConfig& cfg, nn::Tape& tape, const std::vector<Var>& params, const Tensor& x, Var* embedding) {
    require(is_trainable(cfg.family), ErrorCode::UnsupportedFamily,
            to_string(cfg.family) + " has no differentiable forward pass");
    require(x.rank() == 2, ErrorCode::ShapeMismatch, "forward expects contexts [B, l]");
    if (x.dim(1) != cfg.context_len) {
        fail(ErrorCode::BadContextLength, "context has length " + std::to_string(x.dim(1)) + ", model expects " +
                                              std::to_string(cfg.context_len));
    }
    if (embedding && cfg.family != ModelFamily::PATCH_TRANSFORMER) {
        fail(ErrorCode::UnsupportedFamily, "embeddings are defined for PATCH_TRANSFORMER only");
    }
    const Layout layout = layout_of(cfg);
    const Bound P(layout, params);
    const std::size_t batch = x.dim(0), l = x.dim(1), out_w = cfg.horizon * cfg.output_dim();

    switch (cfg.family) {
        case ModelFamily::NLINEAR: {
            Tensor shifted = x;
            std::vector<double> last(batch);
            for (std::size_t b = 0; b < batch; ++b) {
                last[b] = x[b * l + l - 1];
                for (std::size_t t = 0; t < l; ++t) shifted[b * l + t] -= last[b];
            }
            Var y = P.linear("linear", tape.constant(std::move(shifted)));
            return shape_output(add_level(y, last, cfg), batch, cfg);
        }
        case ModelFamily::DLINEAR: {
            Tensor trend(Shape{batch, l}), seasonal(Shape{batch, l});
            for (std::size_t b = 0; b < batch; ++b) {
                const auto parts = moving_average_decompose(x.data().subspan(b * l, l), cfg.ma_kernel);
                std::copy(parts.trend.begin(), parts.trend.end(), trend.data().begin() + static_cast<long>(b * l));
                std::copy(parts.seasonal.begin(), parts.seasonal.end(),
                          seasonal.data().begin() + static_cast<long>(b * l));
            }
            Var y = nn::add(P.linear("trend", tape.constant(std::move(trend))),
                            P.linear("seasonal", tape.constant(std::move(seasonal))));
            return shape_output(y, batch, cfg);
        }
        case ModelFamily::MLP: {
            Var h = tape.constant(x);
            for (std::size_t i = 0; i < cfg.mlp_layers; ++i) h = nn::relu(P.linear("mlp" + std::to_string(i), h));
            return shape_output(P.linear("out", h), batch, cfg);
        }
        case ModelFamily::NBEATS_LITE:
        case ModelFamily::NHITS_LITE: {
            const bool hits = cfg.family == ModelFamily::NHITS_LITE;
            const std::size_t od = cfg.output_dim();
            Var residual = tape.constant(x);
            std::optional<Var> forecast;
            for (std::size_t b = 0; b < cfg.blocks; ++b) {
                const std::string p = "block" + std::to_string(b);
                const std::size_t rate = hits ? cfg.pool_rates[b] : 1;
                Var h = hits ? nn::matmul(residual, tape.constant(pooling_matrix(l, rate))) : residual;
                for (std::size_t j = 0; j < cfg.block_layers; ++j) h = nn::relu(P.linear(p + ".fc" + std::to_string(j), h));
                Var theta = P.linear(p + ".theta", h);
                const std::size_t knots = hits ? ceil_div(cfg.horizon, rate) : cfg.horizon;
                residual = nn::sub(residual, nn::slice(theta, 1, 0, l));
                Var f = nn::slice(theta, 1, l, knots * od);
                if (hits) {
                    // [B, od, knots] x [knots, h] -> [B, od, h] -> step-major [B, h*od]
                    f = nn::matmul(nn::reshape(f, Shape{batch, od, knots}),
                                   tape.constant(interpolation_matrix(knots, cfg.horizon)));
                    f = od == 1 ? nn::reshape(f, Shape{batch, cfg.horizon})
                                : nn::reshape(nn::transpose(f, 1, 2), Shape{batch, out_w});
                } else if (od > 1) {
                    f = nn::reshape(nn::transpose(nn::reshape(f, Shape{batch, od, knots}), 1, 2), Shape{batch, out_w});
                }
                forecast = forecast ? nn::add(*forecast, f) : f;
            }
            return shape_output(*forecast, batch, cfg);
        }
        case ModelFamily::PATCH_TRANSFORMER:
            return transformer_forward(cfg, tape, P, x, embedding);
        default:
            break;
    }
    fail(ErrorCode::UnsupportedFamily, to_string(cfg.family));
}

std::size_t count_params(const ModelConfig& cfg) {
    cfg.validate();
    if (cfg.family == ModelFamily::AR_LS) return cfg.ar_order + 1;
    std::size_t n = 0;
    for (const auto& s : layout_of(cfg).specs) n += nn::numel(s.shape);
    return n;
}

std::size_t estimate_flops(const ModelConfig& cfg) {
    cfg.validate();
    const std::size_t l = cfg.context_len, h = cfg.horizon, od = cfg.output_dim(), out = h * od;
    const std::size_t w = cfg.mlp_width;
    switch (cfg.family) {
        case ModelFamily::NAIVE_LAST: return 0;
        case ModelFamily::SEASONAL_NAIVE: return l * (l / 2 + 1);
        case ModelFamily::SES: return kSmoothingGrid * l;
        case ModelFamily::HOLT: return kSmoothingGrid * kSmoothingGrid * 2 * l;
        case ModelFamily::AR_LS: return cfg.ar_order * h;
        case ModelFamily::NLINEAR: return l * out;
        case ModelFamily::DLINEAR: return 2 * l * out;
        case ModelFamily::MLP: {
            if (cfg.mlp_layers == 0) return l * out;
            return l * w + (cfg.mlp_layers - 1) * w * w + w * out;
        }
        case ModelFamily::NBEATS_LITE:
        case ModelFamily::NHITS_LITE: {
            const bool hits = cfg.family == ModelFamily::NHITS_LITE;
            std::size_t total = 0;
            for (std::size_t b = 0; b < cfg.blocks; ++b) {
                const std::size_t rate = hits ? cfg.pool_rates[b] : 1;
                const std::size_t in = hits ? ceil_div(l, rate) : l;
                const std::size_t knots = hits ? ceil_div(h, rate) : h;
                if (hits) total += l * in + od * knots * h;
                std::size_t prev = in;
                for (std::size_t j = 0; j < cfg.block_layers; ++j) {
                    total += prev * w;
                    prev = w;
                }
                total += prev * (l + knots * od);
            }
            return total;
        }
        case ModelFamily::PATCH_TRANSFORMER: {
            const auto s = cfg.shape();
            const std::size_t n = token_count(cfg), d = s.hidden;
            std::size_t total = n * token_dim(cfg) * d;
            total += s.layers * (4 * n * d * d + 2 * n * n * d + 2 * n * d * s.ff);
            const std::size_t flat = n * d;
            total += cfg.head == HeadKind::LINEAR ? flat * out : flat * d + d * out + flat * out;
            return total;
        }
    }
    return 0;
}

}  // namespace specbench
