#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "model_internal.hpp"
#include "specbench/error.hpp"
#include "specbench/rng.hpp"

namespace specbench {

using nn::Shape;
using nn::Tensor;
using nn::Var;

const Tensor& TrainedModel::parameter(const std::string& name) const {
    for (const auto& p : parameters)
        if (p.name == name) return p.value;
    fail(ErrorCode::InvalidArgument, "model has no parameter '" + name + "'");
}

namespace {

constexpr std::size_t kPredictChunk = 256;
constexpr std::size_t kMaxFallbackValidation = 256;

void check_window(const ModelConfig& cfg, const WindowPair& w) {
    if (w.context.size() != cfg.context_len) {
        fail(ErrorCode::BadContextLength, "window context has length " + std::to_string(w.context.size()) +
                                              ", model expects " + std::to_string(cfg.context_len));
    }
    require(w.target.size() == cfg.horizon, ErrorCode::ShapeMismatch,
            "window target has length " + std::to_string(w.target.size()) + ", model horizon is " +
                std::to_string(cfg.horizon));
}

/// Scaled-space raw network output for a batch, location channel unscaled.
std::vector<std::vector<double>> network_outputs(const ModelConfig& cfg, const std::vector<nn::Parameter>& params,
                                                 const std::vector<std::vector<double>>& contexts,
                                                 std::vector<ScaleStats>* stats_out) {
    const std::size_t l = cfg.context_len, od = cfg.output_dim(), w = cfg.horizon * od;
    std::vector<std::vector<double>> out;
    out.reserve(contexts.size());
    for (std::size_t start = 0; start < contexts.size(); start += kPredictChunk) {
        const std::size_t b = std::min(kPredictChunk, contexts.size() - start);
        Tensor x(Shape{b, l});
        std::vector<ScaleStats> stats(b);
        for (std::size_t i = 0; i < b; ++i) {
            const auto& c = contexts[start + i];
            if (c.size() != l) {
                fail(ErrorCode::BadContextLength,
                     "context has length " + std::to_string(c.size()) + ", model expects " + std::to_string(l));
            }
            stats[i] = scale_stats(cfg.scaler, c);
            const auto s = scale(stats[i], c);
            std::copy(s.begin(), s.end(), x.data().begin() + static_cast<long>(i * l));
        }
        nn::Tape tape;
        std::vector<Var> vars;
        vars.reserve(params.size());
        for (const auto& p : params) vars.push_back(tape.constant(p.value));
        const Tensor& y = forward(cfg, tape, vars, x).value();
        for (std::size_t i = 0; i < b; ++i) {
            out.emplace_back(y.data().begin() + static_cast<long>(i * w), y.data().begin() + static_cast<long>((i + 1) * w));
            if (stats_out) stats_out->push_back(stats[i]);
        }
    }
    return out;
}

std::vector<std::vector<double>> neural_point_forecasts(const ModelConfig& cfg, const std::vector<nn::Parameter>& params,
                                                        const std::vector<std::vector<double>>& contexts) {
    std::vector<ScaleStats> stats;
    auto raw = network_outputs(cfg, params, contexts, &stats);
    const std::size_t od = cfg.output_dim();
    std::vector<std::vector<double>> out(raw.size(), std::vector<double>(cfg.horizon));
    for (std::size_t i = 0; i < raw.size(); ++i)
        for (std::size_t t = 0; t < cfg.horizon; ++t) out[i][t] = raw[i][t * od] * stats[i].scale + stats[i].loc;
    return out;
}

double mean_abs_error(const std::vector<std::vector<double>>& pred, const std::vector<const WindowPair*>& windows) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        for (std::size_t t = 0; t < pred[i].size(); ++t) acc += std::fabs(pred[i][t] - windows[i]->target[t]);
        n += pred[i].size();
    }
    return acc / static_cast<double>(n);
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace

TrainedModel fit(const ModelConfig& cfg, const std::vector<WindowPair>& train, const std::vector<WindowPair>& valid,
                 const TrainConfig& tc) {
    cfg.validate();
    tc.validate();
    require(!train.empty(), ErrorCode::EmptyTrainSet, "no training windows");
    for (const auto& w : train) check_window(cfg, w);
    for (const auto& w : valid) check_window(cfg, w);

    TrainedModel model;
    model.config = cfg;
    if (cfg.family == ModelFamily::AR_LS) {
        const auto coef = fit_ar(train, cfg.ar_order);
        model.parameters.push_back({"ar.coef", Tensor(Shape{coef.size()}, coef)});
        return model;
    }
    if (!is_trainable(cfg.family)) return model;

    model.parameters = init_parameters(cfg, tc.seed);
    const std::size_t l = cfg.context_len, h = cfg.horizon;

    // Pre-scaled windows.
    std::vector<double> xs(train.size() * l), ys(train.size() * h);
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto st = scale_stats(cfg.scaler, train[i].context);
        const auto c = scale(st, train[i].context);
        const auto t = scale(st, train[i].target);
        std::copy(c.begin(), c.end(), xs.begin() + static_cast<long>(i * l));
        std::copy(t.begin(), t.end(), ys.begin() + static_cast<long>(i * h));
    }
    std::map<std::size_t, std::vector<std::size_t>> by_series;
    for (std::size_t i = 0; i < train.size(); ++i) by_series[train[i].series_index].push_back(i);
    std::vector<const std::vector<std::size_t>*> groups;
    for (const auto& [k, v] : by_series) groups.push_back(&v);

    std::vector<const WindowPair*> val_windows;
    if (!valid.empty()) {
        for (const auto& w : valid) val_windows.push_back(&w);
    } else {
        const std::size_t m = std::min(kMaxFallbackValidation, train.size());
        for (std::size_t i = 0; i < m; ++i) val_windows.push_back(&train[i * train.size() / m]);
    }
    std::vector<std::vector<double>> val_contexts;
    for (const auto* w : val_windows) val_contexts.push_back(w->context);
    const auto validation_loss = [&](const std::vector<nn::Parameter>& params) {
        return mean_abs_error(neural_point_forecasts(cfg, params, val_contexts), val_windows);
    };

    Rng rng(derive_seed(tc.seed, hash_string("batches")));
    nn::OptimState opt;
    const nn::AdamConfig adam{tc.lr, 0.9, 0.999, 1e-8};
    std::vector<nn::Parameter> best = model.parameters;
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t bad_checks = 0;
    double loss_acc = 0.0;
    std::size_t loss_n = 0;

    std::vector<std::size_t> order(groups.size());
    for (std::size_t step = 1; step <= tc.max_steps; ++step) {
        std::iota(order.begin(), order.end(), 0);
        const std::size_t ns = std::min(tc.batch_series, groups.size());
        for (std::size_t i = 0; i < ns; ++i) std::swap(order[i], order[i + rng.below(groups.size() - i)]);
        std::size_t pool = 0;
        for (std::size_t i = 0; i < ns; ++i) pool += groups[order[i]]->size();

        const std::size_t b = tc.windows_batch;
        Tensor x(Shape{b, l}), y(Shape{b, h});
        for (std::size_t r = 0; r < b; ++r) {
            std::size_t pick = rng.below(pool);
            std::size_t g = 0;
            while (pick >= groups[order[g]]->size()) pick -= groups[order[g++]]->size();
            const std::size_t wi = (*groups[order[g]])[pick];
            std::copy_n(xs.begin() + static_cast<long>(wi * l), l, x.data().begin() + static_cast<long>(r * l));
            std::copy_n(ys.begin() + static_cast<long>(wi * h), h, y.data().begin() + static_cast<long>(r * h));
        }

        nn::Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(model.parameters.size());
        for (const auto& p : model.parameters) leaves.push_back(tape.leaf(p.value));
        const Var pred = forward(cfg, tape, leaves, x);
        const Var loss = loss_var(cfg.loss, pred, tape.constant(std::move(y)), cfg.huber_delta);
        const double lv = loss.value().item();
        if (!std::isfinite(lv)) {
            std::ostringstream msg;
            msg << "non-finite training loss at step " << step << " (" << to_string(cfg.family) << ", seed "
                << tc.seed << ", last mean loss " << (loss_n ? loss_acc / static_cast<double>(loss_n) : 0.0) << ")";
            fail(ErrorCode::DivergedLoss, msg.str());
        }
        tape.backward(loss);
        std::vector<Tensor> grads;
        grads.reserve(leaves.size());
        for (const auto& v : leaves) {
            grads.push_back(tape.take_grad(v.id));
            if (!all_finite(grads.back().data())) {
                fail(ErrorCode::DivergedLoss, "non-finite gradient at step " + std::to_string(step) + " in '" +
                                                  model.parameters[grads.size() - 1].name + "'");
            }
        }
        nn::adam_step(model.parameters, grads, opt, adam);
        model.steps_run = step;
        loss_acc += lv;
        ++loss_n;

        if (step % tc.val_check_every == 0 || step == tc.max_steps) {
            const double val = validation_loss(model.parameters);
            model.history.push_back({step, loss_acc / static_cast<double>(loss_n), val});
            loss_acc = 0.0;
            loss_n = 0;
            if (val < best_val) {
                best_val = val;
                best = model.parameters;
                model.best_step = step;
                bad_checks = 0;
            } else if (++bad_checks >= tc.patience) {
                break;
            }
        }
    }
    model.parameters = std::move(best);
    return model;
}

std::vector<std::vector<double>> predict_batch(const TrainedModel& model, const std::vector<std::vector<double>>& contexts) {
    const ModelConfig& cfg = model.config;
    for (const auto& c : contexts) {
        if (c.size() != cfg.context_len) {
            fail(ErrorCode::BadContextLength, "context has length " + std::to_string(c.size()) + ", model expects " +
                                                  std::to_string(cfg.context_len));
        }
    }
    if (is_trainable(cfg.family)) return neural_point_forecasts(cfg, model.parameters, contexts);
    std::vector<std::vector<double>> out;
    out.reserve(contexts.size());
    for (const auto& c : contexts) {
        switch (cfg.family) {
            case ModelFamily::NAIVE_LAST: out.push_back(naive_last_forecast(c, cfg.horizon)); break;
            case ModelFamily::SEASONAL_NAIVE:
                out.push_back(seasonal_naive_forecast(c, cfg.horizon, dominant_period(c)));
                break;
            case ModelFamily::SES: out.push_back(ses_forecast(c, cfg.horizon)); break;
            case ModelFamily::HOLT: out.push_back(holt_forecast(c, cfg.horizon)); break;
            case ModelFamily::AR_LS: out.push_back(ar_forecast(model.parameter("ar.coef").data(), c, cfg.horizon)); break;
            default: fail(ErrorCode::UnsupportedFamily, to_string(cfg.family));
        }
    }
    return out;
}

std::vector<double> predict(const TrainedModel& model, std::span<const double> context) {
    return predict_batch(model, {std::vector<double>(context.begin(), context.end())}).front();
}

std::vector<std::vector<double>> predict_quantiles(const TrainedModel& model, std::span<const double> context,
                                                   const std::vector<double>& levels) {
    const ModelConfig& cfg = model.config;
    require(cfg.loss == LossKind::STUDENT_T && is_trainable(cfg.family), ErrorCode::UnsupportedFamily,
            "quantiles need a STUDENT_T model");
    std::vector<ScaleStats> stats;
    const auto raw = network_outputs(cfg, model.parameters, {std::vector<double>(context.begin(), context.end())}, &stats);
    const auto softplus = [](double v) { return v > 30.0 ? v : std::log1p(std::exp(v)); };
    std::vector<std::vector<double>> out(levels.size(), std::vector<double>(cfg.horizon));
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        const double mu = raw[0][3 * t];
        const double sigma = softplus(raw[0][3 * t + 1]);
        const double nu = 2.0 + softplus(raw[0][3 * t + 2]);
        const boost::math::students_t_distribution<double> dist(nu);
        for (std::size_t q = 0; q < levels.size(); ++q) {
            require(levels[q] > 0.0 && levels[q] < 1.0, ErrorCode::InvalidArgument, "quantile level outside (0, 1)");
            const double z = mu + sigma * boost::math::quantile(dist, levels[q]);
            out[q][t] = z * stats[0].scale + stats[0].loc;
        }
    }
    return out;
}

Tensor embed(const TrainedModel& model, std::span<const double> context) {
    const ModelConfig& cfg = model.config;
    require(cfg.family == ModelFamily::PATCH_TRANSFORMER, ErrorCode::UnsupportedFamily,
            "embeddings are defined for PATCH_TRANSFORMER only");
    if (context.size() != cfg.context_len) {
        fail(ErrorCode::BadContextLength, "context has length " + std::to_string(context.size()) + ", model expects " +
                                              std::to_string(cfg.context_len));
    }
    const auto st = scale_stats(cfg.scaler, context);
    const auto s = scale(st, context);
    Tensor x(Shape{1, cfg.context_len}, s);
    nn::Tape tape;
    std::vector<Var> vars;
    for (const auto& p : model.parameters) vars.push_back(tape.constant(p.value));
    Var e;
    forward(cfg, tape, vars, x, &e);
    const Tensor& v = e.value();
    return v.reshaped(Shape{v.dim(1), v.dim(2)});
}

std::size_t count_params(const TrainedModel& model) {
    std::size_t n = 0;
    for (const auto& p : model.parameters) n += p.value.size();
    return n;
}

}  // namespace specbench
