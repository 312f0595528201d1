#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <nlohmann/json.hpp>
#include <thread>

#include "specbench/error.hpp"
#include "specbench/harness.hpp"
#include "specbench/preprocess.hpp"
#include "specbench/rng.hpp"

namespace specbench {

namespace {

using nlohmann::json;

class Fnv {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* c = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= c[i];
            h_ *= 0x100000001b3ULL;
        }
    }
    void text(const std::string& s) {
        bytes(s.data(), s.size());
        const char sep = '\n';
        bytes(&sep, 1);
    }
    void real(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        bytes(&bits, sizeof bits);
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string train_canonical(const TrainConfig& tc) {
    std::string s;
    s += "batch_series=" + std::to_string(tc.batch_series) + "\n";
    s += "dropout=" + format_double(tc.dropout) + "\n";
    s += "lr=" + format_double(tc.lr) + "\n";
    s += "max_steps=" + std::to_string(tc.max_steps) + "\n";
    s += "patience=" + std::to_string(tc.patience) + "\n";
    s += "val_check_every=" + std::to_string(tc.val_check_every) + "\n";
    s += "windows_batch=" + std::to_string(tc.windows_batch) + "\n";
    return s;
}

std::string dataset_canonical(const DatasetSpec& d) {
    std::string s;
    s += "name=" + d.name + "\n";
    s += "kind=" + to_string(d.kind) + "\n";
    s += "n_series=" + std::to_string(d.n_series) + "\n";
    s += "seed=" + std::to_string(d.seed) + "\n";
    s += "length=" + std::to_string(d.length) + "\n";
    s += "context_len=" + std::to_string(d.context_len) + "\n";
    s += "horizon=" + std::to_string(d.horizon) + "\n";
    s += "split_point=" + std::to_string(d.split_point) + "\n";
    s += "k=" + std::to_string(d.k) + "\n";
    s += "stride=" + std::to_string(d.stride) + "\n";
    s += "window=" + std::string(!d.window ? "default" : *d.window == DecompositionWindow::FullSeries ? "full" : "train") + "\n";
    s += "ood_basis=" + std::string(!d.ood_basis ? "default" : *d.ood_basis == OodBasis::SPECTRAL ? "spectral" : "components") + "\n";
    return s;
}

}  // namespace

// ---- RunResult JSON -------------------------------------------------------------

std::string run_result_to_json(const RunResult& r) {
    json j;
    j["run_id"] = r.run_id;
    j["dataset"] = r.dataset;
    j["model"] = r.model;
    j["seed"] = r.seed;
    j["mode"] = to_string(r.mode);
    j["status"] = r.status;
    j["error"] = r.error;
    j["mae"] = r.mae;
    j["k_max"] = r.k_max;
    j["threshold_pass"] = r.threshold_pass;
    j["n_series"] = r.n_series;
    j["series_mae"] = r.series_mae;
    j["series_k_max"] = r.series_k_max;
    j["param_count"] = r.param_count;
    j["flops"] = r.flops;
    j["steps_run"] = r.steps_run;
    j["best_step"] = r.best_step;
    return j.dump(2) + "\n";
}

RunResult run_result_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        RunResult r;
        r.run_id = j.at("run_id").get<std::string>();
        r.dataset = j.at("dataset").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.seed = j.at("seed").get<std::uint64_t>();
        r.mode = split_mode_from_string(j.at("mode").get<std::string>());
        r.status = j.at("status").get<std::string>();
        r.error = j.at("error").get<std::string>();
        r.mae = j.at("mae").get<double>();
        r.k_max = j.at("k_max").get<double>();
        r.threshold_pass = j.at("threshold_pass").get<bool>();
        r.n_series = j.at("n_series").get<std::size_t>();
        r.series_mae = j.at("series_mae").get<std::vector<double>>();
        r.series_k_max = j.at("series_k_max").get<std::vector<std::size_t>>();
        r.param_count = j.at("param_count").get<std::size_t>();
        r.flops = j.at("flops").get<std::size_t>();
        r.steps_run = j.at("steps_run").get<std::size_t>();
        r.best_step = j.at("best_step").get<std::size_t>();
        return r;
    } catch (const json::exception& e) {
        fail(ErrorCode::SchemaError, std::string("malformed run result: ") + e.what());
    }
}

// ---- ids ------------------------------------------------------------------------

std::uint64_t fingerprint(const BenchmarkData& data) {
    Fnv f;
    for (std::size_t i = 0; i < data.series.size(); ++i) {
        f.text(data.series[i].id);
        for (double v : data.series[i].values) f.real(v);
        if (i < data.components.size()) {
            for (const auto& c : data.components[i]) {
                f.text(c.id);
                for (double v : c.values) f.real(v);
            }
        }
    }
    f.text(data.has_trend ? "trend" : "no-trend");
    return f.value();
}

std::string run_id(const DatasetSpec& d, std::uint64_t data_fingerprint, const ModelSpec& m, std::uint64_t seed,
                   SplitMode mode) {
    Fnv f;
    f.text(dataset_canonical(d));
    f.text(hex64(data_fingerprint));
    f.text("model=" + m.name);
    f.text(resolved_model_config(d, m).canonical());
    f.text(train_canonical(m.train));
    f.text("seed=" + std::to_string(seed));
    f.text("mode=" + to_string(mode));
    return hex64(f.value());
}

// ---- one run --------------------------------------------------------------------

RunResult execute_run(const DatasetSpec& d, const PreparedSplit& split, const ModelSpec& m, std::uint64_t seed,
                      SplitMode mode, const std::filesystem::path& checkpoint) {
    const ModelConfig cfg = resolved_model_config(d, m);
    TrainConfig tc = m.train;
    tc.seed = seed;
    const TrainedModel model = fit(cfg, split.train, split.valid, tc);
    if (!checkpoint.empty()) save_checkpoint(model, checkpoint.string());

    RunResult r;
    r.dataset = d.name;
    r.model = m.name;
    r.seed = seed;
    r.mode = mode;
    r.n_series = split.test.size();
    r.param_count = count_params(model);
    r.flops = estimate_flops(cfg);
    r.steps_run = model.steps_run;
    r.best_step = model.best_step;

    std::vector<std::vector<double>> contexts;
    for (const auto& ws : split.test)
        for (const auto& w : ws) contexts.push_back(w.context);
    const auto forecasts = predict_batch(model, contexts);

    std::size_t at = 0;
    double mae_sum = 0.0, kmax_sum = 0.0;
    for (std::size_t i = 0; i < split.test.size(); ++i) {
        std::vector<double> y, yhat;
        for (std::size_t w = 0; w < split.test[i].size(); ++w, ++at) {
            const auto& t = split.test[i][w].target;
            y.insert(y.end(), t.begin(), t.end());
            yhat.insert(yhat.end(), forecasts[at].begin(), forecasts[at].end());
        }
        for (double v : yhat)
            require(std::isfinite(v), ErrorCode::NonFinite, "non-finite forecast for series " + std::to_string(i));
        const double e = mae(y, yhat);
        // k_max is scored on the first test window (anchored at the split point).
        const auto& first = split.test[i].front();
        const auto lo = static_cast<std::size_t>(first.anchor);
        const std::span<const double> y0(first.target), f0(forecasts[at - split.test[i].size()]);
        const auto report = basis_win_report(y0, f0, split.decompositions[i], IndexRange{lo, lo + y0.size()});
        r.series_mae.push_back(e);
        r.series_k_max.push_back(report.k_max);
        mae_sum += e;
        kmax_sum += static_cast<double>(report.k_max);
    }
    r.mae = mae_sum / static_cast<double>(r.n_series);
    r.k_max = kmax_sum / static_cast<double>(r.n_series);
    r.threshold_pass = r.k_max >= static_cast<double>(kBasisWinThreshold);
    return r;
}

// ---- matrix ---------------------------------------------------------------------

std::size_t effective_workers(std::size_t requested) {
    std::size_t n = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SPECBENCH_WORKERS"); env && *env) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        require(end && *end == '\0' && v >= 1, ErrorCode::ConfigError,
                std::string("SPECBENCH_WORKERS must be a positive integer, got '") + env + "'");
        n = std::min(n, static_cast<std::size_t>(v));
    }
    return std::max<std::size_t>(n, 1);
}

std::vector<RunResult> run_matrix(const ExperimentConfig& cfg, const std::filesystem::path& out,
                                  const std::function<void(const RunProgress&)>& progress) {
    const auto runs_dir = out / "runs";
    const auto ckpt_dir = out / "checkpoints";
    std::filesystem::create_directories(runs_dir);
    if (cfg.save_checkpoints) std::filesystem::create_directories(ckpt_dir);

    struct Group {
        std::size_t dataset = 0;
        SplitMode mode = SplitMode::ID;
        std::mutex mu;
        std::shared_ptr<const PreparedSplit> split;
        std::string error;
        std::size_t pending = 0;
    };
    struct Task {
        std::size_t group = 0, model = 0;
        std::uint64_t seed = 0;
        std::string id;
    };

    std::vector<BenchmarkData> data;
    std::vector<std::string> load_errors;
    std::vector<std::uint64_t> prints;
    for (const auto& d : cfg.datasets) {
        try {
            data.push_back(load_dataset(d));
            load_errors.emplace_back();
        } catch (const std::exception& e) {
            data.emplace_back();
            load_errors.emplace_back(e.what());
        }
        prints.push_back(fingerprint(data.back()));
    }

    std::vector<std::unique_ptr<Group>> groups;
    std::vector<Task> tasks;
    for (std::size_t di = 0; di < cfg.datasets.size(); ++di) {
        for (auto mode : cfg.modes) {
            auto g = std::make_unique<Group>();
            g->dataset = di;
            g->mode = mode;
            for (std::size_t mi = 0; mi < cfg.models.size(); ++mi) {
                for (auto seed : cfg.seeds) {
                    tasks.push_back({groups.size(), mi, seed,
                                     run_id(cfg.datasets[di], prints[di], cfg.models[mi], seed, mode)});
                    ++g->pending;
                }
            }
            groups.push_back(std::move(g));
        }
    }

    std::vector<RunResult> results(tasks.size());
    std::mutex report_mu;
    const auto report = [&](const RunProgress& p) {
        if (!progress) return;
        std::lock_guard lock(report_mu);
        progress(p);
    };

    const auto work = [&](std::size_t ti) {
        const Task& t = tasks[ti];
        Group& g = *groups[t.group];
        const auto& d = cfg.datasets[g.dataset];
        const auto& m = cfg.models[t.model];
        const RunKey key{d.name, m.name, t.seed, g.mode};
        const auto result_path = runs_dir / (t.id + ".json");

        if (std::filesystem::exists(result_path)) {
            try {
                auto cached = run_result_from_json(read_text_file(result_path));
                if (cached.ok() && cached.run_id == t.id) {
                    results[ti] = std::move(cached);
                    report({t.id, key, "cached", 0.0});
                    std::lock_guard lock(g.mu);
                    if (--g.pending == 0) g.split.reset();
                    return;
                }
            } catch (const Error&) {
                // Unreadable cache entries are recomputed.
            }
        }

        const auto start = std::chrono::steady_clock::now();
        RunResult r;
        try {
            std::shared_ptr<const PreparedSplit> split;
            {
                std::lock_guard lock(g.mu);
                if (!load_errors[g.dataset].empty()) fail(ErrorCode::IoError, load_errors[g.dataset]);
                if (!g.error.empty()) fail(ErrorCode::InvalidArgument, g.error);
                if (!g.split) {
                    try {
                        g.split = std::make_shared<const PreparedSplit>(prepare_split(d, data[g.dataset], g.mode));
                    } catch (const std::exception& e) {
                        g.error = e.what();
                        throw;
                    }
                }
                split = g.split;
            }
            r = execute_run(d, *split, m, t.seed, g.mode,
                            cfg.save_checkpoints ? ckpt_dir / (t.id + ".ckpt") : std::filesystem::path{});
        } catch (const std::exception& e) {
            r = RunResult{};
            r.dataset = d.name;
            r.model = m.name;
            r.seed = t.seed;
            r.mode = g.mode;
            r.status = "failed";
            r.error = e.what();
        }
        r.run_id = t.id;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        try {
            write_text_file(result_path, run_result_to_json(r));
            json timing;
            timing["run_id"] = t.id;
            timing["wall_seconds"] = secs;
            write_text_file(runs_dir / (t.id + ".timing.json"), timing.dump(2) + "\n");
        } catch (const std::exception& e) {
            r.status = "failed";
            r.error = std::string("could not persist result: ") + e.what();
        }
        report({t.id, key, r.ok() ? "done" : "failed", secs});
        results[ti] = std::move(r);
        std::lock_guard lock(g.mu);
        if (--g.pending == 0) g.split.reset();
    };

    const std::size_t nw = std::min(effective_workers(cfg.workers), std::max<std::size_t>(tasks.size(), 1));
    std::atomic<std::size_t> next{0};
    const auto loop = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) work(i);
    };
    if (nw <= 1) {
        loop();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t i = 0; i < nw; ++i) pool.emplace_back(loop);
        for (auto& th : pool) th.join();
    }
    return results;
}

}  // namespace specbench
