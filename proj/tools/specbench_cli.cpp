#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <iostream>
#include <nlohmann/json.hpp>

#include "alloc_tuning.hpp"
#include "specbench/error.hpp"
#include "specbench/eval.hpp"
#include "specbench/harness.hpp"
#include "specbench/models.hpp"
#include "specbench/preprocess.hpp"
#include "specbench/synthgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace specbench;

namespace {

struct GenArgs {
    std::string kind = "sinusoid";
    std::size_t n = SyntheticDefaults::num_series;
    std::uint64_t seed = 1;
    std::size_t length = SyntheticDefaults::series_length;
    std::size_t composition = SyntheticDefaults::composition_size;
    fs::path out;
};

struct PrepArgs {
    fs::path input, out, report;
    std::size_t keep = PreprocessDefaults::keep;
    double alpha = PreprocessDefaults::adf_alpha;
    std::size_t nlags = PreprocessDefaults::nlags;
    std::size_t patch_len = PreprocessDefaults::patch_len;
    std::size_t patch_stride = PreprocessDefaults::patch_stride;
};

struct RunArgs {
    fs::path config, out;
    std::size_t workers = 0;
};

struct EvalArgs {
    fs::path results, report;
    bool allow_missing = false;
    double alpha = 0.2;
};

struct PlotArgs {
    fs::path config, results, svg;
    std::string dataset, mode = "OOD";
    std::size_t series = 0;
    std::uint64_t seed = 0;
};

struct CkaArgs {
    fs::path a, b, data, report;
    std::size_t max_series = 0;
    std::size_t anchor = 0;
};

void print_json_line(const json& j) {
    std::cout << j.dump() << std::endl;
}

int cmd_gen(const GenArgs& a) {
    SyntheticDataset ds;
    const auto kind = dataset_kind_from_string(a.kind);
    switch (kind) {
        case DatasetKind::SINUSOID: ds = gen_sinusoid_dataset(a.n, a.composition, a.seed, a.length); break;
        case DatasetKind::TREND1: ds = gen_trend_dataset(SyntheticVariant::TREND1, a.n, a.seed, a.length); break;
        case DatasetKind::TREND2: ds = gen_trend_dataset(SyntheticVariant::TREND2, a.n, a.seed, a.length); break;
        default: fail(ErrorCode::InvalidArgument, "gen supports sinusoid, trend1, trend2");
    }
    write_synthetic_dir(a.out, ds);
    std::size_t comps = 0;
    for (const auto& c : ds.components) comps += c.size();
    print_json_line({{"event", "gen"}, {"composed", ds.composed.size()}, {"components", comps}, {"out", a.out.string()}});
    return 0;
}

int cmd_prep(const PrepArgs& a) {
    const auto series = load_csv(a.input);
    std::vector<Segment> segs;
    for (const auto& s : series) {
        if (s.size() < a.patch_len) continue;
        auto part = segment(s, a.patch_len, a.patch_stride);
        segs.insert(segs.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    const auto chosen = select_series(segs, a.keep, a.alpha, a.nlags);
    std::vector<TimeSeries> out;
    for (const auto& s : chosen) out.push_back(s.to_series());
    write_csv(a.out, out);
    if (!a.report.empty()) {
        json rows = json::array();
        for (const auto& s : chosen) {
            const auto adf = adf_test(s.values, a.alpha);
            rows.push_back({{"id", s.id()},
                            {"adf_statistic", adf.statistic},
                            {"adf_p_value", adf.p_value},
                            {"lag_used", adf.lag_used},
                            {"mean_acf", mean_acf(s.values, a.nlags)}});
        }
        write_text_file(a.report, json{{"input_series", series.size()}, {"segments", segs.size()}, {"selected", rows}}.dump(2) + "\n");
    }
    print_json_line({{"event", "prep"}, {"segments", segs.size()}, {"selected", chosen.size()}, {"out", a.out.string()}});
    return 0;
}

int cmd_run(const RunArgs& a) {
    auto cfg = load_experiment_config(a.config);
    if (a.workers) cfg.workers = a.workers;
    const auto results = run_matrix(cfg, a.out, [](const RunProgress& p) {
        json j{{"event", p.event},     {"run_id", p.run_id},          {"dataset", p.key.dataset},
               {"model", p.key.model}, {"seed", p.key.seed},          {"mode", to_string(p.key.mode)},
               {"seconds", p.seconds}};
        print_json_line(j);
    });
    const auto failed = std::count_if(results.begin(), results.end(), [](const RunResult& r) { return !r.ok(); });
    print_json_line({{"event", "matrix"}, {"runs", results.size()}, {"failed", failed}});
    return 0;
}

int cmd_eval(const EvalArgs& a) {
    const auto summary = aggregate(load_results(a.results), a.allow_missing, a.alpha);
    write_text_file(a.report, summary_to_json(summary));
    print_json_line({{"event", "eval"},
                     {"report", a.report.string()},
                     {"failed_runs", summary.failed_runs.size()},
                     {"missing_cells", summary.missing_cells.size()}});
    return 0;
}

int cmd_plot(const PlotArgs& a) {
    const auto cfg = load_experiment_config(a.config);
    const auto it = std::find_if(cfg.datasets.begin(), cfg.datasets.end(),
                                 [&](const DatasetSpec& d) { return a.dataset.empty() || d.name == a.dataset; });
    require(it != cfg.datasets.end(), ErrorCode::ConfigError, "no dataset named '" + a.dataset + "' in the config");
    const auto mode = split_mode_from_string(a.mode);
    const std::uint64_t seed = a.seed ? a.seed : cfg.seeds.front();
    const auto data = load_dataset(*it);
    require(a.series < data.series.size(), ErrorCode::InvalidArgument, "series index out of range");
    const auto split = prepare_split(*it, data, mode);
    const auto& w = split.test[a.series].front();

    std::vector<NamedForecast> forecasts;
    const auto print = fingerprint(data);
    for (const auto& m : cfg.models) {
        const auto ckpt = a.results / "checkpoints" / (run_id(*it, print, m, seed, mode) + ".ckpt");
        if (!fs::exists(ckpt)) {
            std::cerr << "warning: no checkpoint for model '" << m.name << "' (" << ckpt.string() << ")\n";
            continue;
        }
        forecasts.push_back({m.name, predict(load_checkpoint(ckpt.string()), w.context)});
    }
    const std::string title = it->name + " / " + data.series[a.series].id + " / " + to_string(mode) + " / seed " +
                              std::to_string(seed);
    plot_forecast(w.context, w.target, forecasts, a.svg, title);
    print_json_line({{"event", "plot"}, {"svg", a.svg.string()}, {"forecasts", forecasts.size()}});
    return 0;
}

int cmd_cka(const CkaArgs& a) {
    const auto ma = load_checkpoint(a.a.string());
    const auto mb = load_checkpoint(a.b.string());
    const std::size_t l = ma.config.context_len;
    require(mb.config.context_len == l, ErrorCode::InvalidArgument, "checkpoints use different context lengths");
    auto series = load_csv(a.data);
    if (a.max_series && series.size() > a.max_series) series.resize(a.max_series);
    std::vector<double> xa, xb;
    std::size_t rows = 0, da = 0, db = 0;
    for (const auto& s : series) {
        const std::size_t end = a.anchor ? a.anchor : s.size();
        require(end <= s.size() && end >= l, ErrorCode::RangeTooShort, "series '" + s.id + "' too short for a context");
        const std::span<const double> ctx(s.values.data() + (end - l), l);
        const auto ea = embed(ma, ctx), eb = embed(mb, ctx);
        xa.insert(xa.end(), ea.data().begin(), ea.data().end());
        xb.insert(xb.end(), eb.data().begin(), eb.data().end());
        require(ea.dim(0) == eb.dim(0), ErrorCode::InvalidArgument, "models produce different token counts");
        rows += ea.dim(0);
        da = ea.dim(1);
        db = eb.dim(1);
    }
    require(rows > 0, ErrorCode::EmptyFile, "no series to embed");
    const double v = linear_cka(nn::Tensor(nn::Shape{rows, da}, xa), nn::Tensor(nn::Shape{rows, db}, xb));
    const json j{{"event", "cka"}, {"cka", v}, {"rows", rows}, {"series", series.size()}};
    if (!a.report.empty()) write_text_file(a.report, j.dump(2) + "\n");
    print_json_line(j);
    return 0;
}

bool is_internal(ErrorCode c) {
    return c == ErrorCode::NonScalarLoss || c == ErrorCode::ShapeMismatch;
}

}  // namespace

int main(int argc, char** argv) {
    tune_allocator();
    CLI::App app{"Compositional forecasting benchmark"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a synthetic dataset");
    g->add_option("--kind", gen.kind, "sinusoid, trend1 or trend2")->capture_default_str();
    g->add_option("--n", gen.n, "Number of series")->capture_default_str();
    g->add_option("--seed", gen.seed)->capture_default_str();
    g->add_option("--length", gen.length)->capture_default_str();
    g->add_option("--composition", gen.composition, "Sinusoids per series")->capture_default_str();
    g->add_option("--out", gen.out, "Output directory")->required();

    PrepArgs prep;
    auto* p = app.add_subcommand("prep", "Segment, screen, and select real series");
    p->add_option("--input", prep.input, "Long-format CSV")->required()->check(CLI::ExistingFile);
    p->add_option("--out", prep.out, "Output CSV")->required();
    p->add_option("--report", prep.report, "Optional JSON with per-segment statistics");
    p->add_option("--keep", prep.keep)->capture_default_str();
    p->add_option("--alpha", prep.alpha)->capture_default_str();
    p->add_option("--nlags", prep.nlags)->capture_default_str();
    p->add_option("--patch-len", prep.patch_len)->capture_default_str();
    p->add_option("--patch-stride", prep.patch_stride)->capture_default_str();

    RunArgs run;
    auto* r = app.add_subcommand("run", "Run an experiment matrix");
    r->add_option("--config", run.config)->required()->check(CLI::ExistingFile);
    r->add_option("--out", run.out, "Results directory")->required();
    r->add_option("--workers", run.workers, "Worker cap (SPECBENCH_WORKERS also applies)");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Aggregate run results into a summary");
    e->add_option("--results", ev.results)->required()->check(CLI::ExistingDirectory);
    e->add_option("--report", ev.report, "Summary JSON path")->required();
    e->add_flag("--allow-missing", ev.allow_missing, "Rank only models with every cell present");
    e->add_option("--alpha", ev.alpha)->capture_default_str();

    PlotArgs pl;
    auto* pt = app.add_subcommand("plot", "Plot test-window forecasts from saved checkpoints");
    pt->add_option("--config", pl.config)->required()->check(CLI::ExistingFile);
    pt->add_option("--results", pl.results)->required()->check(CLI::ExistingDirectory);
    pt->add_option("--svg", pl.svg)->required();
    pt->add_option("--dataset", pl.dataset, "Dataset name (default: first)");
    pt->add_option("--mode", pl.mode, "ID or OOD")->capture_default_str();
    pt->add_option("--series", pl.series)->capture_default_str();
    pt->add_option("--seed", pl.seed, "Default: first configured seed");

    CkaArgs ck;
    auto* c = app.add_subcommand("cka", "Linear CKA between two transformer checkpoints");
    c->add_option("--a", ck.a)->required()->check(CLI::ExistingFile);
    c->add_option("--b", ck.b)->required()->check(CLI::ExistingFile);
    c->add_option("--data", ck.data, "CSV with input series")->required()->check(CLI::ExistingFile);
    c->add_option("--report", ck.report);
    c->add_option("--max-series", ck.max_series)->capture_default_str();
    c->add_option("--anchor", ck.anchor, "Context end index (default: series end)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::CallForAllHelp& ex) {
        return app.exit(ex);
    } catch (const CLI::ParseError& ex) {
        app.exit(ex);
        std::cerr << app.help();
        return 1;
    }

    try {
        if (*g) return cmd_gen(gen);
        if (*p) return cmd_prep(prep);
        if (*r) return cmd_run(run);
        if (*e) return cmd_eval(ev);
        if (*pt) return cmd_plot(pl);
        if (*c) return cmd_cka(ck);
        return 1;
    } catch (const Error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return is_internal(ex.code()) ? 2 : 1;
    } catch (const fs::filesystem_error& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    } catch (const std::exception& ex) {
        std::cerr << "internal error: " << ex.what() << "\n";
        return 2;
    }
}
