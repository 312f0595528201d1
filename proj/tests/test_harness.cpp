#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "specbench/error.hpp"
#include "specbench/harness.hpp"

using namespace specbench;
namespace fs = std::filesystem;
using Catch::Matchers::WithinAbs;

namespace {

ErrorCode code_of(const auto& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::InvalidArgument;
}

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "specbench_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kSmallConfig = R"(# two datasets, three models
[experiment]
seeds = 1, 5, 10
modes = ID, OOD
workers = 2
train.max_steps = 5
train.windows_batch = 8
train.val_check_every = 5

[dataset.sines]
kind = sinusoid
n_series = 3
length = 320
horizon = 16

[dataset.trend]
kind = trend2
n_series = 3
length = 320
horizon = 16

[model.naive]
family = NAIVE_LAST

[model.ses]
family = SES

[model.nlinear]
family = NLINEAR
train.lr = 0.001
)";

RunResult result(const std::string& ds, const std::string& model, std::uint64_t seed, double mae,
                 SplitMode mode = SplitMode::ID) {
    RunResult r;
    r.run_id = ds + model + std::to_string(seed) + to_string(mode);
    r.dataset = ds;
    r.model = model;
    r.seed = seed;
    r.mode = mode;
    r.mae = mae;
    r.k_max = 1.0;
    r.n_series = 1;
    r.series_mae = {mae};
    r.series_k_max = {1};
    return r;
}

}  // namespace

TEST_CASE("config grammar", "[harness][config]") {
    const auto cfg = parse_experiment_config(kSmallConfig, "/base");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 5, 10});
    CHECK(cfg.modes == std::vector<SplitMode>{SplitMode::ID, SplitMode::OOD_COMPOSITIONAL});
    CHECK(cfg.workers == 2);
    REQUIRE(cfg.datasets.size() == 2);
    CHECK(cfg.datasets[0].name == "sines");
    CHECK(cfg.datasets[1].kind == DatasetKind::TREND2);
    CHECK(cfg.datasets[0].horizon == 16);
    CHECK(cfg.datasets[0].context_len == 256);
    REQUIRE(cfg.models.size() == 3);
    CHECK(cfg.models[2].config.family == ModelFamily::NLINEAR);
    CHECK(cfg.models[2].train.lr == 0.001);
    CHECK(cfg.models[2].train.max_steps == 5);
    CHECK(cfg.models[0].train.windows_batch == 8);

    const auto csv = parse_experiment_config("[dataset.r]\nkind = csv\npath = data/x.csv\n[model.m]\nfamily = NAIVE_LAST\n",
                                             "/base");
    CHECK(csv.datasets[0].horizon == 48);
    CHECK(csv.datasets[0].path == fs::path("/base/data/x.csv"));

    const auto comments = parse_experiment_config("; lead\n[dataset.a]\nKIND = sinusoid\n\n# x\n[model.b]\nFamily = ses\n");
    CHECK(comments.datasets[0].name == "a");
    CHECK(comments.models[0].config.family == ModelFamily::SES);
}

TEST_CASE("config errors name the line", "[harness][config]") {
    const auto msg = [](const std::string& text) {
        try {
            parse_experiment_config(text);
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ConfigError);
            return std::string(e.what());
        }
        FAIL("expected ConfigError");
        return std::string();
    };
    CHECK_THAT(msg("[dataset.a]\nkind = sinusoid\nbogus = 1\n[model.m]\nfamily = SES\n"),
               Catch::Matchers::ContainsSubstring("line 3"));
    CHECK_THAT(msg("key = 1\n"), Catch::Matchers::ContainsSubstring("line 1"));
    msg("[dataset.a]\n[model.m]\nfamily = MLP\ncontext_len = 512\n");
    msg("[dataset.a]\n[model.m]\nfamily = PATCH_TRANSFORMER\npatch_len = 50\n");
    msg("[dataset.a]\n[model.m]\nfamily = NOPE\n");
    msg("[dataset.a]\n");
    msg("[experiment]\nseeds = \n[dataset.a]\n[model.m]\nfamily = SES\n");
    msg("[dataset.a b]\n[model.m]\nfamily = SES\n");
    msg("[dataset.a]\nkind = csv\n[model.m]\nfamily = SES\n");
}

TEST_CASE("run results round-trip through JSON", "[harness][io]") {
    auto r = result("d", "m", 5, 1.0 / 3.0, SplitMode::OOD_COMPOSITIONAL);
    r.series_mae = {0.1, 1e-17, 123.456};
    r.series_k_max = {0, 2, 7};
    r.k_max = 3.0;
    r.param_count = 49344;
    r.flops = 1234567;
    r.steps_run = 400;
    r.best_step = 300;
    const auto text = run_result_to_json(r);
    const auto back = run_result_from_json(text);
    CHECK(back.series_mae == r.series_mae);
    CHECK(back.series_k_max == r.series_k_max);
    CHECK(back.mae == r.mae);
    CHECK(back.mode == r.mode);
    CHECK(run_result_to_json(back) == text);
    CHECK(code_of([] { run_result_from_json("{\"dataset\": 1}"); }) == ErrorCode::SchemaError);
}

TEST_CASE("aggregation statistics", "[harness][aggregate]") {
    const std::vector<RunResult> rs{result("d", "m", 1, 1.0), result("d", "m", 5, 2.0), result("d", "m", 10, 3.0)};
    const auto s = aggregate(rs);
    REQUIRE(s.modes.size() == 1);
    REQUIRE(s.modes[0].cells.size() == 1);
    CHECK(s.modes[0].cells[0].mae_mean == 2.0);
    CHECK_THAT(s.modes[0].cells[0].mae_std, WithinAbs(std::sqrt(2.0 / 3.0), 1e-15));
    CHECK(s.modes[0].cells[0].n_seeds == 3);
    REQUIRE(s.modes[0].methods.size() == 1);
    CHECK(s.modes[0].methods[0].average_rank == 1.0);
    CHECK_FALSE(s.modes[0].cd.has_value());

    std::vector<RunResult> grid;
    const std::vector<std::string> models{"a", "b", "c", "d"};
    for (std::size_t m = 0; m < models.size(); ++m)
        for (const std::string ds : {"x", "y"})
            for (std::uint64_t seed : {1, 5}) grid.push_back(result(ds, models[m], seed, 1.0 + m + 0.1 * seed));
    const auto g = aggregate(grid);
    CHECK(g.modes[0].cells.size() == models.size() * 2);
    CHECK(g.modes[0].cd.has_value());
    for (const auto& meth : g.modes[0].methods) CHECK(meth.top3_wins == (meth.model == "d" ? 0u : 2u));

    auto missing = grid;
    missing.pop_back();
    missing.pop_back();
    CHECK(code_of([&] { aggregate(missing); }) == ErrorCode::MissingCells);
    const auto partial = aggregate(missing, true);
    CHECK(partial.missing_cells.size() == 1);
    CHECK(partial.modes[0].methods.size() == 3);

    auto dup = grid;
    dup.push_back(grid.front());
    CHECK(code_of([&] { aggregate(dup); }) == ErrorCode::SchemaError);
}

TEST_CASE("forecast SVG is deterministic and labels every series", "[harness][plot]") {
    const std::vector<double> ctx{1, 2, 3, 2, 1}, tgt{0, 1, 2};
    const std::vector<NamedForecast> fc{{"naive", {1, 1, 1}}, {"mlp <x>", {0.5, 1.5, 2.5}}};
    const auto a = forecast_svg(ctx, tgt, fc, "toy");
    CHECK(a == forecast_svg(ctx, tgt, fc, "toy"));
    const auto count = [](const std::string& s, const std::string& needle) {
        std::size_t n = 0;
        for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
        return n;
    };
    CHECK(count(a, "class=\"legend\"") == 3);
    CHECK(a.find("mlp &lt;x&gt;") != std::string::npos);
    const auto empty = forecast_svg(ctx, tgt, {});
    CHECK(count(empty, "class=\"legend\"") == 1);
    CHECK(count(empty, "<polyline") == 1);

    const auto dir = fresh_dir("svg");
    plot_forecast(ctx, tgt, fc, dir / "p.svg", "toy");
    CHECK(read_text_file(dir / "p.svg") == a);
}

TEST_CASE("ID and OOD splits share test windows", "[harness][split]") {
    DatasetSpec d;
    d.name = "s";
    d.n_series = 3;
    d.length = 320;
    d.horizon = 16;
    const auto data = load_dataset(d);
    REQUIRE(data.series.size() == 3);
    const auto id = prepare_split(d, data, SplitMode::ID);
    const auto ood = prepare_split(d, data, SplitMode::OOD_COMPOSITIONAL);
    REQUIRE(id.test.size() == ood.test.size());
    for (std::size_t i = 0; i < id.test.size(); ++i) {
        REQUIRE(id.test[i].size() == ood.test[i].size());
        for (std::size_t j = 0; j < id.test[i].size(); ++j) {
            CHECK(id.test[i][j].context == ood.test[i][j].context);
            CHECK(id.test[i][j].target == ood.test[i][j].target);
        }
    }
    const long T = 320 - 16;
    for (const auto& w : id.train) CHECK(w.anchor + 16 <= T - 16);
    for (const auto& w : id.valid) CHECK(w.anchor == T - 16);
    CHECK(ood.train.size() > id.train.size());
}

TEST_CASE("synthetic directories round trip", "[harness][io]") {
    const auto ds = gen_trend_dataset(SyntheticVariant::TREND1, 4, 2);
    const auto dir = fresh_dir("synth");
    write_synthetic_dir(dir, ds);
    const auto back = read_synthetic_dir(dir);
    REQUIRE(back.series.size() == 4);
    CHECK(back.has_trend);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back.series[i].values == ds.composed[i].values);
        REQUIRE(back.components[i].size() == ds.components[i].size());
        for (std::size_t c = 0; c < back.components[i].size(); ++c)
            CHECK(back.components[i][c].values == ds.components[i][c].values);
    }
}

TEST_CASE("experiment matrix cardinality, caching, and recompute", "[harness][matrix]") {
    const auto out = fresh_dir("matrix");
    const auto cfg = parse_experiment_config(kSmallConfig);
    std::vector<RunProgress> events;
    const auto first = run_matrix(cfg, out, [&](const RunProgress& p) { events.push_back(p); });
    CHECK(first.size() == 36);
    std::set<std::string> ids;
    for (const auto& r : first) {
        INFO(r.error);
        CHECK(r.ok());
        ids.insert(r.run_id);
        CHECK(fs::exists(out / "runs" / (r.run_id + ".json")));
    }
    CHECK(ids.size() == 36);
    for (const auto& e : events) CHECK(e.event == "done");

    events.clear();
    const auto second = run_matrix(cfg, out, [&](const RunProgress& p) { events.push_back(p); });
    REQUIRE(second.size() == 36);
    for (const auto& e : events) CHECK(e.event == "cached");
    for (std::size_t i = 0; i < 36; ++i) CHECK(run_result_to_json(second[i]) == run_result_to_json(first[i]));

    const auto victim = first[7].run_id;
    fs::remove(out / "runs" / (victim + ".json"));
    events.clear();
    run_matrix(cfg, out, [&](const RunProgress& p) { events.push_back(p); });
    std::size_t recomputed = 0;
    for (const auto& e : events) {
        if (e.event == "done") {
            ++recomputed;
            CHECK(e.run_id == victim);
        }
    }
    CHECK(recomputed == 1);
    CHECK(read_text_file(out / "runs" / (victim + ".json")) == run_result_to_json(first[7]));

    const auto loaded = load_results(out);
    CHECK(loaded.size() == 36);
    const auto summary = aggregate(loaded);
    CHECK(summary.modes.size() == 2);
    for (const auto& m : summary.modes) {
        CHECK(m.cells.size() == 6);
        CHECK(m.cd.has_value());
    }
    CHECK(summary_to_json(summary) == summary_to_json(aggregate(load_results(out))));
}

TEST_CASE("worker cap from the environment", "[harness][workers]") {
    ::setenv("SPECBENCH_WORKERS", "3", 1);
    CHECK(effective_workers(8) == 3);
    CHECK(effective_workers(2) == 2);
    CHECK(effective_workers(0) <= 3);
    ::setenv("SPECBENCH_WORKERS", "zero", 1);
    CHECK(code_of([] { effective_workers(1); }) == ErrorCode::ConfigError);
    ::setenv("SPECBENCH_WORKERS", "0", 1);
    CHECK(code_of([] { effective_workers(1); }) == ErrorCode::ConfigError);
    ::unsetenv("SPECBENCH_WORKERS");
    CHECK(effective_workers(4) == 4);
    CHECK(effective_workers(0) >= 1);
}
