// Acceptance checks: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <sstream>
#include <string>

#include "alloc_tuning.hpp"
#include "oracles.hpp"
#include "specbench/error.hpp"
#include "specbench/eval.hpp"
#include "specbench/harness.hpp"
#include "specbench/models.hpp"
#include "specbench/preprocess.hpp"
#include "specbench/spectral.hpp"
#include "specbench/synthgen.hpp"

#ifndef SPECBENCH_TEST_DATA
#define SPECBENCH_TEST_DATA "tests/data"
#endif
#ifndef SPECBENCH_CLI_PATH
#define SPECBENCH_CLI_PATH "specbench"
#endif

using namespace specbench;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;

    void expect(bool ok, const std::string& what) {
        if (!ok) {
            if (pass) detail << "failed: ";
            else detail << "; ";
            detail << what;
            pass = false;
        }
    }
};

struct Criterion {
    int id;
    std::string name;
    double limit_s;
    std::function<void(Outcome&)> body;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::vector<double> random_series(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

void spectral_correctness(Outcome& o) {
    Rng rng(101);
    double fft_err = 0.0, rt_err = 0.0, parseval = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 8 + rng.below(249);
        const auto y = random_series(rng, n);
        const auto dec = dft(y);
        const auto naive = oracle::dft(y);
        for (std::size_t w = 0; w < n; ++w) fft_err = std::max(fft_err, std::abs(dec.coeffs[w] - naive[w]));
        const auto back = reconstruct_full(dec);
        for (std::size_t t = 0; t < n; ++t) rt_err = std::max(rt_err, std::fabs(back[t] - y[t]));
        double e = 0.0, s = 0.0;
        for (double v : y) e += v * v;
        for (const auto& c : dec.coeffs) s += std::norm(c);
        parseval = std::max(parseval, std::fabs(e - static_cast<double>(n) * s) / e);
    }
    o.expect(fft_err < 1e-10, "fft vs naive " + fmt(fft_err));
    o.expect(rt_err < 1e-9, "round trip " + fmt(rt_err));
    o.expect(parseval < 1e-9, "parseval " + fmt(parseval));
    o.detail << "fft " << fmt(fft_err) << ", round trip " << fmt(rt_err) << ", parseval " << fmt(parseval);
}

void compositional_split(Outcome& o) {
    const auto ds = gen_sinusoid_dataset(SyntheticDefaults::num_series, 2, 1);
    const std::size_t l = 256, h = 192, T = SyntheticDefaults::series_length - h;
    const ForecastTask task(l, h);
    double worst_comp = 0.0, worst_test = 0.0;
    for (std::size_t i = 0; i < ds.composed.size(); ++i) {
        const auto& s = ds.composed[i];
        const auto split = build_compositional_split(s, task, 2, T, 1, DecompositionWindow::FullSeries);
        const std::size_t per = split.train.size() / 2;
        for (std::size_t c = 0; c < 2; ++c) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& comp : ds.components[i]) {
                double err = 0.0;
                std::size_t cnt = 0;
                for (std::size_t j = c * per; j < (c + 1) * per; ++j) {
                    const auto& w = split.train[j];
                    const auto a = static_cast<std::size_t>(w.anchor);
                    for (std::size_t t = 0; t < l; ++t, ++cnt) err += std::fabs(w.context[t] - comp.values[a - l + t]);
                    for (std::size_t t = 0; t < h; ++t, ++cnt) err += std::fabs(w.target[t] - comp.values[a + t]);
                }
                best = std::min(best, err / static_cast<double>(cnt));
            }
            worst_comp = std::max(worst_comp, best);
        }
        const auto dec = dft(s.values);
        const auto ps = partial_sum(dec, 2, IndexRange{T, T + h});
        for (const auto& w : split.test)
            worst_test = std::max(worst_test, oracle::mae(ps, w.target));
    }
    o.expect(worst_comp < 1e-6, "component MAE " + fmt(worst_comp));
    o.expect(worst_test < 1e-6, "partial sum vs test " + fmt(worst_test));
    o.detail << "worst component MAE " << fmt(worst_comp) << ", worst partial-sum/test MAE " << fmt(worst_test);
}

void metric_fidelity(Outcome& o) {
    const auto ds = gen_sinusoid_dataset(SyntheticDefaults::num_series, 2, 1);
    const std::size_t h = 192, T = SyntheticDefaults::series_length - h;
    const IndexRange r{T, T + h};
    std::size_t bad_eq = 0, bad_kmax = 0;
    for (const auto& s : ds.composed) {
        const auto dec = dft(s.values);
        const std::span<const double> y(s.values.data() + T, h);
        for (std::size_t k = 1; k <= 2; ++k)
            if (!topk_basis_win(y, partial_sum(dec, k, r), dec, k, r)) ++bad_eq;
        if (topk_max(y, y, dec, r) != 2) ++bad_kmax;
    }
    o.expect(bad_eq == 0, std::to_string(bad_eq) + " equality-case losses");
    o.expect(bad_kmax == 0, std::to_string(bad_kmax) + " series with k_max != 2");
    o.detail << ds.composed.size() << " series, equality wins and k_max = 2 checked";
}

void statistics_oracles(Outcome& o) {
    Rng rng(104);
    std::size_t mismatches = 0, cases = 0;
    for (std::size_t n = 3; n <= kWilcoxonExactMax; ++n) {
        for (int rep = 0; rep < 100; ++rep, ++cases) {
            std::vector<double> a(n), b(n);
            for (std::size_t i = 0; i < n; ++i) {
                a[i] = std::round(rng.normal() * 6.0) / 2.0;
                b[i] = std::round(rng.normal() * 6.0) / 2.0;
            }
            if (wilcoxon_signed_rank(a, b) != oracle::wilcoxon_enumerate(a, b)) ++mismatches;
        }
    }
    o.expect(mismatches == 0, std::to_string(mismatches) + " Wilcoxon mismatches");
    const auto holm = holm_correct(std::vector<double>{0.01, 0.04, 0.03});
    o.expect(std::fabs(holm[0] - 0.03) < 1e-15 && std::fabs(holm[1] - 0.06) < 1e-15 && std::fabs(holm[2] - 0.06) < 1e-15,
             "Holm example");
    const ScoreMatrix sm{{"a", "b", "c"}, {"1", "2", "3", "4"}, {{1, 1, 1, 1}, {2, 2, 2, 2}, {3, 3, 3, 3}}};
    const auto f = friedman(sm);
    o.expect(std::fabs(f.statistic - 8.0) < 1e-12, "Friedman statistic " + fmt(f.statistic));
    o.expect(std::fabs(f.p_value - std::exp(-4.0)) < 1e-6, "Friedman p " + fmt(f.p_value));
    o.detail << cases << " exact Wilcoxon cases, Holm and Friedman examples";
}

ModelConfig tiny(ModelFamily family, LossKind loss) {
    ModelConfig c;
    c.family = family;
    c.loss = loss;
    c.context_len = 16;
    c.horizon = 4;
    c.mlp_width = 8;
    c.mlp_layers = 2;
    c.blocks = 2;
    c.block_layers = 2;
    c.pool_rates = {2, 1};
    c.ma_kernel = 5;
    c.patch_len = 4;
    c.patch_stride = 2;
    c.hidden = 8;
    c.ff = 16;
    c.layers = 2;
    c.heads = 2;
    return c;
}

void gradient_integrity(Outcome& o) {
    double worst = 0.0;
    std::size_t checked = 0;
    for (auto fam : {ModelFamily::NLINEAR, ModelFamily::DLINEAR, ModelFamily::MLP, ModelFamily::NBEATS_LITE,
                     ModelFamily::NHITS_LITE, ModelFamily::PATCH_TRANSFORMER}) {
        for (auto loss : {LossKind::MAE, LossKind::MSE, LossKind::HUBER, LossKind::STUDENT_T}) {
            const auto cfg = tiny(fam, loss);
            Rng rng(105);
            const auto x = oracle::random_tensor({3, cfg.context_len}, rng);
            const auto y = oracle::random_tensor({3, cfg.horizon}, rng);
            std::vector<nn::Tensor> params;
            for (auto& p : init_parameters(cfg, 105)) {
                for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] += 0.1 * rng.normal();
                params.push_back(std::move(p.value));
            }
            const auto r = oracle::gradient_check(params, [&](nn::Tape& t, const std::vector<nn::Var>& v) {
                return loss_var(cfg.loss, forward(cfg, t, v, x), t.constant(y), cfg.huber_delta);
            });
            checked += r.checked;
            if (r.max_rel_error >= 1e-4) o.expect(false, to_string(fam) + "/" + to_string(loss) + " " + fmt(r.max_rel_error));
            worst = std::max(worst, r.max_rel_error);
        }
    }
    o.detail << "24 family/loss pairs, " << checked << " entries, max relative error " << fmt(worst);
}

void training_smoke(Outcome& o) {
    DatasetSpec d;
    d.name = "sinusoid";
    d.n_series = 5;
    d.ood_basis = OodBasis::SPECTRAL;
    const auto data = load_dataset(d);
    const auto split = prepare_split(d, data, SplitMode::OOD_COMPOSITIONAL);

    ModelSpec naive{"naive", {}, {}};
    naive.config.family = ModelFamily::NAIVE_LAST;
    ModelSpec mlp{"mlp", {}, {}};
    mlp.config.family = ModelFamily::MLP;
    mlp.train.max_steps = 1000;
    mlp.train.windows_batch = 32;
    mlp.train.lr = 1e-4;
    ModelSpec tf{"transformer", {}, {}};
    tf.train.max_steps = 400;
    tf.train.windows_batch = 16;
    tf.train.lr = 1e-4;

    for (std::uint64_t seed : {1, 5, 10}) {
        const double base = execute_run(d, split, naive, seed, SplitMode::OOD_COMPOSITIONAL).mae;
        if (seed != 1) o.detail << "; ";
        o.detail << "seed " << seed << ": naive " << fmt(base);
        for (const auto* m : {&mlp, &tf}) {
            const double v = execute_run(d, split, *m, seed, SplitMode::OOD_COMPOSITIONAL).mae;
            o.detail << ", " << m->name << " " << fmt(v);
            if (!(v < base)) o.expect(false, m->name + " seed " + std::to_string(seed) + " not below naive");
        }
    }
}

void configuration_anchors(Outcome& o) {
    o.expect(SyntheticDefaults::num_series == 100, "synthetic N");
    o.expect(SyntheticDefaults::series_length == 1200 && SyntheticDefaults::horizon == 192, "synthetic length and horizon");
    const DatasetSpec d;
    o.expect(d.n_series == 100 && d.length == 1200 && d.horizon == 192 && d.context_len == 256, "dataset defaults");
    o.expect(PreprocessDefaults::patch_len == 1056 && PreprocessDefaults::patch_stride == 528, "segment sizes");
    o.expect(PreprocessDefaults::adf_alpha == 0.001, "ADF alpha");
    const ModelConfig m;
    const auto s = m.shape();
    o.expect(m.family == ModelFamily::PATCH_TRANSFORMER && m.size == ModelSize::TINY, "default model");
    o.expect(s.hidden == 256 && s.ff == 1024 && s.layers == 4 && s.heads == 4, "TINY shape");
    o.expect(m.tokenization == Tokenization::PATCH && m.patch_len == 96 && m.patch_stride == 8, "patching");
    const TrainConfig tc;
    o.expect(tc.lr == 1e-4, "learning rate");
    const ExperimentConfig e;
    o.expect(e.seeds == std::vector<std::uint64_t>{1, 5, 10}, "seeds");
    const auto parsed = parse_experiment_config("[dataset.s]\n[model.t]\nfamily = PATCH_TRANSFORMER\n");
    o.expect(parsed.models[0].config == m && parsed.models[0].train == tc, "parsed defaults");
    o.expect(resolved_model_config(parsed.datasets[0], parsed.models[0]).horizon == 192, "resolved horizon");
    o.detail << "N=100, length 1200, h=192, 1056/528, alpha 0.001, TINY 256/1024/4/4, patch 96/8, lr 1e-4, seeds {1,5,10}";
}

void cka_properties(Outcome& o) {
    Rng rng(108);
    const auto x = oracle::random_tensor({40, 6}, rng);
    const auto y = oracle::random_tensor({40, 4}, rng);
    std::vector<std::vector<double>> q(6, std::vector<double>(6));
    for (std::size_t i = 0; i < 6; ++i) {
        for (auto& v : q[i]) v = rng.normal();
        for (std::size_t j = 0; j < i; ++j) {
            double dot = 0.0;
            for (std::size_t c = 0; c < 6; ++c) dot += q[i][c] * q[j][c];
            for (std::size_t c = 0; c < 6; ++c) q[i][c] -= dot * q[j][c];
        }
        double nrm = 0.0;
        for (double v : q[i]) nrm += v * v;
        for (auto& v : q[i]) v /= std::sqrt(nrm);
    }
    nn::Tensor xq({40, 6});
    for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t c = 0; c < 6; ++c) {
            double v = 0.0;
            for (std::size_t k = 0; k < 6; ++k) v += x[r * 6 + k] * q[k][c];
            xq[r * 6 + c] = 2.75 * v;
        }
    const double self = linear_cka(x, x);
    const double inv = std::fabs(linear_cka(xq, y) - linear_cka(x, y));
    const double sym = std::fabs(linear_cka(x, y) - linear_cka(y, x));
    o.expect(std::fabs(self - 1.0) < 1e-12, "CKA(X,X) " + fmt(self));
    o.expect(std::fabs(linear_cka(x, xq) - 1.0) < 1e-8 && inv < 1e-8, "invariance " + fmt(inv));
    o.expect(sym < 1e-12, "symmetry " + fmt(sym));

    // X = [[1,2],[3,4],[5,7]], Y = [[1,0],[0,1],[2,2]]: centered, X^T Y = [[2,4],[3,5]],
    // X^T X = [[8,10],[10,38/3]], Y^T Y = [[2,1],[1,2]].
    const nn::Tensor hx({3, 2}, {1, 2, 3, 4, 5, 7}), hy({3, 2}, {1, 0, 0, 1, 2, 2});
    const double num = 4.0 + 16.0 + 9.0 + 25.0;
    const double xx = std::sqrt(64.0 + 2 * 100.0 + (38.0 / 3.0) * (38.0 / 3.0));
    const double yy = std::sqrt(10.0);
    const double hand = num / (xx * yy);
    const double got = linear_cka(hx, hy);
    o.expect(std::fabs(got - hand) < 1e-12, "hand case " + fmt(got) + " vs " + fmt(hand));
    o.detail << "self " << fmt(self) << ", invariance " << fmt(inv) << ", symmetry " << fmt(sym) << ", hand case "
             << fmt(got);
}

void preprocessing_oracle(Outcome& o) {
    std::ifstream f(std::string(SPECBENCH_TEST_DATA) + "/adf_reference.json");
    if (!f) {
        o.expect(false, "reference file missing");
        return;
    }
    const auto ref = nlohmann::json::parse(f);
    std::size_t verdicts = 0, cases = 0;
    double worst = 0.0;
    for (const auto& c : ref.at("cases")) {
        const auto r = adf_test(c.at("values").get<std::vector<double>>(), ref.at("alpha").get<double>());
        worst = std::max(worst, std::fabs(r.statistic - c.at("statistic").get<double>()));
        if (r.stationary == c.at("stationary").get<bool>()) ++verdicts;
        ++cases;
    }
    o.expect(cases == 50 && verdicts == cases, std::to_string(verdicts) + "/" + std::to_string(cases) + " verdicts");
    o.expect(worst < 1e-6, "statistic diff " + fmt(worst));

    Rng rng(109);
    std::size_t correct = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto v = random_series(rng, 1056);
        const bool walk = trial % 2 == 1;
        if (walk)
            for (std::size_t i = 1; i < v.size(); ++i) v[i] += v[i - 1];
        if (adf_test(v, 0.001).stationary != walk) ++correct;
    }
    o.expect(correct >= 190, "discrimination " + std::to_string(correct) + "/200");
    o.detail << verdicts << "/" << cases << " reference verdicts, max statistic diff " << fmt(worst)
             << ", noise/walk discrimination " << correct << "/200";
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + SPECBENCH_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::map<std::string, std::string> result_files(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir / "runs")) {
        const auto name = e.path().filename().string();
        if (name.ends_with(".json") && !name.ends_with(".timing.json")) out[name] = read_text_file(e.path());
    }
    return out;
}

void determinism(Outcome& o) {
    const auto root = fs::temp_directory_path() / "specbench_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const std::string cfg = R"([experiment]
seeds = 1, 5, 10
modes = ID, OOD
train.max_steps = 20
train.windows_batch = 8
train.val_check_every = 10

[dataset.synth]
kind = generated
path = data

[model.naive]
family = NAIVE_LAST

[model.nlinear]
family = NLINEAR

[model.mlp]
family = MLP

[model.transformer]
family = PATCH_TRANSFORMER
)";
    write_text_file(root / "exp.cfg", cfg);
    std::vector<std::map<std::string, std::string>> runs;
    std::vector<std::string> reports;
    for (int pass = 0; pass < 2; ++pass) {
        const auto out = root / ("out" + std::to_string(pass));
        const auto data = root / "data";
        fs::remove_all(data);
        int rc = run_cli("gen --kind sinusoid --n 4 --seed 1 --out \"" + data.string() + "\"");
        o.expect(rc == 0, "gen exit " + std::to_string(rc));
        rc = run_cli("run --config \"" + (root / "exp.cfg").string() + "\" --out \"" + out.string() + "\"");
        o.expect(rc == 0, "run exit " + std::to_string(rc));
        rc = run_cli("eval --results \"" + out.string() + "\" --report \"" + (out / "summary.json").string() + "\"");
        o.expect(rc == 0, "eval exit " + std::to_string(rc));
        if (!o.pass) return;
        runs.push_back(result_files(out));
        reports.push_back(read_text_file(out / "summary.json"));
    }
    o.expect(runs[0].size() == 24, std::to_string(runs[0].size()) + " result files");
    o.expect(runs[0] == runs[1], "result JSON differs between passes");
    o.expect(reports[0] == reports[1], "summary differs between passes");
    o.detail << runs[0].size() << " result files and the summary byte-identical across two gen/run/eval passes";
}

}  // namespace

int main() {
    tune_allocator();
    const std::vector<Criterion> criteria{
        {1, "spectral correctness", 5, spectral_correctness},
        {2, "compositional split exactness", 10, compositional_split},
        {3, "metric fidelity", 5, metric_fidelity},
        {4, "statistics oracle equivalence", 30, statistics_oracles},
        {5, "gradient integrity", 60, gradient_integrity},
        {6, "training smoke", 15 * 60, training_smoke},
        {7, "configuration anchors", 1, configuration_anchors},
        {8, "CKA properties", 1, cka_properties},
        {9, "preprocessing oracle", 60, preprocessing_oracle},
        {10, "determinism", 20 * 60, determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(o);
        } catch (const std::exception& e) {
            o.expect(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.expect(secs < c.limit_s, "runtime " + fmt(secs) + " s over " + fmt(c.limit_s) + " s");
        if (!o.pass) ++failed;
        std::printf("%s  %2d %-32s %8.2f s  %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                    o.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
