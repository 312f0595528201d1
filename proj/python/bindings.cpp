#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "specbench/error.hpp"
#include "specbench/eval.hpp"
#include "specbench/harness.hpp"
#include "specbench/preprocess.hpp"
#include "specbench/spectral.hpp"
#include "specbench/synthgen.hpp"

namespace py = pybind11;
using namespace specbench;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::span<const double> view(const Array& a) {
    require(a.ndim() == 1, ErrorCode::ShapeMismatch, "expected a 1-D array");
    return {a.data(), static_cast<std::size_t>(a.size())};
}

py::array_t<double> to_numpy(const std::vector<double>& v) {
    return py::array_t<double>(static_cast<py::ssize_t>(v.size()), v.data());
}

nn::Tensor to_tensor(const Array& a) {
    require(a.ndim() == 2, ErrorCode::ShapeMismatch, "expected a 2-D array");
    const nn::Shape shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))};
    return nn::Tensor(shape, std::span<const double>(a.data(), static_cast<std::size_t>(a.size())));
}

SpectralDecomposition decompose(const Array& y) { return dft(view(y)); }

ScoreMatrix score_matrix(const std::vector<std::string>& methods, const std::vector<std::string>& datasets,
                         const std::vector<std::vector<double>>& scores) {
    ScoreMatrix sm{methods, datasets, scores};
    sm.validate();
    return sm;
}

py::dict dataset_dict(const SyntheticDataset& ds) {
    py::list ids, composed, components;
    for (std::size_t i = 0; i < ds.composed.size(); ++i) {
        ids.append(ds.composed[i].id);
        composed.append(to_numpy(ds.composed[i].values));
        py::list parts;
        for (const auto& c : ds.components[i]) parts.append(to_numpy(c.values));
        components.append(parts);
    }
    py::dict d;
    d["ids"] = ids;
    d["composed"] = composed;
    d["components"] = components;
    d["variant"] = to_string(ds.variant);
    d["seed"] = ds.seed;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral forecasting benchmark core";

    static py::exception<Error> error_type(m, "SpecbenchError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            py::object exc = py::reinterpret_borrow<py::object>(error_type.ptr())(e.what());
            exc.attr("code") = std::string(to_string(e.code()));
            PyErr_SetObject(error_type.ptr(), exc.ptr());
        }
    });

    py::class_<BasisComponent>(m, "BasisComponent")
        .def_readonly("freq_index", &BasisComponent::freq_index)
        .def_readonly("amplitude", &BasisComponent::amplitude)
        .def_readonly("phase", &BasisComponent::phase)
        .def_readonly("is_pair", &BasisComponent::is_pair);

    m.def("dft", [](const Array& y) {
        const auto dec = decompose(y);
        return py::array_t<std::complex<double>>(static_cast<py::ssize_t>(dec.coeffs.size()), dec.coeffs.data());
    }, py::arg("y"), "Fourier coefficients scaled by 1/n.");
    m.def("ranked_components", [](const Array& y) { return ranked_components(decompose(y)); }, py::arg("y"));
    m.def("partial_sum", [](const Array& y, std::size_t k, std::size_t lo, std::size_t hi) {
        return to_numpy(partial_sum(decompose(y), k, IndexRange{lo, hi}));
    }, py::arg("y"), py::arg("k"), py::arg("lo"), py::arg("hi"),
          "Top-k reconstruction of y evaluated on [lo, hi).");

    m.def("gen_sinusoid_dataset", [](std::size_t n, std::size_t comp, std::uint64_t seed, std::size_t length) {
        return dataset_dict(gen_sinusoid_dataset(n, comp, seed, length));
    }, py::arg("num_series") = SyntheticDefaults::num_series,
          py::arg("composition_size") = SyntheticDefaults::composition_size, py::arg("seed") = 1,
          py::arg("length") = SyntheticDefaults::series_length);
    m.def("gen_trend_dataset", [](const std::string& variant, std::size_t n, std::uint64_t seed, std::size_t length) {
        return dataset_dict(gen_trend_dataset(synthetic_variant_from_string(variant), n, seed, length));
    }, py::arg("variant") = "trend1", py::arg("num_series") = SyntheticDefaults::num_series, py::arg("seed") = 1,
          py::arg("length") = SyntheticDefaults::series_length);

    m.def("adf_test", [](const Array& y, double alpha) {
        const auto r = adf_test(view(y), alpha);
        py::dict d;
        d["statistic"] = r.statistic;
        d["p_value"] = r.p_value;
        d["lag_used"] = r.lag_used;
        d["nobs"] = r.nobs;
        d["stationary"] = r.stationary;
        return d;
    }, py::arg("y"), py::arg("alpha") = PreprocessDefaults::adf_alpha);
    m.def("mean_acf", [](const Array& y, std::size_t nlags) { return mean_acf(view(y), nlags); }, py::arg("y"),
          py::arg("nlags") = PreprocessDefaults::nlags);

    m.def("mae", [](const Array& y, const Array& yhat) { return mae(view(y), view(yhat)); }, py::arg("y"),
          py::arg("yhat"));
    m.def("basis_win_report", [](const Array& y, const Array& yhat, const Array& full, std::size_t lo) {
        const auto ys = view(y);
        const auto r = basis_win_report(ys, view(yhat), decompose(full), IndexRange{lo, lo + ys.size()});
        py::dict d;
        d["k_max"] = r.k_max;
        d["wins"] = r.wins;
        d["threshold_pass"] = r.threshold_pass;
        return d;
    }, py::arg("y"), py::arg("yhat"), py::arg("full_series"), py::arg("lo"),
          "Top-k basis wins for a forecast of full_series[lo, lo + len(y)).");

    m.def("average_ranks", [](const std::vector<std::string>& methods, const std::vector<std::string>& datasets,
                              const std::vector<std::vector<double>>& scores) {
        return average_ranks(score_matrix(methods, datasets, scores));
    }, py::arg("methods"), py::arg("datasets"), py::arg("scores"));
    m.def("friedman", [](const std::vector<std::vector<double>>& scores, double alpha) {
        std::vector<std::string> methods(scores.size()), datasets(scores.empty() ? 0 : scores[0].size());
        for (std::size_t i = 0; i < methods.size(); ++i) methods[i] = std::to_string(i);
        for (std::size_t j = 0; j < datasets.size(); ++j) datasets[j] = std::to_string(j);
        const auto f = friedman(score_matrix(methods, datasets, scores), alpha);
        return py::make_tuple(f.statistic, f.p_value, f.reject);
    }, py::arg("scores"), py::arg("alpha") = 0.2, "Returns (statistic, p_value, reject).");
    m.def("wilcoxon", [](const Array& a, const Array& b) { return wilcoxon_signed_rank(view(a), view(b)); },
          py::arg("a"), py::arg("b"));
    m.def("holm", [](const Array& p) { return to_numpy(holm_correct(view(p))); }, py::arg("pvalues"));
    m.def("cd_groups", [](const std::vector<std::string>& methods, const std::vector<std::string>& datasets,
                          const std::vector<std::vector<double>>& scores, double alpha) {
        const auto cd = cd_analysis(score_matrix(methods, datasets, scores), alpha);
        std::vector<std::vector<std::string>> groups;
        for (const auto& g : cd.groups) {
            auto& out = groups.emplace_back();
            for (auto i : g) out.push_back(methods[i]);
        }
        return py::make_tuple(cd.average_ranks, groups, cd.gate_passed);
    }, py::arg("methods"), py::arg("datasets"), py::arg("scores"), py::arg("alpha") = 0.2,
          "Returns (average_ranks, groups of method names, friedman gate passed).");
    m.def("linear_cka", [](const Array& x, const Array& y) { return linear_cka(to_tensor(x), to_tensor(y)); },
          py::arg("x"), py::arg("y"));

    m.def("run_experiment", [](const std::string& config_text, const std::filesystem::path& out,
                               const std::filesystem::path& base_dir) {
        const auto cfg = parse_experiment_config(config_text, base_dir);
        std::vector<std::string> json;
        {
            py::gil_scoped_release release;
            for (const auto& r : run_matrix(cfg, out)) json.push_back(run_result_to_json(r));
        }
        return json;
    }, py::arg("config"), py::arg("out"), py::arg("base_dir") = std::filesystem::path{},
          "Runs an experiment config; returns one JSON document per run.");
    m.def("summarize", [](const std::filesystem::path& out, bool allow_missing) {
        return summary_to_json(aggregate(load_results(out), allow_missing));
    }, py::arg("out"), py::arg("allow_missing") = false, "Aggregated summary of a results directory as JSON.");
    m.def("effective_workers", &effective_workers, py::arg("requested") = 0);
}
