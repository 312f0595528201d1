#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "specbench/error.hpp"
#include "specbench/harness.hpp"
#include "specbench/preprocess.hpp"
#include "specbench/synthgen.hpp"

namespace specbench {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

struct Where {
    std::size_t line = 0;
    std::string at() const { return "line " + std::to_string(line) + ": "; }
};

std::uint64_t to_u64(const Where& w, const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end || v.empty())
        fail(ErrorCode::ConfigError, w.at() + "'" + key + "' expects a non-negative integer, got '" + v + "'");
    return out;
}

double to_real(const Where& w, const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end || v.empty())
        fail(ErrorCode::ConfigError, w.at() + "'" + key + "' expects a number, got '" + v + "'");
    return out;
}

bool to_bool(const Where& w, const std::string& key, const std::string& v) {
    const auto s = lower(v);
    if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
    if (s == "false" || s == "no" || s == "0" || s == "off") return false;
    fail(ErrorCode::ConfigError, w.at() + "'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Applies a `train.*` key. Returns false for keys it does not know.
bool apply_train_key(const Where& w, TrainConfig& tc, const std::string& key, const std::string& v) {
    if (key == "lr") tc.lr = to_real(w, key, v);
    else if (key == "batch_series") tc.batch_series = to_u64(w, key, v);
    else if (key == "windows_batch") tc.windows_batch = to_u64(w, key, v);
    else if (key == "max_steps") tc.max_steps = to_u64(w, key, v);
    else if (key == "val_check_every") tc.val_check_every = to_u64(w, key, v);
    else if (key == "patience") tc.patience = to_u64(w, key, v);
    else if (key == "dropout") tc.dropout = to_real(w, key, v);
    else return false;
    return true;
}

DecompositionWindow window_from_string(const Where& w, const std::string& v) {
    const auto s = lower(v);
    if (s == "full") return DecompositionWindow::FullSeries;
    if (s == "train") return DecompositionWindow::TrainRegion;
    fail(ErrorCode::ConfigError, w.at() + "decomposition_window must be 'full' or 'train', got '" + v + "'");
}

OodBasis ood_basis_from_string(const Where& w, const std::string& v) {
    const auto s = lower(v);
    if (s == "spectral") return OodBasis::SPECTRAL;
    if (s == "components") return OodBasis::COMPONENTS;
    fail(ErrorCode::ConfigError, w.at() + "ood_basis must be 'spectral' or 'components', got '" + v + "'");
}

struct PendingModel {
    ModelSpec spec;
    std::map<std::string, std::string> model_keys;
    std::map<std::string, std::string> train_keys;
    std::size_t line = 0;
};

}  // namespace

std::string to_string(DatasetKind k) {
    switch (k) {
        case DatasetKind::SINUSOID: return "sinusoid";
        case DatasetKind::TREND1: return "trend1";
        case DatasetKind::TREND2: return "trend2";
        case DatasetKind::GENERATED: return "generated";
        case DatasetKind::CSV: return "csv";
    }
    return "?";
}

DatasetKind dataset_kind_from_string(const std::string& s) {
    const auto v = lower(s);
    for (auto k : {DatasetKind::SINUSOID, DatasetKind::TREND1, DatasetKind::TREND2, DatasetKind::GENERATED,
                   DatasetKind::CSV}) {
        if (to_string(k) == v) return k;
    }
    fail(ErrorCode::ConfigError, "unknown dataset kind '" + s + "'");
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    std::map<std::string, std::string> default_train;
    std::vector<PendingModel> models;
    std::set<std::string> horizon_set;  // datasets with an explicit horizon
    std::set<std::string> seen_sections;

    enum class Section { NONE, EXPERIMENT, DATASET, MODEL } section = Section::NONE;
    std::istringstream in(text);
    std::string raw;
    Where w;
    while (std::getline(in, raw)) {
        ++w.line;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(ErrorCode::ConfigError, w.at() + "unterminated section header");
            const std::string name = trim(line.substr(1, line.size() - 2));
            if (!seen_sections.insert(name).second)
                fail(ErrorCode::ConfigError, w.at() + "duplicate section [" + name + "]");
            const auto dot = name.find('.');
            const std::string head = name.substr(0, dot);
            const std::string label = dot == std::string::npos ? "" : name.substr(dot + 1);
            const bool label_ok = !label.empty() && std::all_of(label.begin(), label.end(), [](char c) {
                return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
            });
            if (name == "experiment") {
                section = Section::EXPERIMENT;
            } else if (head == "dataset" && label_ok) {
                section = Section::DATASET;
                cfg.datasets.emplace_back();
                cfg.datasets.back().name = label;
            } else if (head == "model" && label_ok) {
                section = Section::MODEL;
                models.emplace_back();
                models.back().spec.name = label;
                models.back().line = w.line;
            } else {
                fail(ErrorCode::ConfigError, w.at() + "unknown section [" + name + "]");
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorCode::ConfigError, w.at() + "expected 'key = value'");
        const std::string key = lower(trim(line.substr(0, eq)));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(ErrorCode::ConfigError, w.at() + "empty key");

        switch (section) {
            case Section::NONE: fail(ErrorCode::ConfigError, w.at() + "key outside of any section");
            case Section::EXPERIMENT:
                if (key == "seeds") {
                    cfg.seeds.clear();
                    for (const auto& s : split_list(value)) cfg.seeds.push_back(to_u64(w, key, s));
                } else if (key == "modes") {
                    cfg.modes.clear();
                    for (const auto& s : split_list(value)) {
                        try {
                            cfg.modes.push_back(split_mode_from_string(s));
                        } catch (const Error&) {
                            fail(ErrorCode::ConfigError, w.at() + "unknown mode '" + s + "'");
                        }
                    }
                } else if (key == "workers") {
                    cfg.workers = to_u64(w, key, value);
                } else if (key == "checkpoints") {
                    cfg.save_checkpoints = to_bool(w, key, value);
                } else if (key.rfind("train.", 0) == 0) {
                    TrainConfig probe;
                    if (!apply_train_key(w, probe, key.substr(6), value))
                        fail(ErrorCode::ConfigError, w.at() + "unknown key '" + key + "'");
                    default_train[key.substr(6)] = value;
                } else {
                    fail(ErrorCode::ConfigError, w.at() + "unknown key '" + key + "' in [experiment]");
                }
                break;
            case Section::DATASET: {
                auto& d = cfg.datasets.back();
                if (key == "kind") d.kind = [&] {
                    try {
                        return dataset_kind_from_string(value);
                    } catch (const Error& e) {
                        fail(ErrorCode::ConfigError, w.at() + e.what());
                    }
                }();
                else if (key == "path") d.path = base_dir.empty() ? std::filesystem::path(value) : base_dir / value;
                else if (key == "n_series") d.n_series = to_u64(w, key, value);
                else if (key == "seed") d.seed = to_u64(w, key, value);
                else if (key == "length") d.length = to_u64(w, key, value);
                else if (key == "context_len") d.context_len = to_u64(w, key, value);
                else if (key == "horizon") {
                    d.horizon = to_u64(w, key, value);
                    horizon_set.insert(d.name);
                } else if (key == "split_point") d.split_point = to_u64(w, key, value);
                else if (key == "k") d.k = to_u64(w, key, value);
                else if (key == "stride") d.stride = to_u64(w, key, value);
                else if (key == "decomposition_window") d.window = window_from_string(w, value);
                else if (key == "ood_basis") d.ood_basis = ood_basis_from_string(w, value);
                else fail(ErrorCode::ConfigError, w.at() + "unknown key '" + key + "' in [dataset." + d.name + "]");
                break;
            }
            case Section::MODEL: {
                auto& m = models.back();
                if (key.rfind("train.", 0) == 0) {
                    TrainConfig probe;
                    if (!apply_train_key(w, probe, key.substr(6), value))
                        fail(ErrorCode::ConfigError, w.at() + "unknown key '" + key + "'");
                    m.train_keys[key.substr(6)] = value;
                } else if (key == "context_len" || key == "horizon") {
                    fail(ErrorCode::ConfigError, w.at() + "'" + key + "' belongs to the dataset section");
                } else {
                    m.model_keys[key] = value;
                }
                break;
            }
        }
    }

    require(!cfg.datasets.empty(), ErrorCode::ConfigError, "config defines no [dataset.*] section");
    require(!models.empty(), ErrorCode::ConfigError, "config defines no [model.*] section");
    require(!cfg.seeds.empty(), ErrorCode::ConfigError, "seeds must not be empty");
    require(!cfg.modes.empty(), ErrorCode::ConfigError, "modes must not be empty");

    for (auto& d : cfg.datasets) {
        if (d.kind == DatasetKind::CSV && !horizon_set.count(d.name)) d.horizon = PreprocessDefaults::horizon;
        require(d.k >= 1, ErrorCode::ConfigError, "dataset '" + d.name + "': k must be at least 1");
        require(d.stride >= 1, ErrorCode::ConfigError, "dataset '" + d.name + "': stride must be at least 1");
        require(d.context_len >= 1 && d.horizon >= 1, ErrorCode::ConfigError,
                "dataset '" + d.name + "': context_len and horizon must be positive");
        if (d.kind == DatasetKind::CSV || d.kind == DatasetKind::GENERATED)
            require(!d.path.empty(), ErrorCode::ConfigError, "dataset '" + d.name + "' needs a path");
    }

    for (auto& pm : models) {
        Where mw{pm.line};
        try {
            pm.spec.config = ModelConfig::from_map(pm.model_keys);
        } catch (const Error& e) {
            fail(ErrorCode::ConfigError, mw.at() + "[model." + pm.spec.name + "] " + e.what());
        }
        for (const auto& [k, v] : default_train) apply_train_key(mw, pm.spec.train, k, v);
        for (const auto& [k, v] : pm.train_keys) apply_train_key(mw, pm.spec.train, k, v);
        try {
            pm.spec.train.validate();
        } catch (const Error& e) {
            fail(ErrorCode::ConfigError, mw.at() + "[model." + pm.spec.name + "] " + e.what());
        }
        cfg.models.push_back(std::move(pm.spec));
    }
    for (const auto& d : cfg.datasets) {
        for (const auto& m : cfg.models) {
            try {
                const auto c = resolved_model_config(d, m);
                c.validate();
                c.validate_grid();
            } catch (const Error& e) {
                fail(ErrorCode::ConfigError,
                     "model '" + m.name + "' on dataset '" + d.name + "': " + std::string(e.what()));
            }
        }
    }
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_text_file(path), path.parent_path());
}

ModelConfig resolved_model_config(const DatasetSpec& d, const ModelSpec& m) {
    ModelConfig c = m.config;
    c.context_len = d.context_len;
    c.horizon = d.horizon;
    return c;
}

// ---- file helpers ---------------------------------------------------------------

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(static_cast<bool>(f), ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        require(static_cast<bool>(f), ErrorCode::IoError, "cannot write '" + tmp.string() + "'");
        f << text;
        f.flush();
        require(static_cast<bool>(f), ErrorCode::IoError, "write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

// ---- datasets -------------------------------------------------------------------

void write_synthetic_dir(const std::filesystem::path& dir, const SyntheticDataset& ds) {
    std::filesystem::create_directories(dir);
    write_csv(dir / "composed.csv", ds.composed);
    std::vector<TimeSeries> comps;
    for (const auto& c : ds.components) comps.insert(comps.end(), c.begin(), c.end());
    write_csv(dir / "components.csv", comps);
    nlohmann::json meta;
    meta["variant"] = to_string(ds.variant);
    meta["seed"] = ds.seed;
    meta["n_series"] = ds.composed.size();
    meta["length"] = ds.composed.empty() ? 0 : ds.composed.front().size();
    meta["composition_size"] = ds.components.empty() ? 0 : ds.components.front().size();
    meta["train_slopes"] = ds.train_slopes;
    meta["test_slopes"] = ds.test_slopes;
    write_text_file(dir / "meta.json", meta.dump(2) + "\n");
}

BenchmarkData read_synthetic_dir(const std::filesystem::path& dir) {
    BenchmarkData out;
    out.series = load_csv(dir / "composed.csv");
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < out.series.size(); ++i) index[out.series[i].id] = i;
    out.components.resize(out.series.size());
    if (std::filesystem::exists(dir / "components.csv")) {
        for (auto& c : load_csv(dir / "components.csv")) {
            const auto cut = c.id.rfind("__c");
            require(cut != std::string::npos, ErrorCode::SchemaError, "component id '" + c.id + "' lacks a '__c' suffix");
            const auto it = index.find(c.id.substr(0, cut));
            require(it != index.end(), ErrorCode::SchemaError, "component '" + c.id + "' has no composed parent");
            out.components[it->second].push_back(std::move(c));
        }
    }
    if (std::filesystem::exists(dir / "meta.json")) {
        try {
            const auto meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
            const auto variant = synthetic_variant_from_string(meta.at("variant").get<std::string>());
            out.has_trend = variant != SyntheticVariant::SINUSOID;
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::SchemaError, "bad meta.json in '" + dir.string() + "': " + e.what());
        }
    }
    return out;
}

namespace {

BenchmarkData from_synthetic(SyntheticDataset ds) {
    BenchmarkData out;
    out.series = std::move(ds.composed);
    out.components = std::move(ds.components);
    out.has_trend = ds.variant != SyntheticVariant::SINUSOID;
    return out;
}

void cap(BenchmarkData& d, std::size_t n) {
    if (n == 0 || d.series.size() <= n) return;
    d.series.resize(n);
    d.components.resize(n);
}

}  // namespace

BenchmarkData load_dataset(const DatasetSpec& spec) {
    BenchmarkData out;
    switch (spec.kind) {
        case DatasetKind::SINUSOID:
            return from_synthetic(
                gen_sinusoid_dataset(spec.n_series, SyntheticDefaults::composition_size, spec.seed, spec.length));
        case DatasetKind::TREND1:
            return from_synthetic(gen_trend_dataset(SyntheticVariant::TREND1, spec.n_series, spec.seed, spec.length));
        case DatasetKind::TREND2:
            return from_synthetic(gen_trend_dataset(SyntheticVariant::TREND2, spec.n_series, spec.seed, spec.length));
        case DatasetKind::GENERATED: out = read_synthetic_dir(spec.path); break;
        case DatasetKind::CSV:
            out.series = load_csv(spec.path);
            out.components.resize(out.series.size());
            break;
    }
    cap(out, spec.n_series);
    require(!out.series.empty(), ErrorCode::EmptyFile, "dataset '" + spec.name + "' has no series");
    return out;
}

PreparedSplit prepare_split(const DatasetSpec& spec, const BenchmarkData& data, SplitMode mode) {
    const ForecastTask task(spec.context_len, spec.horizon);
    const std::size_t l = spec.context_len, h = spec.horizon;
    const bool synthetic = spec.kind != DatasetKind::CSV;
    const auto window =
        spec.window.value_or(synthetic ? DecompositionWindow::FullSeries : DecompositionWindow::TrainRegion);
    const auto basis = spec.ood_basis.value_or(data.has_trend ? OodBasis::COMPONENTS : OodBasis::SPECTRAL);

    PreparedSplit out;
    // Train windows end before the held-out tail [T - h, T); one validation
    // window per training stream is anchored at T - h.
    const auto add_stream = [&](std::span<const double> values, std::size_t T, std::size_t index) {
        require(T >= l + 2 * h, ErrorCode::RangeTooShort,
                "split point " + std::to_string(T) + " leaves no room for train and validation windows");
        auto tr = make_windows(values, task, spec.stride, IndexRange{0, T - h});
        for (auto& w : tr) {
            w.series_index = index;
            out.train.push_back(std::move(w));
        }
        auto va = make_windows(values, task, 1, IndexRange{T - h - l, T});
        va.front().series_index = index;
        out.valid.push_back(std::move(va.front()));
    };

    for (std::size_t i = 0; i < data.series.size(); ++i) {
        const auto& s = data.series[i];
        require(s.size() > h, ErrorCode::RangeTooShort, "series '" + s.id + "' is shorter than the horizon");
        const std::size_t T = spec.split_point ? spec.split_point : s.size() - h;
        require(T + h <= s.size(), ErrorCode::RangeTooShort,
                "series '" + s.id + "' has no test window after split point " + std::to_string(T));
        out.test.push_back(test_windows(s.values, task, T, spec.stride));
        for (auto& w : out.test.back()) w.series_index = i;
        out.decompositions.push_back(decompose_for_split(s, T, window));

        if (mode == SplitMode::ID) {
            add_stream(std::span<const double>(s.values.data(), T), T, i);
            continue;
        }
        if (basis == OodBasis::COMPONENTS) {
            const auto& comps = data.components[i];
            require(!comps.empty(), ErrorCode::ConfigError,
                    "dataset '" + spec.name + "' has no stored components for series '" + s.id + "'");
            for (std::size_t j = 0; j < comps.size(); ++j) {
                require(comps[j].size() >= T, ErrorCode::RangeTooShort, "component '" + comps[j].id + "' too short");
                add_stream(std::span<const double>(comps[j].values.data(), T), T, i * comps.size() + j);
            }
        } else {
            const auto& dec = out.decompositions.back();
            const auto comps = top_k_components(dec, spec.k);
            for (std::size_t j = 0; j < comps.size(); ++j) {
                const auto b = basis_series(comps[j], dec.n, IndexRange{0, T});
                add_stream(b, T, i * spec.k + j);
            }
        }
    }
    return out;
}

}  // namespace specbench
