#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <nlohmann/json.hpp>
#include <set>

#include "specbench/error.hpp"
#include "specbench/harness.hpp"

namespace specbench {

namespace {

using nlohmann::json;

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::vector<RunResult> load_results(const std::filesystem::path& results_dir) {
    auto dir = results_dir;
    if (std::filesystem::is_directory(dir / "runs")) dir /= "runs";
    require(std::filesystem::is_directory(dir), ErrorCode::IoError, "'" + results_dir.string() + "' is not a directory");
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && ends_with(name, ".json") && !ends_with(name, ".timing.json")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunResult> out;
    for (const auto& f : files) {
        try {
            out.push_back(run_result_from_json(read_text_file(f)));
        } catch (const Error& e) {
            fail(e.code(), f.filename().string() + ": " + e.what());
        }
    }
    return out;
}

Summary aggregate(const std::vector<RunResult>& results, bool allow_missing, double alpha) {
    Summary s;
    std::set<std::string> keys;
    for (const auto& r : results) {
        const std::string key = to_string(r.mode) + "/" + r.dataset + "/" + r.model + "/" + std::to_string(r.seed);
        require(keys.insert(key).second, ErrorCode::SchemaError, "duplicate results for " + key);
        if (!r.ok()) s.failed_runs.push_back(r.run_id + " " + key + ": " + r.error);
    }

    for (auto mode : {SplitMode::ID, SplitMode::OOD_COMPOSITIONAL}) {
        std::set<std::string> datasets, models;
        std::map<std::pair<std::string, std::string>, std::vector<const RunResult*>> cell_runs;
        for (const auto& r : results) {
            if (r.mode != mode) continue;
            datasets.insert(r.dataset);
            models.insert(r.model);
            if (r.ok()) cell_runs[{r.model, r.dataset}].push_back(&r);
        }
        if (datasets.empty()) continue;

        ModeSummary ms;
        ms.mode = mode;
        std::set<std::string> incomplete;
        std::map<std::pair<std::string, std::string>, CellSummary> cells;
        for (const auto& m : models) {
            for (const auto& d : datasets) {
                const auto it = cell_runs.find({m, d});
                if (it == cell_runs.end()) {
                    s.missing_cells.push_back(to_string(mode) + "/" + d + "/" + m);
                    incomplete.insert(m);
                    continue;
                }
                CellSummary c;
                c.dataset = d;
                c.model = m;
                c.n_seeds = it->second.size();
                const double n = static_cast<double>(c.n_seeds);
                for (const auto* r : it->second) {
                    c.mae_mean += r->mae;
                    c.k_max_mean += r->k_max;
                }
                c.mae_mean /= n;
                c.k_max_mean /= n;
                double var = 0.0;
                for (const auto* r : it->second) var += (r->mae - c.mae_mean) * (r->mae - c.mae_mean);
                c.mae_std = std::sqrt(var / n);
                cells[{m, d}] = c;
                ms.cells.push_back(c);
            }
        }

        ms.scores.datasets.assign(datasets.begin(), datasets.end());
        for (const auto& m : models) {
            if (incomplete.count(m)) continue;
            ms.scores.methods.push_back(m);
            std::vector<double> row;
            for (const auto& d : datasets) row.push_back(cells[{m, d}].mae_mean);
            ms.scores.scores.push_back(std::move(row));
        }
        if (!ms.scores.methods.empty()) {
            const auto ranks = rank_matrix(ms.scores);
            const auto avg = average_ranks(ms.scores);
            for (std::size_t i = 0; i < ms.scores.methods.size(); ++i) {
                MethodSummary mm;
                mm.model = ms.scores.methods[i];
                mm.average_rank = avg[i];
                for (std::size_t j = 0; j < datasets.size(); ++j) {
                    if (ranks[i][j] <= 3.0) ++mm.top3_wins;
                    mm.k_max_mean += cells[{mm.model, ms.scores.datasets[j]}].k_max_mean;
                }
                mm.k_max_mean /= static_cast<double>(datasets.size());
                ms.methods.push_back(mm);
            }
            if (ms.scores.methods.size() >= 3 && datasets.size() >= 2) ms.cd = cd_analysis(ms.scores, alpha);
        }
        s.modes.push_back(std::move(ms));
    }

    if (!s.missing_cells.empty() && !allow_missing) {
        std::string msg = std::to_string(s.missing_cells.size()) + " cell(s) without a successful run:";
        for (const auto& c : s.missing_cells) msg += " " + c;
        fail(ErrorCode::MissingCells, msg);
    }
    return s;
}

std::string summary_to_json(const Summary& s) {
    json root;
    root["failed_runs"] = s.failed_runs;
    root["missing_cells"] = s.missing_cells;
    json modes = json::array();
    for (const auto& ms : s.modes) {
        json m;
        m["mode"] = to_string(ms.mode);
        json cells = json::array();
        for (const auto& c : ms.cells) {
            cells.push_back({{"dataset", c.dataset},
                             {"model", c.model},
                             {"mae_mean", c.mae_mean},
                             {"mae_std", c.mae_std},
                             {"k_max_mean", c.k_max_mean},
                             {"n_seeds", c.n_seeds}});
        }
        m["cells"] = cells;
        json methods = json::array();
        for (const auto& mm : ms.methods) {
            methods.push_back({{"model", mm.model},
                               {"average_rank", mm.average_rank},
                               {"top3_wins", mm.top3_wins},
                               {"k_max_mean", mm.k_max_mean}});
        }
        m["methods"] = methods;
        if (ms.cd) {
            const auto& cd = *ms.cd;
            const auto& names = ms.scores.methods;
            json c;
            c["friedman"] = {{"statistic", cd.friedman.statistic},
                             {"p_value", cd.friedman.p_value},
                             {"reject", cd.friedman.reject}};
            c["gate_passed"] = cd.gate_passed;
            json order = json::array();
            for (auto i : cd.order) order.push_back(names[i]);
            c["order"] = order;
            json groups = json::array();
            for (const auto& g : cd.groups) {
                json members = json::array();
                for (auto i : g) members.push_back(names[i]);
                groups.push_back(members);
            }
            c["groups"] = groups;
            json pairs = json::array();
            for (std::size_t i = 0; i < names.size(); ++i)
                for (std::size_t j = i + 1; j < names.size(); ++j)
                    pairs.push_back({{"a", names[i]}, {"b", names[j]}, {"adjusted_p", cd.adjusted_p[i][j]}});
            c["pairs"] = pairs;
            m["cd"] = c;
        } else {
            m["cd"] = nullptr;
        }
        modes.push_back(m);
    }
    root["modes"] = modes;
    return root.dump(2) + "\n";
}

// ---- SVG ------------------------------------------------------------------------

namespace {

std::string num(double v) {
    char buf[32];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 2);
    std::string s(buf, ec == std::errc() ? p : buf);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"};

}  // namespace

std::string forecast_svg(const std::vector<double>& context, const std::vector<double>& target,
                         const std::vector<NamedForecast>& forecasts, const std::string& title) {
    for (const auto& f : forecasts)
        require(f.values.size() == target.size(), ErrorCode::ShapeMismatch,
                "forecast '" + f.name + "' does not match the target length");
    const double width = 900, height = 420, left = 60, right = 180, top = 40, bottom = 40;
    const std::size_t n = context.size() + target.size();
    double lo = 0.0, hi = 0.0;
    bool any = false;
    const auto widen = [&](const std::vector<double>& v) {
        for (double x : v) {
            if (!std::isfinite(x)) continue;
            lo = any ? std::min(lo, x) : x;
            hi = any ? std::max(hi, x) : x;
            any = true;
        }
    };
    widen(context);
    widen(target);
    for (const auto& f : forecasts) widen(f.values);
    if (!any || hi - lo < 1e-12) {
        lo -= 1.0;
        hi += 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double pw = width - left - right, ph = height - top - bottom;
    const auto px = [&](std::size_t t) { return left + (n > 1 ? pw * static_cast<double>(t) / static_cast<double>(n - 1) : 0.0); };
    const auto py = [&](double v) { return top + ph * (hi - v) / (hi - lo); };
    const auto polyline = [&](const std::vector<double>& v, std::size_t offset, const std::string& style) {
        std::string pts;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) pts += ' ';
            pts += num(px(offset + i)) + "," + num(py(v[i]));
        }
        return "<polyline fill=\"none\" " + style + " points=\"" + pts + "\"/>\n";
    };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
           "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!title.empty())
        svg += "<text x=\"" + num(left) + "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" +
               xml_escape(title) + "</text>\n";
    svg += "<rect x=\"" + num(left) + "\" y=\"" + num(top) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
           "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double v = lo + (hi - lo) * i / 4.0;
        svg += "<text x=\"" + num(left - 6) + "\" y=\"" + num(py(v) + 4) +
               "\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">" + num(v) + "</text>\n";
    }
    if (!context.empty() && !target.empty()) {
        const double xs = px(context.size());
        svg += "<line x1=\"" + num(xs) + "\" y1=\"" + num(top) + "\" x2=\"" + num(xs) + "\" y2=\"" + num(top + ph) +
               "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";
    }
    std::vector<double> truth = context;
    truth.insert(truth.end(), target.begin(), target.end());
    if (!truth.empty()) svg += polyline(truth, 0, "stroke=\"black\" stroke-width=\"1.2\"");
    for (std::size_t i = 0; i < forecasts.size(); ++i) {
        const std::string color = kPalette[i % std::size(kPalette)];
        svg += polyline(forecasts[i].values, context.size(), "stroke=\"" + color + "\" stroke-width=\"1.2\"");
    }

    // Legend: ground truth first, then one entry per forecast.
    const double lx = width - right + 16;
    const auto entry = [&](std::size_t row, const std::string& color, const std::string& label) {
        const double y = top + 12 + 18.0 * static_cast<double>(row);
        return "<line x1=\"" + num(lx) + "\" y1=\"" + num(y) + "\" x2=\"" + num(lx + 20) + "\" y2=\"" + num(y) +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n<text x=\"" + num(lx + 26) + "\" y=\"" +
               num(y + 4) + "\" font-family=\"sans-serif\" font-size=\"11\" class=\"legend\">" + xml_escape(label) +
               "</text>\n";
    };
    svg += entry(0, "black", "ground truth");
    for (std::size_t i = 0; i < forecasts.size(); ++i)
        svg += entry(i + 1, kPalette[i % std::size(kPalette)], forecasts[i].name);
    svg += "</svg>\n";
    return svg;
}

void plot_forecast(const std::vector<double>& context, const std::vector<double>& target,
                   const std::vector<NamedForecast>& forecasts, const std::filesystem::path& path,
                   const std::string& title) {
    write_text_file(path, forecast_svg(context, target, forecasts, title));
}

}  // namespace specbench
