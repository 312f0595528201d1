#include "specbench/preprocess.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ols.hpp"
#include "specbench/error.hpp"

namespace specbench {
namespace {

/// Splits one CSV record. Double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_record(const std::string& line, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (quoted) fail(ErrorCode::SchemaError, "unterminated quote on line " + std::to_string(line_no));
    fields.push_back(std::move(cur));
    return fields;
}

double parse_number(const std::string& s, std::size_t line_no) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last || s.empty()) {
        fail(ErrorCode::SchemaError, "non-numeric y value '" + s + "' on line " + std::to_string(line_no));
    }
    if (!std::isfinite(v)) fail(ErrorCode::SchemaError, "non-finite y value on line " + std::to_string(line_no));
    return v;
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << text;
}

// MacKinnon (1994) response-surface coefficients, constant-only regression, N = 1.
constexpr double kTauMax = 2.74;
constexpr double kTauMin = -18.83;
constexpr double kTauStar = -1.61;
constexpr double kSmallP[3] = {2.1659, 1.4412, 0.038269};
constexpr double kLargeP[4] = {1.7339, 0.93202, -0.12745, -0.010368};

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

// ---------------------------------------------------------------- CSV

std::vector<CsvSeries> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    int col_id = -1, col_ds = -1, col_y = -1;
    std::size_t ncols = 0;
    std::vector<CsvSeries> out;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<double>> values;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split_record(line, line_no);
        if (!have_header) {
            if (line_no == 1 && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
            for (std::size_t i = 0; i < fields.size(); ++i) {
                if (fields[i] == "unique_id") col_id = static_cast<int>(i);
                if (fields[i] == "ds") col_ds = static_cast<int>(i);
                if (fields[i] == "y") col_y = static_cast<int>(i);
            }
            if (col_id < 0) fail(ErrorCode::SchemaError, "missing `unique_id` column");
            if (col_ds < 0) fail(ErrorCode::SchemaError, "missing `ds` column");
            if (col_y < 0) fail(ErrorCode::SchemaError, "missing `y` column");
            ncols = fields.size();
            have_header = true;
            continue;
        }
        if (fields.size() != ncols) {
            fail(ErrorCode::SchemaError, "line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                                             " fields, expected " + std::to_string(ncols));
        }
        const std::string& id = fields[static_cast<std::size_t>(col_id)];
        if (id.empty()) fail(ErrorCode::SchemaError, "empty unique_id on line " + std::to_string(line_no));
        const double y = parse_number(fields[static_cast<std::size_t>(col_y)], line_no);
        auto [it, inserted] = index.emplace(id, out.size());
        if (inserted) {
            out.push_back(CsvSeries{});
            out.back().series.id = id;
            values.emplace_back();
        }
        values[it->second].push_back(y);
        out[it->second].stamps.push_back(fields[static_cast<std::size_t>(col_ds)]);
    }
    if (!have_header || out.empty()) fail(ErrorCode::EmptyFile, "no data rows");
    for (std::size_t i = 0; i < out.size(); ++i) out[i].series = TimeSeries(out[i].series.id, std::move(values[i]));
    return out;
}

std::vector<CsvSeries> load_csv_with_stamps(const std::filesystem::path& path) {
    const auto text = read_file(path);
    if (text.empty()) fail(ErrorCode::EmptyFile, "'" + path.string() + "' is empty");
    return parse_csv(text);
}

std::vector<TimeSeries> load_csv(const std::filesystem::path& path) {
    std::vector<TimeSeries> out;
    for (auto& s : load_csv_with_stamps(path)) out.push_back(std::move(s.series));
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string format_csv(const std::vector<CsvSeries>& series) {
    std::string out = "unique_id,ds,y\n";
    for (const auto& s : series) {
        const std::string id = quote_if_needed(s.series.id);
        for (std::size_t t = 0; t < s.series.size(); ++t) {
            out += id;
            out += ',';
            out += t < s.stamps.size() ? quote_if_needed(s.stamps[t])
                                       : std::to_string(s.series.origin_index + static_cast<long>(t));
            out += ',';
            out += format_double(s.series.values[t]);
            out += '\n';
        }
    }
    return out;
}

void write_csv(const std::filesystem::path& path, const std::vector<CsvSeries>& series) {
    write_file(path, format_csv(series));
}

void write_csv(const std::filesystem::path& path, const std::vector<TimeSeries>& series) {
    std::vector<CsvSeries> wrapped;
    wrapped.reserve(series.size());
    for (const auto& s : series) wrapped.push_back(CsvSeries{s, {}});
    write_csv(path, wrapped);
}

// ---------------------------------------------------------------- segmentation

TimeSeries Segment::to_series() const { return TimeSeries(id(), values, static_cast<long>(offset)); }

std::vector<Segment> segment(const TimeSeries& series, std::size_t patch_len, std::size_t stride) {
    require(patch_len > 0 && stride > 0, ErrorCode::InvalidArgument, "patch length and stride must be positive");
    if (series.size() < patch_len) {
        fail(ErrorCode::TooShort, "series '" + series.id + "' has " + std::to_string(series.size()) +
                                      " samples, fewer than the patch length " + std::to_string(patch_len));
    }
    const std::size_t count = (series.size() - patch_len) / stride + 1;
    std::vector<Segment> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t off = i * stride;
        Segment s;
        s.parent_id = series.id;
        s.offset = off;
        s.values.assign(series.values.begin() + static_cast<long>(off),
                        series.values.begin() + static_cast<long>(off + patch_len));
        out.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------- ADF

double mackinnon_p(double tau) {
    if (tau > kTauMax) return 1.0;
    if (tau < kTauMin) return 0.0;
    double poly = 0.0;
    if (tau <= kTauStar) {
        for (int i = 2; i >= 0; --i) poly = poly * tau + kSmallP[i];
    } else {
        for (int i = 3; i >= 0; --i) poly = poly * tau + kLargeP[i];
    }
    return normal_cdf(poly);
}

namespace {

/// Design matrix for Δy_t on [const, y_{t-1}, Δy_{t-1..t-lags}], using the
/// last `nobs` usable rows.
void adf_design(std::span<const double> x, std::size_t ncols_lag, std::size_t nobs, Eigen::MatrixXd& design,
                Eigen::VectorXd& target) {
    const std::size_t n = x.size();
    const std::size_t ndiff = n - 1;
    design.resize(static_cast<Eigen::Index>(nobs), static_cast<Eigen::Index>(2 + ncols_lag));
    target.resize(static_cast<Eigen::Index>(nobs));
    const std::size_t first = ndiff - nobs;  // first diff index used as the dependent variable
    for (std::size_t r = 0; r < nobs; ++r) {
        const std::size_t t = first + r;  // Δy index: x[t+1] - x[t]
        const auto row = static_cast<Eigen::Index>(r);
        target(row) = x[t + 1] - x[t];
        design(row, 0) = 1.0;
        design(row, 1) = x[t];
        for (std::size_t j = 1; j <= ncols_lag; ++j) design(row, static_cast<Eigen::Index>(1 + j)) = x[t + 1 - j] - x[t - j];
    }
}

}  // namespace

AdfReport adf_test(std::span<const double> x, double alpha) {
    const std::size_t n = x.size();
    require(n >= 20, ErrorCode::InvalidArgument, "ADF test needs at least 20 samples");
    for (double v : x) require(std::isfinite(v), ErrorCode::NonFinite, "non-finite sample in ADF input");
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    if (*mn == *mx) fail(ErrorCode::DegenerateInput, "constant series has no ADF statistic");

    const std::size_t schwert = static_cast<std::size_t>(std::ceil(12.0 * std::pow(static_cast<double>(n) / 100.0, 0.25)));
    const std::size_t maxlag = std::min(n / 2 - 1 - 1, schwert);

    // Lag search on the common sample of n - 1 - maxlag rows.
    const std::size_t common = n - 1 - maxlag;
    Eigen::MatrixXd full;
    Eigen::VectorXd target;
    adf_design(x, maxlag, common, full, target);
    double best_aic = 0.0;
    std::size_t best_lag = 0;
    for (std::size_t lag = 0; lag <= maxlag; ++lag) {
        const auto fit = detail::ols(full.leftCols(static_cast<Eigen::Index>(2 + lag)), target);
        const double aic = fit.aic();
        if (lag == 0 || aic < best_aic) {
            best_aic = aic;
            best_lag = lag;
        }
    }

    // Refit with the chosen lag on every usable row.
    const std::size_t nobs = n - 1 - best_lag;
    Eigen::MatrixXd design;
    adf_design(x, best_lag, nobs, design, target);
    double xtx_inv = 0.0;
    const auto fit = detail::ols(design, target, 1, &xtx_inv);
    const double dof = static_cast<double>(nobs) - static_cast<double>(design.cols());
    const double sigma2 = fit.ssr / dof;
    const double se = std::sqrt(sigma2 * xtx_inv);
    if (!(se > 0.0) || !std::isfinite(se)) fail(ErrorCode::DegenerateInput, "ADF regression is degenerate");

    AdfReport rep;
    rep.statistic = fit.beta(1) / se;
    rep.p_value = mackinnon_p(rep.statistic);
    rep.lag_used = best_lag;
    rep.nobs = nobs;
    rep.stationary = rep.p_value < alpha;
    return rep;
}

// ---------------------------------------------------------------- ACF & selection

double mean_acf(std::span<const double> values, std::size_t nlags) {
    const std::size_t n = values.size();
    require(nlags >= 1 && n > nlags, ErrorCode::InvalidArgument, "mean_acf needs length > nlags >= 1");
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double denom = 0.0;
    for (double v : values) denom += (v - mean) * (v - mean);
    if (denom == 0.0) fail(ErrorCode::ZeroVariance, "autocorrelation undefined for a constant series");
    double total = 0.0;
    for (std::size_t lag = 1; lag <= nlags; ++lag) {
        double num = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t) num += (values[t] - mean) * (values[t + lag] - mean);
        total += num / denom;
    }
    return total / static_cast<double>(nlags);
}

std::vector<Segment> select_series(const std::vector<Segment>& segments, std::size_t keep, double alpha,
                                   std::size_t nlags) {
    struct Scored {
        const Segment* seg;
        double acf;
    };
    std::vector<Scored> survivors;
    for (const auto& s : segments) {
        try {
            const auto rep = adf_test(s.values, alpha);
            if (!rep.stationary) continue;
            survivors.push_back({&s, mean_acf(s.values, nlags)});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::DegenerateInput && e.code() != ErrorCode::ZeroVariance) throw;
        }
    }
    if (survivors.size() < keep) {
        fail(ErrorCode::NotEnoughStationary, std::to_string(survivors.size()) + " segments pass the ADF screen, " +
                                                 std::to_string(keep) + " requested");
    }
    std::sort(survivors.begin(), survivors.end(), [](const Scored& a, const Scored& b) {
        if (a.acf != b.acf) return a.acf > b.acf;
        if (a.seg->parent_id != b.seg->parent_id) return a.seg->parent_id < b.seg->parent_id;
        return a.seg->offset < b.seg->offset;
    });
    std::vector<Segment> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) out.push_back(*survivors[i].seg);
    return out;
}

}  // namespace specbench
