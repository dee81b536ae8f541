#include "ringkit/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "ringkit/errors.hpp"

namespace ringkit {

namespace {

using json = nlohmann::json;

constexpr std::size_t kLowNThreshold = 10;

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "0";
    return std::string(buf, end);
}

void sort_canonical(std::vector<PredPair>& pairs) {
    std::sort(pairs.begin(), pairs.end(), [](const PredPair& a, const PredPair& b) {
        if (a.reference != b.reference) return a.reference < b.reference;
        return a.estimate < b.estimate;
    });
}

} // namespace

MetricReport metrics(const std::vector<PredPair>& pairs) {
    if (pairs.empty()) {
        throw EmptyInput("metrics: no pairs");
    }
    std::vector<PredPair> sorted = pairs;
    sort_canonical(sorted);

    MetricReport r;
    r.n = sorted.size();
    const double n = static_cast<double>(r.n);

    double abs_sum = 0.0;
    double sq_sum = 0.0;
    double mape_sum = 0.0;
    std::size_t mape_n = 0;
    for (const PredPair& p : sorted) {
        const double e = p.reference - p.estimate;
        abs_sum += std::abs(e);
        sq_sum += e * e;
        if (p.reference != 0.0) {
            mape_sum += std::abs(e / p.reference);
            ++mape_n;
        } else {
            ++r.mape_excluded_zero_reference;
        }
    }
    r.mae = abs_sum / n;
    r.rmse = std::sqrt(sq_sum / n);
    r.mape_percent = mape_n > 0 ? 100.0 * mape_sum / static_cast<double>(mape_n) : 0.0;

    if (r.n >= 2) {
        double dev_sq = 0.0;
        for (const PredPair& p : sorted) {
            const double d = std::abs(p.reference - p.estimate) - r.mae;
            dev_sq += d * d;
        }
        r.se_mae = std::sqrt(dev_sq / (n - 1.0)) / std::sqrt(n);

        double y_mean = 0.0;
        double e_mean = 0.0;
        for (const PredPair& p : sorted) {
            y_mean += p.reference;
            e_mean += p.estimate;
        }
        y_mean /= n;
        e_mean /= n;
        double cov = 0.0;
        double var_y = 0.0;
        double var_e = 0.0;
        for (const PredPair& p : sorted) {
            const double dy = p.reference - y_mean;
            const double de = p.estimate - e_mean;
            cov += dy * de;
            var_y += dy * dy;
            var_e += de * de;
        }
        if (var_y > 0.0 && var_e > 0.0) {
            r.pearson = cov / std::sqrt(var_y * var_e);
        } else {
            r.pearson_degenerate = true;
        }
    } else {
        r.pearson_degenerate = true;
    }

    r.low_n = r.n < kLowNThreshold;
    if (r.rmse < r.mae) {
        throw Error("metrics: rmse < mae, computation is broken");
    }
    return r;
}

MetricReport merge_folds(const std::vector<std::vector<PredPair>>& per_fold, MergeMode mode) {
    if (mode == MergeMode::Pooled) {
        std::vector<PredPair> pooled;
        for (const auto& fold : per_fold) {
            pooled.insert(pooled.end(), fold.begin(), fold.end());
        }
        return metrics(pooled);
    }

    MetricReport out;
    std::size_t folds_used = 0;
    double pearson_sum = 0.0;
    std::size_t pearson_n = 0;
    double se_sum = 0.0;
    std::size_t se_n = 0;
    for (const auto& fold : per_fold) {
        if (fold.empty()) continue;
        const MetricReport r = metrics(fold);
        out.n += r.n;
        out.mae += r.mae;
        out.rmse += r.rmse;
        out.mape_percent += r.mape_percent;
        out.mape_excluded_zero_reference += r.mape_excluded_zero_reference;
        if (r.pearson) {
            pearson_sum += *r.pearson;
            ++pearson_n;
        }
        if (r.se_mae) {
            se_sum += *r.se_mae;
            ++se_n;
        }
        ++folds_used;
    }
    if (folds_used == 0) {
        throw EmptyInput("merge_folds: no pairs in any fold");
    }
    const double k = static_cast<double>(folds_used);
    out.mae /= k;
    out.rmse /= k;
    out.mape_percent /= k;
    if (pearson_n > 0) {
        out.pearson = pearson_sum / static_cast<double>(pearson_n);
    } else {
        out.pearson_degenerate = true;
    }
    if (se_n > 0) out.se_mae = se_sum / static_cast<double>(se_n);
    out.low_n = out.n < kLowNThreshold;
    return out;
}

std::map<std::string, MetricReport> stratify(const std::vector<PredPair>& pairs, StratifyBy by) {
    std::map<std::string, std::vector<PredPair>> groups;
    for (const PredPair& p : pairs) {
        const std::string key = by == StratifyBy::Scenario
                                    ? std::string(to_string(scenario_of(p.activity)))
                                    : std::string(to_string(p.activity));
        groups[key].push_back(p);
    }
    std::map<std::string, MetricReport> out;
    for (const auto& [key, group] : groups) {
        out.emplace(key, metrics(group));
    }
    return out;
}

namespace {

void sort_rows(std::vector<ReportRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        if (a.task != b.task) return a.task < b.task;
        if (a.method != b.method) return a.method < b.method;
        return a.scenario < b.scenario;
    });
}

} // namespace

void write_report_csv(const std::filesystem::path& path, std::vector<ReportRow> rows) {
    sort_rows(rows);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << "task,method,ring_type,scenario,n,mae,se_mae,rmse,mape,pearson\n";
    for (const ReportRow& row : rows) {
        const MetricReport& r = row.report;
        out << row.task << ',' << row.method << ',' << row.ring_type << ',' << row.scenario << ','
            << r.n << ',' << format_double(r.mae) << ','
            << (r.se_mae ? format_double(*r.se_mae) : std::string()) << ','
            << format_double(r.rmse) << ',' << format_double(r.mape_percent) << ','
            << (r.pearson ? format_double(*r.pearson) : std::string()) << '\n';
    }
}

std::string report_rows_to_json(std::vector<ReportRow> rows) {
    sort_rows(rows);
    json j;
    j["schema_version"] = 1;
    json arr = json::array();
    for (const ReportRow& row : rows) {
        const MetricReport& r = row.report;
        json item;
        item["task"] = row.task;
        item["method"] = row.method;
        item["ring_type"] = row.ring_type;
        item["scenario"] = row.scenario;
        item["n"] = r.n;
        item["mae"] = r.mae;
        item["se_mae"] = r.se_mae ? json(*r.se_mae) : json(nullptr);
        item["rmse"] = r.rmse;
        item["mape"] = r.mape_percent;
        item["pearson"] = r.pearson ? json(*r.pearson) : json(nullptr);
        item["mape_excluded_zero_reference"] = r.mape_excluded_zero_reference;
        item["low_n"] = r.low_n;
        arr.push_back(std::move(item));
    }
    j["rows"] = std::move(arr);
    return j.dump(2) + "\n";
}

} // namespace ringkit
