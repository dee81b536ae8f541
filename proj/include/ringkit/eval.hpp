#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ringkit/types.hpp"

namespace ringkit {

/// One reference/estimate observation for metric computation.
struct PredPair {
    double reference = 0.0;
    double estimate = 0.0;
    ActivityTag activity = ActivityTag::Other;
    std::string subject_id;
};

/// Aggregate errors of one group of pairs. rmse >= mae >= 0 always; pearson
/// is null for degenerate inputs (fewer than two pairs or zero variance).
struct MetricReport {
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    double mape_percent = 0.0;
    std::optional<double> pearson;
    std::optional<double> se_mae;
    std::size_t mape_excluded_zero_reference = 0;
    bool pearson_degenerate = false;
    bool low_n = false;
};

enum class MergeMode { Pooled, MeanOfFolds };

/// Metrics over one pair list. Pairs are accumulated in a canonical order so
/// that pooling any partition of the same list reproduces identical bits.
MetricReport metrics(const std::vector<PredPair>& pairs);

/// Cross-validation merge. Pooled concatenates all test-fold pairs and
/// computes metrics once; MeanOfFolds averages the per-fold metric values.
MetricReport merge_folds(const std::vector<std::vector<PredPair>>& per_fold,
                         MergeMode mode = MergeMode::Pooled);

enum class StratifyBy { Scenario, Activity };

/// Per-group metrics; groups with fewer than 10 pairs carry the low_n flag.
std::map<std::string, MetricReport> stratify(const std::vector<PredPair>& pairs, StratifyBy by);

// ─── Report emission ─────────────────────────────────────────────────────────

struct ReportRow {
    std::string task;
    std::string method;
    std::string ring_type;
    std::string scenario;
    MetricReport report;
};

/// CSV columns: task,method,ring_type,scenario,n,mae,se_mae,rmse,mape,pearson.
/// Rows are sorted by (task, method, scenario).
void write_report_csv(const std::filesystem::path& path, std::vector<ReportRow> rows);
std::string report_rows_to_json(std::vector<ReportRow> rows);

} // namespace ringkit
