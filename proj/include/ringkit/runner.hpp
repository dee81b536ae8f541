#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ringkit/config.hpp"
#include "ringkit/eval.hpp"

namespace ringkit {

struct RunOptions {
    int jobs = 1;
    bool verbose = false;
    std::optional<std::filesystem::path> out_override;
    std::optional<std::uint64_t> seed_override; // replaces folds.seed
};

struct RunCounters {
    std::size_t sessions = 0;
    std::size_t windows_candidates = 0;
    std::size_t windows_gate_dropped = 0;
    std::size_t windows = 0;
    std::size_t pairs = 0;
    std::size_t pairs_dropped_missing_reference = 0;
    std::size_t pairs_dropped_sparse_labels = 0;
    std::size_t pairs_dropped_degenerate = 0;
    std::size_t estimates = 0;
    std::size_t estimate_failures = 0;
    std::size_t estimates_out_of_band = 0;
    std::size_t out_of_band_excluded = 0;
    std::size_t labels = 0;
    std::size_t labels_dropped_bounds = 0;
    std::size_t labels_dropped_outside_span = 0;
    std::size_t signal_rows_dropped_nonfinite = 0;
};

/// One evaluated pair, as written to pairs.csv.
struct ResultPair {
    std::string session_id;
    std::string subject_id;
    RingType ring_type = RingType::Reflective;
    ActivityTag activity = ActivityTag::Other;
    std::int64_t window_start_ms = 0;
    double reference = 0.0;
    double estimate = 0.0;
    bool out_of_band = false;
};

struct RunResult {
    std::filesystem::path out_dir;
    RunCounters counters;
    std::vector<ReportRow> rows;
    std::vector<std::size_t> fold_sizes; // ridge only
};

/// Executes the configured experiment end to end and writes report.json,
/// report.csv, pairs.csv and manifest.json into the output directory.
/// Deterministic for a fixed (config, seed) at any jobs value.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opt = {});

/// Generates the configured synthetic sessions and writes them as session
/// directories under out_dir.
std::vector<std::filesystem::path> run_synth(const ExperimentConfig& cfg,
                                             const std::filesystem::path& out_dir);

/// Recomputes report.csv and report.json from a prior run's pairs.csv.
void rerender_report(const std::filesystem::path& run_dir,
                     const std::filesystem::path& out_dir);

/// Splits [0, n) into contiguous chunks across `jobs` worker threads and
/// applies fn to every index. Results written by index stay deterministic
/// regardless of the worker count.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

} // namespace ringkit
