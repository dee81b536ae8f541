#include "ringkit/runner.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "ringkit/errors.hpp"
#include "ringkit/learner.hpp"
#include "ringkit/synth.hpp"

namespace ringkit {

namespace {

using json = nlohmann::json;

constexpr const char* kToolVersion = "0.1.0";

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "0";
    return std::string(buf, end);
}

struct SessionData {
    SessionRecord record;
    LoadStats stats;
};

std::vector<SessionData> collect_sessions(const ExperimentConfig& cfg, const RunOptions& opt) {
    std::vector<SessionData> sessions;
    if (cfg.uses_synth()) {
        for (const SynthSpec& spec : cfg.synth_specs) {
            SessionData d;
            d.record = generate(spec);
            d.stats.labels = d.record.labels.size();
            sessions.push_back(std::move(d));
        }
    } else {
        std::vector<std::filesystem::path> dirs;
        if (!std::filesystem::is_directory(cfg.dataset_root)) {
            throw DataError("dataset root " + cfg.dataset_root.string() +
                            " is not a directory");
        }
        for (const auto& entry : std::filesystem::directory_iterator(cfg.dataset_root)) {
            if (entry.is_directory() &&
                std::filesystem::exists(entry.path() / "session.json")) {
                dirs.push_back(entry.path());
            }
        }
        std::sort(dirs.begin(), dirs.end());
        for (const auto& dir : dirs) {
            LoadResult r = load_session(dir);
            sessions.push_back({std::move(r.session), r.stats});
        }
    }
    if (cfg.ring_filter) {
        std::erase_if(sessions, [&](const SessionData& s) {
            return s.record.ring_type != *cfg.ring_filter;
        });
    }
    if (sessions.empty()) {
        throw DataError("no sessions matched the dataset selection");
    }
    std::sort(sessions.begin(), sessions.end(), [](const SessionData& a, const SessionData& b) {
        return a.record.session_id < b.record.session_id;
    });
    if (opt.verbose) {
        std::cerr << "ringkit: " << sessions.size() << " session(s)\n";
    }
    return sessions;
}

Channel first_ppg(const std::vector<Channel>& channels) {
    for (Channel c : channels) {
        if (is_ppg(c)) return c;
    }
    throw ConfigError("no PPG channel selected");
}

struct EstimateSlot {
    bool ok = false;
    double value = 0.0;
    bool out_of_band = false;
    std::string error;
};

SpO2Calibration calibration_for(const ExperimentConfig& cfg, RingType ring) {
    if (ring == RingType::Reflective && cfg.calibration_reflective) {
        return *cfg.calibration_reflective;
    }
    if (ring == RingType::Transmissive && cfg.calibration_transmissive) {
        return *cfg.calibration_transmissive;
    }
    return default_calibration(ring);
}

EstimateSlot estimate_physics(const ExperimentConfig& cfg, const LabeledPair& pair) {
    EstimateSlot slot;
    try {
        switch (cfg.method) {
        case Method::Peak: {
            const RateBand band = band_for(cfg.task);
            const PlanOutput out = run_plan(pair.window, first_ppg(cfg.channels), cfg.preprocess);
            const auto& samples = std::get<Eigen::ArrayXd>(out);
            const auto peaks = detect_peaks(samples, pair.window.rate_hz(), band);
            const RateEstimate est = rate_from_peaks(peaks, pair.window.duration_s(), band);
            slot.value = est.per_min;
            slot.out_of_band = est.out_of_band;
            break;
        }
        case Method::Fft: {
            const RateBand band = band_for(cfg.task);
            const PlanOutput out = run_plan(pair.window, first_ppg(cfg.channels), cfg.preprocess);
            const RateEstimate est = rate_from_spectrum(std::get<SpectrumEstimate>(out), band);
            slot.value = est.per_min;
            slot.out_of_band = est.out_of_band;
            break;
        }
        case Method::Ratio: {
            const double r = spo2_ratio(pair.window.samples(Channel::PPG_IR),
                                        pair.window.samples(Channel::PPG_RED),
                                        pair.window.rate_hz());
            const SpO2Estimate est = spo2_estimate(r, calibration_for(cfg, pair.ring_type));
            slot.value = est.percent;
            slot.out_of_band = est.out_of_band;
            break;
        }
        case Method::Ridge: throw Error("estimate_physics called for ridge");
        }
        slot.ok = true;
    } catch (const Error& e) {
        slot.error = e.what();
    }
    return slot;
}

struct PairsCsvRow {
    int fold = 0;
    ResultPair pair;
};

void write_pairs_csv(const std::filesystem::path& path, std::vector<PairsCsvRow> rows) {
    std::sort(rows.begin(), rows.end(), [](const PairsCsvRow& a, const PairsCsvRow& b) {
        if (a.pair.session_id != b.pair.session_id) {
            return a.pair.session_id < b.pair.session_id;
        }
        return a.pair.window_start_ms < b.pair.window_start_ms;
    });
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << "fold,session_id,subject_id,ring_type,activity,scenario,window_start_ms,"
           "reference,estimate,abs_error,out_of_band\n";
    for (const PairsCsvRow& r : rows) {
        out << r.fold << ',' << r.pair.session_id << ',' << r.pair.subject_id << ','
            << to_string(r.pair.ring_type) << ',' << to_string(r.pair.activity) << ','
            << to_string(scenario_of(r.pair.activity)) << ',' << r.pair.window_start_ms << ','
            << format_double(r.pair.reference) << ',' << format_double(r.pair.estimate) << ','
            << format_double(std::abs(r.pair.reference - r.pair.estimate)) << ','
            << (r.pair.out_of_band ? 1 : 0) << '\n';
    }
}

std::string ring_label(const ExperimentConfig& cfg) {
    return cfg.ring_filter ? std::string(to_string(*cfg.ring_filter)) : std::string("all");
}

// Builds the report rows: one overall row (fold-merged) plus one row per
// stratification group over the included pairs.
std::vector<ReportRow> build_rows(const ExperimentConfig& cfg,
                                  const std::vector<std::vector<PredPair>>& per_fold_included) {
    std::vector<PredPair> included;
    for (const auto& fold : per_fold_included) {
        included.insert(included.end(), fold.begin(), fold.end());
    }
    if (included.empty()) {
        throw DataError("no pairs left to evaluate");
    }

    std::vector<ReportRow> rows;
    const std::string task(to_string(cfg.task));
    const std::string method(to_string(cfg.method));
    const std::string ring = ring_label(cfg);

    rows.push_back({task, method, ring, "all",
                    merge_folds(per_fold_included, cfg.eval.merge_mode)});
    for (auto& [group, report] : stratify(included, cfg.eval.stratify_by)) {
        rows.push_back({task, method, ring, group, report});
    }
    return rows;
}

json counters_to_json(const RunCounters& c) {
    json j;
    j["sessions"] = c.sessions;
    j["windows_candidates"] = c.windows_candidates;
    j["windows_gate_dropped"] = c.windows_gate_dropped;
    j["windows"] = c.windows;
    j["pairs"] = c.pairs;
    j["pairs_dropped_missing_reference"] = c.pairs_dropped_missing_reference;
    j["pairs_dropped_sparse_labels"] = c.pairs_dropped_sparse_labels;
    j["pairs_dropped_degenerate"] = c.pairs_dropped_degenerate;
    j["estimates"] = c.estimates;
    j["estimate_failures"] = c.estimate_failures;
    j["estimates_out_of_band"] = c.estimates_out_of_band;
    j["out_of_band_excluded"] = c.out_of_band_excluded;
    j["labels"] = c.labels;
    j["labels_dropped_bounds"] = c.labels_dropped_bounds;
    j["labels_dropped_outside_span"] = c.labels_dropped_outside_span;
    j["signal_rows_dropped_nonfinite"] = c.signal_rows_dropped_nonfinite;
    return j;
}

} // namespace

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(std::max(jobs, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> threads;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (std::thread& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<std::filesystem::path> run_synth(const ExperimentConfig& cfg,
                                             const std::filesystem::path& out_dir) {
    if (!cfg.uses_synth()) {
        throw ConfigError("synth: config has no dataset.synth block");
    }
    std::vector<std::filesystem::path> paths;
    for (const SynthSpec& spec : cfg.synth_specs) {
        const SessionRecord session = generate(spec);
        const auto dir = out_dir / session.session_id;
        write_session(session, dir);
        paths.push_back(dir);
    }
    return paths;
}

RunResult run_experiment(const ExperimentConfig& cfg_in, const RunOptions& opt) {
    ExperimentConfig cfg = cfg_in;
    if (opt.seed_override) cfg.folds.seed = *opt.seed_override;
    if (opt.out_override) cfg.output_dir = *opt.out_override;
    cfg.validate();

    RunResult result;
    result.out_dir = cfg.output_dir;
    RunCounters& counters = result.counters;

    const std::vector<SessionData> sessions = collect_sessions(cfg, opt);
    counters.sessions = sessions.size();
    for (const SessionData& s : sessions) {
        counters.labels += s.stats.labels;
        counters.labels_dropped_bounds += s.stats.labels_dropped_bounds;
        counters.labels_dropped_outside_span += s.stats.labels_dropped_outside_span;
        counters.signal_rows_dropped_nonfinite += s.stats.signal_rows_dropped_nonfinite;
    }

    // Window and pair every session.
    std::vector<LabeledPair> pairs;
    for (const SessionData& s : sessions) {
        const WindowingResult wr = window_session(s.record, cfg.window);
        counters.windows_candidates += wr.candidates;
        counters.windows_gate_dropped += wr.gate_dropped;
        counters.windows += wr.windows.size();

        const PairingResult pr = pair_labels(wr.windows, s.record, cfg.task);
        counters.pairs_dropped_missing_reference += pr.dropped_missing_reference;
        counters.pairs_dropped_sparse_labels += pr.dropped_sparse_labels;
        counters.pairs_dropped_degenerate += pr.dropped_degenerate;
        for (const LabeledPair& p : pr.pairs) pairs.push_back(p);
    }
    counters.pairs = pairs.size();
    if (opt.verbose) {
        std::cerr << "ringkit: " << counters.windows << " windows, " << counters.pairs
                  << " labeled pairs\n";
    }

    // Estimate. Slot i belongs to pair i, so the reduction order is fixed
    // regardless of the worker count.
    std::vector<EstimateSlot> slots(pairs.size());
    std::vector<int> fold_of(pairs.size(), 0);

    if (cfg.method != Method::Ridge) {
        parallel_for(pairs.size(), opt.jobs,
                     [&](std::size_t i) { slots[i] = estimate_physics(cfg, pairs[i]); });
    } else {
        std::vector<std::optional<FeatureVector>> features(pairs.size());
        parallel_for(pairs.size(), opt.jobs, [&](std::size_t i) {
            try {
                features[i] = featurize(pairs[i].window, cfg.channels, cfg.preprocess);
            } catch (const Error& e) {
                slots[i].error = e.what();
            }
        });

        std::vector<std::string> subjects;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            if (features[i]) subjects.push_back(pairs[i].subject_id);
        }
        const FoldPlan plan = make_folds(subjects, cfg.folds.k, cfg.folds.seed);
        for (std::size_t sz : plan.fold_sizes()) result.fold_sizes.push_back(sz);

        const FeatureSchema schema = feature_schema(cfg.channels);
        std::filesystem::create_directories(cfg.output_dir / "models");

        std::vector<std::string> fold_models(static_cast<std::size_t>(cfg.folds.k));
        parallel_for(static_cast<std::size_t>(cfg.folds.k), opt.jobs, [&](std::size_t f) {
            const int test_fold = static_cast<int>(f);
            const int val_fold = (test_fold + 1) % cfg.folds.k;

            std::vector<std::size_t> train_rows;
            std::vector<std::size_t> val_rows;
            std::vector<std::size_t> test_rows;
            for (std::size_t i = 0; i < pairs.size(); ++i) {
                if (!features[i]) continue;
                const int fold = plan.assignments.at(pairs[i].subject_id);
                if (fold == test_fold) {
                    test_rows.push_back(i);
                } else if (fold == val_fold) {
                    val_rows.push_back(i);
                } else {
                    train_rows.push_back(i);
                }
            }
            if (train_rows.size() < 2 || val_rows.empty()) {
                throw DataError("fold " + std::to_string(test_fold) +
                                ": not enough rows to train and validate");
            }

            auto dataset_of = [&](const std::vector<std::size_t>& rows) {
                FeatureDataset d;
                d.schema = schema;
                d.features.resize(static_cast<Eigen::Index>(rows.size()),
                                  static_cast<Eigen::Index>(schema.size()));
                d.targets.resize(static_cast<Eigen::Index>(rows.size()));
                for (std::size_t r = 0; r < rows.size(); ++r) {
                    d.features.row(static_cast<Eigen::Index>(r)) =
                        features[rows[r]]->values.transpose();
                    d.targets[static_cast<Eigen::Index>(r)] = pairs[rows[r]].reference;
                }
                return d;
            };

            const TrainSelection sel = train_with_selection(
                dataset_of(train_rows), dataset_of(val_rows), cfg.training.lambda_grid, cfg.task);
            fold_models[f] = sel.model.to_json_string();

            const ValueBounds bounds = plausibility_bounds(cfg.task);
            for (std::size_t i : test_rows) {
                const double pred = sel.model.predict(features[i]->values);
                slots[i].ok = true;
                slots[i].value = pred;
                slots[i].out_of_band = !bounds.contains(pred);
                fold_of[i] = test_fold;
            }
        });
        for (std::size_t f = 0; f < fold_models.size(); ++f) {
            std::ofstream out(cfg.output_dir / "models" /
                                  ("fold_" + std::to_string(f) + ".json"),
                              std::ios::binary);
            out << fold_models[f];
        }
    }

    // Reduce in pair order.
    const int fold_count = cfg.method == Method::Ridge ? cfg.folds.k : 1;
    std::vector<std::vector<PredPair>> per_fold_included(
        static_cast<std::size_t>(fold_count));
    std::vector<PairsCsvRow> csv_rows;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const EstimateSlot& slot = slots[i];
        if (!slot.ok) {
            ++counters.estimate_failures;
            if (opt.verbose && !slot.error.empty()) {
                std::cerr << "ringkit: window " << pairs[i].session_id << "@"
                          << pairs[i].window.start_ms() << " skipped: " << slot.error << "\n";
            }
            continue;
        }
        ++counters.estimates;
        if (slot.out_of_band) ++counters.estimates_out_of_band;

        ResultPair rp;
        rp.session_id = pairs[i].session_id;
        rp.subject_id = pairs[i].subject_id;
        rp.ring_type = pairs[i].ring_type;
        rp.activity = pairs[i].window.activity();
        rp.window_start_ms = pairs[i].window.start_ms();
        rp.reference = pairs[i].reference;
        rp.estimate = slot.value;
        rp.out_of_band = slot.out_of_band;
        csv_rows.push_back({fold_of[i], rp});

        if (slot.out_of_band && !cfg.eval.include_out_of_band) {
            ++counters.out_of_band_excluded;
            continue;
        }
        per_fold_included[static_cast<std::size_t>(fold_of[i])].push_back(
            {rp.reference, rp.estimate, rp.activity, rp.subject_id});
    }

    result.rows = build_rows(cfg, per_fold_included);

    // Artifacts.
    std::filesystem::create_directories(cfg.output_dir);
    write_report_csv(cfg.output_dir / "report.csv", result.rows);
    {
        std::ofstream out(cfg.output_dir / "report.json", std::ios::binary);
        out << report_rows_to_json(result.rows);
    }
    write_pairs_csv(cfg.output_dir / "pairs.csv", csv_rows);
    {
        json manifest;
        manifest["schema_version"] = 1;
        manifest["tool"] = "ringkit";
        manifest["version"] = kToolVersion;
        manifest["config"] = json::parse(config_to_json_string(cfg));
        manifest["config_hash"] = config_hash(cfg);
        manifest["seed"] = cfg.folds.seed;
        manifest["counts"] = counters_to_json(counters);
        if (!result.fold_sizes.empty()) manifest["fold_sizes"] = result.fold_sizes;
        std::ofstream out(cfg.output_dir / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << "\n";
    }
    if (opt.verbose) {
        std::cerr << "ringkit: wrote " << (cfg.output_dir / "report.csv").string() << "\n";
    }
    return result;
}

void rerender_report(const std::filesystem::path& run_dir,
                     const std::filesystem::path& out_dir) {
    std::ifstream manifest_in(run_dir / "manifest.json");
    if (!manifest_in) {
        throw DataError("report: cannot open " + (run_dir / "manifest.json").string());
    }
    json manifest;
    try {
        manifest = json::parse(manifest_in);
    } catch (const json::exception& e) {
        throw FormatError((run_dir / "manifest.json").string() + ": " + e.what());
    }
    const ExperimentConfig cfg = config_from_json_string(manifest.at("config").dump());

    std::ifstream in(run_dir / "pairs.csv");
    if (!in) {
        throw DataError("report: cannot open " + (run_dir / "pairs.csv").string());
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError((run_dir / "pairs.csv").string() + ":1: missing header");
    }

    const int fold_count = cfg.method == Method::Ridge ? cfg.folds.k : 1;
    std::vector<std::vector<PredPair>> per_fold_included(
        static_cast<std::size_t>(fold_count));
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const auto comma = line.find(',', pos);
            if (comma == std::string::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, comma - pos));
            pos = comma + 1;
        }
        if (fields.size() != 11) {
            throw FormatError((run_dir / "pairs.csv").string() + ":" + std::to_string(line_no) +
                              ": expected 11 fields");
        }
        const int fold = std::stoi(fields[0]);
        const auto activity = activity_from_string(fields[4]);
        if (!activity) {
            throw FormatError((run_dir / "pairs.csv").string() + ":" + std::to_string(line_no) +
                              ": unknown activity");
        }
        const double reference = std::stod(fields[7]);
        const double estimate = std::stod(fields[8]);
        const bool oob = fields[10] == "1";
        if (oob && !cfg.eval.include_out_of_band) continue;
        if (fold < 0 || fold >= fold_count) {
            throw FormatError((run_dir / "pairs.csv").string() + ":" + std::to_string(line_no) +
                              ": fold out of range");
        }
        per_fold_included[static_cast<std::size_t>(fold)].push_back(
            {reference, estimate, *activity, fields[2]});
    }

    const std::vector<ReportRow> rows = build_rows(cfg, per_fold_included);
    std::filesystem::create_directories(out_dir);
    write_report_csv(out_dir / "report.csv", rows);
    std::ofstream out(out_dir / "report.json", std::ios::binary);
    out << report_rows_to_json(rows);
}

} // namespace ringkit
