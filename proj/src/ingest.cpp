#include "ringkit/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "ringkit/errors.hpp"
#include "ringkit/estimators.hpp"
#include "ringkit/preprocess.hpp"

namespace ringkit {

namespace {

using json = nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc{}) return "0";
    return std::string(buf, end);
}

struct CsvRow {
    std::size_t line_no = 0;
    std::vector<std::string_view> fields;
};

class CsvReader {
public:
    CsvReader(const std::filesystem::path& path, std::string_view expected_header)
        : path_(path.string()), in_(path) {
        if (!in_) {
            throw FormatError(path_ + ": cannot open");
        }
        std::string header;
        if (!std::getline(in_, header)) {
            throw FormatError(path_ + ":1: missing header");
        }
        if (!header.empty() && header.back() == '\r') header.pop_back();
        if (header != expected_header) {
            throw FormatError(path_ + ":1: expected header '" + std::string(expected_header) +
                              "', got '" + header + "'");
        }
        line_no_ = 1;
    }

    bool next(CsvRow& row) {
        if (!std::getline(in_, line_)) return false;
        ++line_no_;
        if (!line_.empty() && line_.back() == '\r') line_.pop_back();
        row.line_no = line_no_;
        row.fields.clear();
        std::string_view rest = line_;
        while (true) {
            const auto pos = rest.find(',');
            if (pos == std::string_view::npos) {
                row.fields.push_back(rest);
                break;
            }
            row.fields.push_back(rest.substr(0, pos));
            rest.remove_prefix(pos + 1);
        }
        return true;
    }

    [[noreturn]] void fail(std::size_t line_no, const std::string& what) const {
        throw FormatError(path_ + ":" + std::to_string(line_no) + ": " + what);
    }

private:
    std::string path_;
    std::ifstream in_;
    std::string line_;
    std::size_t line_no_ = 0;
};

std::int64_t parse_i64(const CsvReader& r, const CsvRow& row, std::string_view field,
                       const char* what) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        const_cast<CsvReader&>(r).fail(row.line_no,
                                       std::string("bad ") + what + " '" + std::string(field) +
                                           "'");
    }
    return v;
}

double parse_f64(const CsvReader& r, const CsvRow& row, std::string_view field,
                 const char* what) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        const_cast<CsvReader&>(r).fail(row.line_no,
                                       std::string("bad ") + what + " '" + std::string(field) +
                                           "'");
    }
    return v;
}

const ActivitySegment* segment_containing(const SessionRecord& s, std::int64_t start_ms) {
    for (const ActivitySegment& seg : s.activities) {
        if (start_ms >= seg.start_ms && start_ms < seg.end_ms) return &seg;
    }
    return nullptr;
}

} // namespace

const TimeSeries* SessionRecord::find_signal(Channel c) const {
    for (const TimeSeries& s : signals) {
        if (s.channel == c) return &s;
    }
    return nullptr;
}

std::int64_t SessionRecord::span_begin_ms() const {
    std::int64_t lo = std::numeric_limits<std::int64_t>::max();
    for (const TimeSeries& s : signals) {
        if (!s.empty()) lo = std::min(lo, s.timestamps_ms.front());
    }
    return lo == std::numeric_limits<std::int64_t>::max() ? 0 : lo;
}

std::int64_t SessionRecord::span_end_ms() const {
    std::int64_t hi = std::numeric_limits<std::int64_t>::min();
    for (const TimeSeries& s : signals) {
        if (!s.empty()) hi = std::max(hi, s.timestamps_ms.back());
    }
    return hi == std::numeric_limits<std::int64_t>::min() ? 0 : hi;
}

LoadResult load_session(const std::filesystem::path& dir, const LoadOptions& options) {
    LoadResult out;
    SessionRecord& session = out.session;
    LoadStats& stats = out.stats;

    // session.json
    const auto meta_path = dir / "session.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) {
        throw FormatError(meta_path.string() + ": cannot open");
    }
    json meta;
    try {
        meta = json::parse(meta_in);
    } catch (const json::exception& e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    }
    try {
        session.session_id = meta.at("session_id").get<std::string>();
        session.subject_id = meta.at("subject_id").get<std::string>();
        const auto ring = meta.at("ring_type").get<std::string>();
        const auto rt = ring_type_from_string(ring);
        if (!rt) {
            throw FormatError(meta_path.string() + ": unknown ring_type '" + ring + "'");
        }
        session.ring_type = *rt;
        for (const json& a : meta.at("activities")) {
            const auto tag_name = a.at("tag").get<std::string>();
            const auto tag = activity_from_string(tag_name);
            if (!tag) {
                throw FormatError(meta_path.string() + ": unknown activity tag '" + tag_name +
                                  "'");
            }
            session.activities.push_back(
                {*tag, a.at("start_ms").get<std::int64_t>(), a.at("end_ms").get<std::int64_t>()});
        }
    } catch (const json::exception& e) {
        throw FormatError(meta_path.string() + ": " + e.what());
    }

    std::sort(session.activities.begin(), session.activities.end(),
              [](const ActivitySegment& a, const ActivitySegment& b) {
                  return a.start_ms < b.start_ms;
              });
    for (std::size_t i = 0; i + 1 < session.activities.size(); ++i) {
        if (session.activities[i].end_ms > session.activities[i + 1].start_ms) {
            throw ValidationError(meta_path.string() + ": activity intervals overlap near " +
                                  std::to_string(session.activities[i + 1].start_ms) + " ms");
        }
    }

    // signals.csv
    const auto signals_path = dir / "signals.csv";
    {
        CsvReader reader(signals_path, "t_ms,channel,value");
        std::map<Channel, TimeSeries> series;
        std::map<Channel, std::vector<double>> values;
        CsvRow row;
        while (reader.next(row)) {
            if (row.fields.size() != 3) {
                reader.fail(row.line_no, "expected 3 fields");
            }
            const auto ch = channel_from_string(row.fields[1]);
            if (!ch) {
                reader.fail(row.line_no, "unknown channel '" + std::string(row.fields[1]) + "'");
            }
            const std::int64_t t = parse_i64(reader, row, row.fields[0], "timestamp");
            const double v = parse_f64(reader, row, row.fields[2], "value");
            ++stats.signal_rows;

            TimeSeries& ts = series[*ch];
            ts.channel = *ch;
            if (!ts.timestamps_ms.empty() && t <= ts.timestamps_ms.back()) {
                reader.fail(row.line_no, "timestamp " + std::to_string(t) +
                                             " not increasing for channel " +
                                             std::string(to_string(*ch)));
            }
            if (!std::isfinite(v)) {
                ++stats.signal_rows_dropped_nonfinite;
                continue;
            }
            ts.timestamps_ms.push_back(t);
            values[*ch].push_back(v);
        }
        if (stats.signal_rows > 0 &&
            static_cast<double>(stats.signal_rows_dropped_nonfinite) /
                    static_cast<double>(stats.signal_rows) >
                options.tolerance_fraction) {
            throw ValidationError(signals_path.string() + ": " +
                                  std::to_string(stats.signal_rows_dropped_nonfinite) + " of " +
                                  std::to_string(stats.signal_rows) +
                                  " rows violate invariants, above tolerance");
        }
        for (auto& [ch, ts] : series) {
            const auto& vs = values[ch];
            ts.values = Eigen::Map<const Eigen::ArrayXd>(vs.data(),
                                                         static_cast<Eigen::Index>(vs.size()));
            session.signals.push_back(std::move(ts));
        }
    }

    // labels.csv
    const auto labels_path = dir / "labels.csv";
    {
        CsvReader reader(labels_path, "t_ms,kind,value");
        const std::int64_t span_lo = session.span_begin_ms();
        const std::int64_t span_hi = session.span_end_ms();
        CsvRow row;
        while (reader.next(row)) {
            if (row.fields.size() != 3) {
                reader.fail(row.line_no, "expected 3 fields");
            }
            const auto kind = vital_from_string(row.fields[1]);
            if (!kind) {
                reader.fail(row.line_no, "unknown label kind '" + std::string(row.fields[1]) +
                                             "'");
            }
            const std::int64_t t = parse_i64(reader, row, row.fields[0], "timestamp");
            const double v = parse_f64(reader, row, row.fields[2], "value");
            ++stats.labels;
            if (!std::isfinite(v) || !plausibility_bounds(*kind).contains(v)) {
                ++stats.labels_dropped_bounds;
                continue;
            }
            if (t < span_lo || t > span_hi) {
                ++stats.labels_dropped_outside_span;
                continue;
            }
            session.labels.push_back({*kind, t, v});
        }
        std::stable_sort(session.labels.begin(), session.labels.end(),
                         [](const LabelSample& a, const LabelSample& b) {
                             if (a.t_ms != b.t_ms) return a.t_ms < b.t_ms;
                             return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                         });
    }

    return out;
}

void write_session(const SessionRecord& session, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        json meta;
        meta["session_id"] = session.session_id;
        meta["subject_id"] = session.subject_id;
        meta["ring_type"] = std::string(to_string(session.ring_type));
        json acts = json::array();
        std::vector<ActivitySegment> sorted = session.activities;
        std::sort(sorted.begin(), sorted.end(),
                  [](const ActivitySegment& a, const ActivitySegment& b) {
                      return a.start_ms < b.start_ms;
                  });
        for (const ActivitySegment& seg : sorted) {
            acts.push_back({{"tag", std::string(to_string(seg.tag))},
                            {"start_ms", seg.start_ms},
                            {"end_ms", seg.end_ms}});
        }
        meta["activities"] = std::move(acts);
        std::ofstream out(dir / "session.json", std::ios::binary);
        out << meta.dump(2) << "\n";
    }

    {
        // Canonical row order: timestamp, then channel rank.
        struct Row {
            std::int64_t t;
            int ch_rank;
            const TimeSeries* series;
            std::size_t idx;
        };
        std::vector<Row> rows;
        for (const TimeSeries& s : session.signals) {
            int rank = 0;
            for (Channel c : kAllChannels) {
                if (c == s.channel) break;
                ++rank;
            }
            for (std::size_t i = 0; i < s.size(); ++i) {
                rows.push_back({s.timestamps_ms[i], rank, &s, i});
            }
        }
        std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
            if (a.t != b.t) return a.t < b.t;
            return a.ch_rank < b.ch_rank;
        });
        std::ofstream out(dir / "signals.csv", std::ios::binary);
        out << "t_ms,channel,value\n";
        for (const Row& r : rows) {
            out << r.t << ',' << to_string(r.series->channel) << ','
                << format_double(r.series->values[static_cast<Eigen::Index>(r.idx)]) << '\n';
        }
    }

    {
        std::vector<LabelSample> sorted = session.labels;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const LabelSample& a, const LabelSample& b) {
                             if (a.t_ms != b.t_ms) return a.t_ms < b.t_ms;
                             return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                         });
        std::ofstream out(dir / "labels.csv", std::ios::binary);
        out << "t_ms,kind,value\n";
        for (const LabelSample& l : sorted) {
            out << l.t_ms << ',' << to_string(l.kind) << ',' << format_double(l.value) << '\n';
        }
    }
}

WindowingResult window_session(const SessionRecord& s, const WindowParams& params) {
    if (!(params.duration_s > 0.0) || !(params.stride_s > 0.0)) {
        throw Error("window_session: duration and stride must be positive");
    }
    WindowingResult out;
    const auto duration_ms = static_cast<std::int64_t>(std::llround(params.duration_s * 1000.0));
    const auto stride_ms = static_cast<std::int64_t>(std::llround(params.stride_s * 1000.0));

    std::vector<const TimeSeries*> ring_sources;
    for (const TimeSeries& ts : s.signals) {
        if (is_ring_input(ts.channel)) ring_sources.push_back(&ts);
    }
    if (ring_sources.empty()) return out;

    for (const ActivitySegment& seg : s.activities) {
        for (std::int64_t start = seg.start_ms; start + duration_ms <= seg.end_ms;
             start += stride_ms) {
            ++out.candidates;
            auto w = SignalWindow::from_series(start, params.duration_s, params.rate_hz,
                                               ring_sources, seg.tag, params.gate_hz);
            if (w) {
                out.windows.push_back(std::move(*w));
            } else {
                ++out.gate_dropped;
            }
        }
    }
    return out;
}

double derive_rr_reference(const Eigen::ArrayXd& resp, double rate_hz) {
    const double span_s = static_cast<double>(resp.size()) / rate_hz;
    if (span_s < 10.0) {
        throw Error("derive_rr_reference: segment shorter than 10 s");
    }
    if (resp.maxCoeff() == resp.minCoeff()) {
        throw DegenerateSignal("derive_rr_reference: constant respiratory signal");
    }
    const RateBand band = rr_band();
    const Eigen::ArrayXd filtered = bandpass(resp, rate_hz, band.filter);
    const std::vector<Eigen::Index> peaks = detect_peaks(filtered, rate_hz, band);
    if (peaks.size() < 3) {
        return 60.0 * static_cast<double>(peaks.size()) / span_s;
    }
    const double first_s = static_cast<double>(peaks.front()) / rate_hz;
    const double last_s = static_cast<double>(peaks.back()) / rate_hz;
    return 60.0 * static_cast<double>(peaks.size() - 1) / (last_s - first_s);
}

namespace {

// Mean of the 1 Hz label samples of `kind` overlapping [start, end); nullopt
// when coverage is below the required fraction.
std::optional<double> mean_label_reference(const SessionRecord& s, VitalKind kind,
                                           std::int64_t start_ms, std::int64_t end_ms,
                                           double duration_s, double min_fraction,
                                           bool& sparse) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const LabelSample& l : s.labels) {
        if (l.kind != kind) continue;
        if (l.t_ms >= start_ms && l.t_ms < end_ms) {
            sum += l.value;
            ++count;
        }
    }
    sparse = false;
    if (count == 0) return std::nullopt;
    const double expected = std::max(1.0, std::floor(duration_s));
    if (static_cast<double>(count) < min_fraction * expected) {
        sparse = true;
        return std::nullopt;
    }
    return sum / static_cast<double>(count);
}

// Mean of the BP measurements bracketing the activity segment: the latest
// label at or before the segment start and the earliest at or after its end.
std::optional<double> bracketing_bp_reference(const SessionRecord& s, VitalKind kind,
                                              const ActivitySegment& seg) {
    std::optional<double> before;
    std::optional<double> after;
    for (const LabelSample& l : s.labels) {
        if (l.kind != kind) continue;
        if (l.t_ms <= seg.start_ms) before = l.value; // labels are time-sorted
        if (l.t_ms >= seg.end_ms && !after) after = l.value;
    }
    if (!before || !after) return std::nullopt;
    return 0.5 * (*before + *after);
}

// Respiratory waveform overlapping the window, resampled onto a uniform
// 50 Hz grid.
std::optional<double> resp_rr_reference(const SessionRecord& s, std::int64_t start_ms,
                                        std::int64_t end_ms, double min_coverage_s,
                                        bool& degenerate) {
    degenerate = false;
    const TimeSeries* resp = s.find_signal(Channel::RESP_REF);
    if (resp == nullptr || resp->size() < 2) return std::nullopt;

    auto lo = std::lower_bound(resp->timestamps_ms.begin(), resp->timestamps_ms.end(), start_ms);
    auto hi = std::lower_bound(resp->timestamps_ms.begin(), resp->timestamps_ms.end(), end_ms);
    if (hi - lo < 2) return std::nullopt;
    const double coverage_s =
        static_cast<double>(*(hi - 1) - *lo) / 1000.0;
    if (coverage_s < min_coverage_s) return std::nullopt;

    const double grid_hz = 50.0;
    const auto n = static_cast<Eigen::Index>(
        std::floor(static_cast<double>(end_ms - start_ms) / 1000.0 * grid_hz));
    Eigen::ArrayXd uniform(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        uniform[k] = interp_at(resp->timestamps_ms, resp->values,
                               static_cast<double>(start_ms) +
                                   static_cast<double>(k) * 1000.0 / grid_hz);
    }
    try {
        return derive_rr_reference(uniform, grid_hz);
    } catch (const DegenerateSignal&) {
        degenerate = true;
        return std::nullopt;
    }
}

} // namespace

PairingResult pair_labels(const std::vector<SignalWindow>& windows, const SessionRecord& s,
                          VitalKind kind, const PairingOptions& options) {
    PairingResult out;
    out.windows_in = windows.size();

    for (const SignalWindow& w : windows) {
        const auto start = w.start_ms();
        const auto end = start + static_cast<std::int64_t>(std::llround(w.duration_s() * 1000.0));
        std::optional<double> reference;

        switch (kind) {
        case VitalKind::HR:
        case VitalKind::SpO2: {
            bool sparse = false;
            reference = mean_label_reference(s, kind, start, end, w.duration_s(),
                                             options.min_label_fraction, sparse);
            if (!reference && sparse) {
                ++out.dropped_sparse_labels;
                continue;
            }
            break;
        }
        case VitalKind::RR: {
            bool degenerate = false;
            reference = resp_rr_reference(s, start, end, options.min_resp_coverage_s, degenerate);
            if (!reference && degenerate) {
                ++out.dropped_degenerate;
                continue;
            }
            break;
        }
        case VitalKind::SBP:
        case VitalKind::DBP: {
            const ActivitySegment* seg = segment_containing(s, start);
            if (seg != nullptr) {
                reference = bracketing_bp_reference(s, kind, *seg);
            }
            break;
        }
        }

        if (!reference) {
            ++out.dropped_missing_reference;
            continue;
        }
        out.pairs.push_back({w, kind, *reference, s.subject_id, w.scenario(), s.session_id,
                             s.ring_type});
    }
    return out;
}

std::vector<std::string> FoldPlan::subjects_in_fold(int fold) const {
    std::vector<std::string> out;
    for (const auto& [subject, f] : assignments) {
        if (f == fold) out.push_back(subject);
    }
    return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (const auto& [subject, f] : assignments) {
        sizes[static_cast<std::size_t>(f)] += 1;
    }
    return sizes;
}

void FoldPlan::validate() const {
    if (k < 1) throw Error("FoldPlan: k must be positive");
    const auto sizes = fold_sizes();
    std::size_t lo = assignments.size();
    std::size_t hi = 0;
    for (std::size_t s : sizes) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    if (hi > lo + 1) {
        throw Error("FoldPlan: fold sizes differ by more than one subject");
    }
}

FoldPlan make_folds(std::vector<std::string> subjects, int k, std::uint64_t seed) {
    std::sort(subjects.begin(), subjects.end());
    subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
    if (k < 1 || static_cast<std::size_t>(k) > subjects.size()) {
        throw TooFewSubjects("make_folds: need at least " + std::to_string(k) +
                             " subjects, have " + std::to_string(subjects.size()));
    }
    std::mt19937_64 rng(seed);
    std::shuffle(subjects.begin(), subjects.end(), rng);

    FoldPlan plan;
    plan.k = k;
    for (std::size_t i = 0; i < subjects.size(); ++i) {
        plan.assignments[subjects[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
    plan.validate();
    return plan;
}

} // namespace ringkit
