#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ringkit/estimators.hpp"
#include "ringkit/types.hpp"

namespace ringkit {

struct ActivitySegment {
    ActivityTag tag = ActivityTag::Other;
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0; // half-open [start_ms, end_ms)
};

struct LabelSample {
    VitalKind kind = VitalKind::HR;
    std::int64_t t_ms = 0;
    double value = 0.0;
};

/// One subject-session: ring signals, reference waveforms, activity
/// annotation and reference label streams.
struct SessionRecord {
    std::string session_id;
    std::string subject_id;
    RingType ring_type = RingType::Reflective;
    std::vector<TimeSeries> signals;
    std::vector<ActivitySegment> activities;
    std::vector<LabelSample> labels;

    const TimeSeries* find_signal(Channel c) const;
    std::int64_t span_begin_ms() const;
    std::int64_t span_end_ms() const;
};

struct LoadOptions {
    /// ValidationError fires when more than this fraction of signal rows
    /// violate the series invariants.
    double tolerance_fraction = 0.01;
};

struct LoadStats {
    std::size_t signal_rows = 0;
    std::size_t signal_rows_dropped_nonfinite = 0;
    std::size_t labels = 0;
    std::size_t labels_dropped_bounds = 0;
    std::size_t labels_dropped_outside_span = 0;
};

struct LoadResult {
    SessionRecord session;
    LoadStats stats;
};

/// Reads session.json, signals.csv and labels.csv from a session directory.
LoadResult load_session(const std::filesystem::path& dir, const LoadOptions& options = {});

/// Writes the canonical on-disk form of a session. Loading the result and
/// writing it again reproduces identical bytes.
void write_session(const SessionRecord& session, const std::filesystem::path& dir);

// ─── Windowing ───────────────────────────────────────────────────────────────

struct WindowParams {
    double duration_s = SignalWindow::kDefaultDurationS;
    double rate_hz = SignalWindow::kDefaultRateHz;
    double stride_s = SignalWindow::kDefaultDurationS;
    double gate_hz = SignalWindow::kDefaultGateHz;
};

struct WindowingResult {
    std::vector<SignalWindow> windows;
    std::size_t candidates = 0;
    std::size_t gate_dropped = 0;
};

/// Tiles windows inside each activity segment (never across a boundary) and
/// resamples each ring channel onto the uniform grid. Windows whose source
/// falls below the rate gate are dropped and counted.
WindowingResult window_session(const SessionRecord& s, const WindowParams& params = {});

// ─── Label pairing ───────────────────────────────────────────────────────────

struct LabeledPair {
    SignalWindow window;
    VitalKind kind = VitalKind::HR;
    double reference = 0.0;
    std::string subject_id;
    Scenario scenario = Scenario::Stationary;
    std::string session_id;
    RingType ring_type = RingType::Reflective;
};

struct PairingOptions {
    /// Keep a window only if at least this fraction of the expected 1 Hz
    /// label samples overlap it (HR and SpO2 tasks).
    double min_label_fraction = 0.5;
    /// Minimum respiratory-waveform coverage needed to derive an RR
    /// reference.
    double min_resp_coverage_s = 10.0;
};

struct PairingResult {
    std::vector<LabeledPair> pairs;
    std::size_t windows_in = 0;
    std::size_t dropped_missing_reference = 0;
    std::size_t dropped_sparse_labels = 0;
    std::size_t dropped_degenerate = 0;
};

/// Pairs each window with its reference value: HR/SpO2 use the mean of
/// overlapping 1 Hz labels, RR is derived from the overlapping respiratory
/// waveform, and SBP/DBP use the mean of the measurements bracketing the
/// window's activity segment.
PairingResult pair_labels(const std::vector<SignalWindow>& windows, const SessionRecord& s,
                          VitalKind kind, const PairingOptions& options = {});

/// Breaths/min from a uniform respiratory segment: band-pass 0.1-0.5 Hz,
/// detect peaks, convert the mean inter-peak interval to a rate.
double derive_rr_reference(const Eigen::ArrayXd& resp, double rate_hz);

// ─── Folds ───────────────────────────────────────────────────────────────────

/// Subject-disjoint fold assignment; sizes differ by at most one subject.
struct FoldPlan {
    int k = 5;
    std::map<std::string, int> assignments;

    std::vector<std::string> subjects_in_fold(int fold) const;
    std::vector<std::size_t> fold_sizes() const;
    void validate() const;
};

/// Deterministic for a fixed seed.
FoldPlan make_folds(std::vector<std::string> subjects, int k, std::uint64_t seed);

} // namespace ringkit
