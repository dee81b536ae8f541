#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <numbers>

#include "ringkit/errors.hpp"
#include "ringkit/ingest.hpp"
#include "ringkit/synth.hpp"

using namespace ringkit;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ringkit_test_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_minimal_session(const fs::path& dir, const std::string& signals,
                           const std::string& labels) {
    fs::create_directories(dir);
    write_file(dir / "session.json",
               R"({"session_id":"s1","subject_id":"p1","ring_type":"reflective",)"
               R"("activities":[{"tag":"sitting","start_ms":0,"end_ms":100000}]})");
    write_file(dir / "signals.csv", "t_ms,channel,value\n" + signals);
    write_file(dir / "labels.csv", "t_ms,kind,value\n" + labels);
}

// A session covering [0, duration_s) at the given signal rate, HR label 72.
SessionRecord grid_session(double duration_s, double rate_hz,
                           ActivityTag tag = ActivityTag::Sitting) {
    SessionRecord s;
    s.session_id = "grid";
    s.subject_id = "p1";
    const auto n = static_cast<Eigen::Index>(duration_s * rate_hz);
    TimeSeries ir;
    ir.channel = Channel::PPG_IR;
    ir.values.resize(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        ir.timestamps_ms.push_back(
            static_cast<std::int64_t>(std::llround(k * 1000.0 / rate_hz)));
        ir.values[k] = std::sin(0.08 * static_cast<double>(k)) + 100.0;
    }
    s.signals.push_back(std::move(ir));
    s.activities.push_back(
        {tag, 0, static_cast<std::int64_t>(std::llround(duration_s * 1000.0))});
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(duration_s) * 1000; t += 1000) {
        s.labels.push_back({VitalKind::HR, t, 72.0});
    }
    return s;
}

} // namespace

TEST_CASE("load_session reads a well formed directory") {
    SynthSpec spec;
    spec.seed = 4;
    const SessionRecord session = generate(spec);
    TempDir tmp;
    write_session(session, tmp.path / "s");
    const LoadResult r = load_session(tmp.path / "s");
    CHECK(r.session.session_id == spec.session_id);
    CHECK(r.session.subject_id == spec.subject_id);
    CHECK(r.session.ring_type == RingType::Reflective);
    CHECK(r.session.signals.size() == 7); // 5 ring channels + 2 references
    CHECK(r.session.activities.size() == 1);
    CHECK(r.stats.labels_dropped_bounds == 0);
    int ring_channels = 0;
    for (const TimeSeries& s : r.session.signals) {
        if (is_ring_input(s.channel)) ++ring_channels;
    }
    CHECK(ring_channels == 5);
}

TEST_CASE("shuffled signal timestamps raise FormatError citing the line") {
    TempDir tmp;
    write_minimal_session(tmp.path / "s", "0,ppg_ir,1\n20,ppg_ir,2\n10,ppg_ir,3\n",
                          "0,hr,72\n");
    try {
        load_session(tmp.path / "s");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        const std::string what = e.what();
        CHECK(what.find("signals.csv:4") != std::string::npos);
    }
}

TEST_CASE("malformed rows raise FormatError") {
    TempDir tmp;
    write_minimal_session(tmp.path / "s", "0,ppg_ir,1\nounce,ppg_ir,2\n", "0,hr,72\n");
    CHECK_THROWS_AS(load_session(tmp.path / "s"), FormatError);
}

TEST_CASE("unknown channel raises FormatError") {
    TempDir tmp;
    write_minimal_session(tmp.path / "s", "0,ppg_green,1\n", "0,hr,72\n");
    CHECK_THROWS_AS(load_session(tmp.path / "s"), FormatError);
}

TEST_CASE("out-of-bounds label is dropped and counted") {
    TempDir tmp;
    write_minimal_session(tmp.path / "s", "0,ppg_ir,1\n10,ppg_ir,2\n",
                          "0,spo2,150\n0,hr,72\n");
    const LoadResult r = load_session(tmp.path / "s");
    CHECK(r.stats.labels_dropped_bounds == 1);
    REQUIRE(r.session.labels.size() == 1);
    CHECK(r.session.labels[0].kind == VitalKind::HR);
}

TEST_CASE("labels outside the signal span are dropped and counted") {
    TempDir tmp;
    write_minimal_session(tmp.path / "s", "0,ppg_ir,1\n10,ppg_ir,2\n",
                          "0,hr,72\n99999,hr,70\n");
    const LoadResult r = load_session(tmp.path / "s");
    CHECK(r.stats.labels_dropped_outside_span == 1);
    CHECK(r.session.labels.size() == 1);
}

TEST_CASE("nonfinite signal values above tolerance raise ValidationError") {
    TempDir tmp;
    std::string rows;
    for (int i = 0; i < 50; ++i) {
        rows += std::to_string(i * 10) + ",ppg_ir," + (i % 10 == 0 ? "nan" : "1.5") + "\n";
    }
    write_minimal_session(tmp.path / "s", rows, "0,hr,72\n");
    CHECK_THROWS_AS(load_session(tmp.path / "s"), ValidationError);
    LoadOptions lenient;
    lenient.tolerance_fraction = 0.5;
    const LoadResult r = load_session(tmp.path / "s", lenient);
    CHECK(r.stats.signal_rows_dropped_nonfinite == 5);
}

TEST_CASE("overlapping activities raise ValidationError") {
    TempDir tmp;
    fs::create_directories(tmp.path / "s");
    write_file(tmp.path / "s" / "session.json",
               R"({"session_id":"s1","subject_id":"p1","ring_type":"reflective",)"
               R"("activities":[{"tag":"sitting","start_ms":0,"end_ms":5000},)"
               R"({"tag":"walking","start_ms":4000,"end_ms":9000}]})");
    write_file(tmp.path / "s" / "signals.csv", "t_ms,channel,value\n0,ppg_ir,1\n");
    write_file(tmp.path / "s" / "labels.csv", "t_ms,kind,value\n0,hr,72\n");
    CHECK_THROWS_AS(load_session(tmp.path / "s"), ValidationError);
}

TEST_CASE("write then load then write reproduces identical CSV bytes") {
    SynthSpec spec;
    spec.seed = 11;
    spec.noise_snr_db = 18.0;
    spec.duration_s = 12.0;
    const SessionRecord session = generate(spec);
    TempDir tmp;
    write_session(session, tmp.path / "a");
    const LoadResult r = load_session(tmp.path / "a");
    write_session(r.session, tmp.path / "b");
    CHECK(read_file(tmp.path / "a" / "signals.csv") == read_file(tmp.path / "b" / "signals.csv"));
    CHECK(read_file(tmp.path / "a" / "labels.csv") == read_file(tmp.path / "b" / "labels.csv"));
    CHECK(read_file(tmp.path / "a" / "session.json") ==
          read_file(tmp.path / "b" / "session.json"));
}

TEST_CASE("windowing tiles activity segments") {
    const SessionRecord s = grid_session(300.0, 100.0);
    const WindowingResult wr = window_session(s);
    CHECK(wr.windows.size() == 10);
    CHECK(wr.candidates == 10);
    CHECK(wr.gate_dropped == 0);
    for (const SignalWindow& w : wr.windows) {
        CHECK(w.activity() == ActivityTag::Sitting);
    }
}

TEST_CASE("a segment shorter than one window yields nothing") {
    const SessionRecord s = grid_session(29.0, 100.0);
    const WindowingResult wr = window_session(s);
    CHECK(wr.windows.empty());
    CHECK(wr.candidates == 0);
}

TEST_CASE("sub-gate sampling drops every candidate window") {
    const SessionRecord s = grid_session(300.0, 90.0);
    const WindowingResult wr = window_session(s);
    CHECK(wr.windows.empty());
    CHECK(wr.gate_dropped == 10);
    CHECK(wr.candidates == 10);
}

TEST_CASE("windows never span activity boundaries") {
    SessionRecord s = grid_session(100.0, 100.0);
    s.activities.clear();
    s.activities.push_back({ActivityTag::Sitting, 0, 45000});
    s.activities.push_back({ActivityTag::Walking, 45000, 100000});
    const WindowingResult wr = window_session(s);
    REQUIRE(wr.windows.size() == 2);
    CHECK(wr.windows[0].activity() == ActivityTag::Sitting);
    CHECK(wr.windows[0].start_ms() == 0);
    CHECK(wr.windows[1].activity() == ActivityTag::Walking);
    CHECK(wr.windows[1].start_ms() == 45000);
}

TEST_CASE("overlapping stride multiplies windows") {
    const SessionRecord s = grid_session(60.0, 100.0);
    WindowParams params;
    params.stride_s = 10.0;
    const WindowingResult wr = window_session(s, params);
    CHECK(wr.windows.size() == 4); // starts at 0, 10, 20, 30
}

TEST_CASE("hr pairing takes the mean of overlapping labels") {
    SessionRecord s = grid_session(30.0, 100.0);
    s.labels.clear();
    for (std::int64_t t = 0; t < 30000; t += 1000) {
        s.labels.push_back({VitalKind::HR, t, t < 15000 ? 70.0 : 74.0});
    }
    const WindowingResult wr = window_session(s);
    REQUIRE(wr.windows.size() == 1);
    const PairingResult pr = pair_labels(wr.windows, s, VitalKind::HR);
    REQUIRE(pr.pairs.size() == 1);
    CHECK(pr.pairs[0].reference == doctest::Approx(72.0));
    CHECK(pr.pairs[0].subject_id == "p1");
    CHECK(pr.pairs[0].scenario == Scenario::Stationary);
}

TEST_CASE("constant labels pair to their value") {
    const SessionRecord s = grid_session(30.0, 100.0);
    const WindowingResult wr = window_session(s);
    const PairingResult pr = pair_labels(wr.windows, s, VitalKind::HR);
    REQUIRE(pr.pairs.size() == 1);
    CHECK(pr.pairs[0].reference == 72.0);
}

TEST_CASE("sparse labels drop the window with a count") {
    SessionRecord s = grid_session(30.0, 100.0);
    s.labels.clear();
    for (std::int64_t t = 0; t < 10000; t += 1000) {
        s.labels.push_back({VitalKind::HR, t, 72.0}); // 10 of 30 expected
    }
    const WindowingResult wr = window_session(s);
    const PairingResult pr = pair_labels(wr.windows, s, VitalKind::HR);
    CHECK(pr.pairs.empty());
    CHECK(pr.dropped_sparse_labels == 1);
}

TEST_CASE("missing labels drop the window with a count") {
    SessionRecord s = grid_session(30.0, 100.0);
    s.labels.clear();
    const WindowingResult wr = window_session(s);
    const PairingResult pr = pair_labels(wr.windows, s, VitalKind::SpO2);
    CHECK(pr.pairs.empty());
    CHECK(pr.dropped_missing_reference == 1);
    CHECK(pr.windows_in == 1);
}

TEST_CASE("bp pairing brackets the activity segment") {
    SessionRecord s = grid_session(30.0, 100.0);
    s.activities.clear();
    s.activities.push_back({ActivityTag::Sitting, 100, 29900});
    s.labels.clear();
    s.labels.push_back({VitalKind::SBP, 0, 110.0});
    s.labels.push_back({VitalKind::DBP, 0, 70.0});
    s.labels.push_back({VitalKind::SBP, 29950, 120.0});
    s.labels.push_back({VitalKind::DBP, 29950, 74.0});

    WindowParams params;
    params.duration_s = 20.0;
    params.stride_s = 20.0;
    const WindowingResult wr = window_session(s, params);
    REQUIRE(wr.windows.size() == 1);

    const PairingResult sbp = pair_labels(wr.windows, s, VitalKind::SBP);
    REQUIRE(sbp.pairs.size() == 1);
    CHECK(sbp.pairs[0].reference == 115.0);
    const PairingResult dbp = pair_labels(wr.windows, s, VitalKind::DBP);
    REQUIRE(dbp.pairs.size() == 1);
    CHECK(dbp.pairs[0].reference == 72.0);
}

TEST_CASE("bp pairing without a bracket drops the window") {
    SessionRecord s = grid_session(30.0, 100.0);
    s.labels.clear();
    s.labels.push_back({VitalKind::SBP, 0, 110.0}); // only the leading measurement
    const WindowingResult wr = window_session(s);
    const PairingResult pr = pair_labels(wr.windows, s, VitalKind::SBP);
    CHECK(pr.pairs.empty());
    CHECK(pr.dropped_missing_reference == 1);
}

TEST_CASE("rr reference from a pure sinusoid is exact") {
    constexpr double kPi = std::numbers::pi;
    Eigen::ArrayXd resp(1500); // 30 s at 50 Hz
    for (Eigen::Index k = 0; k < resp.size(); ++k) {
        resp[k] = std::sin(2.0 * kPi * 0.25 * static_cast<double>(k) / 50.0);
    }
    CHECK(derive_rr_reference(resp, 50.0) == doctest::Approx(15.0).epsilon(1e-6));
}

TEST_CASE("rr reference rejects constant input") {
    CHECK_THROWS_AS(derive_rr_reference(Eigen::ArrayXd::Constant(1500, 3.0), 50.0),
                    DegenerateSignal);
}

TEST_CASE("rr reference requires 10 seconds of data") {
    CHECK_THROWS_AS(derive_rr_reference(Eigen::ArrayXd::Zero(400), 50.0), Error);
}

TEST_CASE("rr pairing uses the respiratory waveform") {
    SynthSpec spec;
    spec.rr_bpm = {{0.0, 12.0}};
    spec.seed = 8;
    const SessionRecord session = generate(spec);
    const WindowingResult wr = window_session(session);
    REQUIRE(wr.windows.size() == 1);
    const PairingResult pr = pair_labels(wr.windows, session, VitalKind::RR);
    REQUIRE(pr.pairs.size() == 1);
    CHECK(pr.pairs[0].reference == doctest::Approx(12.0).epsilon(1.0 / 12.0));
}

TEST_CASE("folds are balanced, deterministic and subject disjoint") {
    std::vector<std::string> ten;
    for (int i = 0; i < 10; ++i) ten.push_back("subj" + std::to_string(i));

    const FoldPlan p1 = make_folds(ten, 5, 42);
    const FoldPlan p2 = make_folds(ten, 5, 42);
    CHECK(p1.assignments == p2.assignments);
    for (std::size_t size : p1.fold_sizes()) {
        CHECK(size == 2);
    }

    const FoldPlan p3 = make_folds(ten, 5, 43);
    CHECK(p1.assignments != p3.assignments); // a different shuffle

    std::vector<std::string> cohort;
    for (int i = 0; i < 34; ++i) cohort.push_back("subj" + std::to_string(i));
    const FoldPlan p4 = make_folds(cohort, 5, 1);
    auto sizes = p4.fold_sizes();
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<std::size_t>{6, 7, 7, 7, 7});

    // Every subject appears in exactly one fold across all rotations.
    std::size_t total = 0;
    for (int f = 0; f < 5; ++f) total += p4.subjects_in_fold(f).size();
    CHECK(total == 34);
}

TEST_CASE("too few subjects is an error") {
    CHECK_THROWS_AS(make_folds({"a", "b"}, 5, 0), TooFewSubjects);
}
