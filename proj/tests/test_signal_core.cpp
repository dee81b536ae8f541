#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "ringkit/types.hpp"

using namespace ringkit;

namespace {

TimeSeries make_series(Channel ch, std::vector<std::int64_t> ts, std::vector<double> values) {
    TimeSeries s;
    s.channel = ch;
    s.timestamps_ms = std::move(ts);
    s.values = Eigen::Map<const Eigen::ArrayXd>(values.data(),
                                                static_cast<Eigen::Index>(values.size()));
    return s;
}

// Uniform series at the given rate covering [0, duration_s).
TimeSeries uniform_series(Channel ch, double rate_hz, double duration_s, double value = 1.0) {
    const auto n = static_cast<std::size_t>(duration_s * rate_hz);
    std::vector<std::int64_t> ts(n);
    std::vector<double> vs(n, value);
    for (std::size_t k = 0; k < n; ++k) {
        ts[k] = static_cast<std::int64_t>(std::llround(k * 1000.0 / rate_hz));
        vs[k] = std::sin(0.01 * static_cast<double>(k));
    }
    return make_series(ch, std::move(ts), std::move(vs));
}

} // namespace

TEST_CASE("validate_series accepts a well formed series") {
    const TimeSeries s = make_series(Channel::PPG_IR, {0, 10, 20}, {1.0, 2.0, 3.0});
    CHECK(validate_series(s).empty());
}

TEST_CASE("validate_series reports a repeated timestamp") {
    const TimeSeries s = make_series(Channel::PPG_IR, {0, 10, 10}, {1.0, 2.0, 3.0});
    const auto violations = validate_series(s);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].kind == Violation::Kind::NonMonotone);
    CHECK(violations[0].index == 2);
}

TEST_CASE("validate_series reports a NaN value with its index") {
    std::vector<double> values(10, 1.0);
    values[5] = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::int64_t> ts(10);
    for (int i = 0; i < 10; ++i) ts[static_cast<std::size_t>(i)] = i * 10;
    const TimeSeries s = make_series(Channel::PPG_IR, std::move(ts), std::move(values));
    const auto violations = validate_series(s);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].kind == Violation::Kind::NonFinite);
    CHECK(violations[0].index == 5);
}

TEST_CASE("validate_series reports length mismatch") {
    TimeSeries s;
    s.channel = Channel::ACC_X;
    s.timestamps_ms = {0, 10};
    s.values = Eigen::ArrayXd::Zero(3);
    const auto violations = validate_series(s);
    REQUIRE(violations.size() == 1);
    CHECK(violations[0].kind == Violation::Kind::LengthMismatch);
}

TEST_CASE("scenario mapping is total and matches the partition") {
    CHECK(scenario_of(ActivityTag::Sitting) == Scenario::Stationary);
    CHECK(scenario_of(ActivityTag::Talking) == Scenario::Stationary);
    CHECK(scenario_of(ActivityTag::ShakingHead) == Scenario::Stationary);
    CHECK(scenario_of(ActivityTag::Standing) == Scenario::Stationary);
    CHECK(scenario_of(ActivityTag::LowOxygen) == Scenario::Stationary);
    CHECK(scenario_of(ActivityTag::Walking) == Scenario::Motion);
    CHECK(scenario_of(ActivityTag::DeepSquat) == Scenario::Motion);
    CHECK(scenario_of(ActivityTag::Other) == Scenario::Stationary);
}

TEST_CASE("channel and vital round trip through their names") {
    for (Channel c : kAllChannels) {
        CHECK(channel_from_string(to_string(c)) == c);
    }
    for (VitalKind k : kAllVitalKinds) {
        CHECK(vital_from_string(to_string(k)) == k);
    }
    CHECK(!channel_from_string("nope"));
}

TEST_CASE("plausibility bounds vet labels") {
    CHECK(plausibility_bounds(VitalKind::HR).contains(80.0));
    CHECK(!plausibility_bounds(VitalKind::SpO2).contains(150.0));
    CHECK(plausibility_bounds(VitalKind::SpO2).contains(78.97));
    CHECK(plausibility_bounds(VitalKind::HR).contains(26.03));
    CHECK(plausibility_bounds(VitalKind::HR).contains(125.93));
    CHECK(!plausibility_bounds(VitalKind::DBP).contains(130.0));
}

TEST_CASE("window construction is gated on the effective source rate") {
    const TimeSeries ok = uniform_series(Channel::PPG_IR, 100.0, 30.0);
    const TimeSeries slow = uniform_series(Channel::PPG_RED, 90.0, 30.0);

    SUBCASE("a 100 Hz source passes the default gate") {
        const auto w = SignalWindow::from_series(0, 30.0, 100.0, {&ok}, ActivityTag::Sitting);
        REQUIRE(w.has_value());
        CHECK(w->samples_per_channel() == 3000);
        CHECK(w->has(Channel::PPG_IR));
    }
    SUBCASE("a 90 Hz source cannot produce a window") {
        // Sweep the gate property across sub-gate rates.
        for (double rate : {40.0, 60.0, 80.0, 90.0, 94.9}) {
            const TimeSeries s = uniform_series(Channel::PPG_IR, rate, 30.0);
            CHECK(!SignalWindow::from_series(0, 30.0, 100.0, {&s}, ActivityTag::Sitting)
                       .has_value());
        }
    }
    SUBCASE("one sub-gate channel rejects the whole window") {
        CHECK(!SignalWindow::from_series(0, 30.0, 100.0, {&ok, &slow}, ActivityTag::Sitting)
                   .has_value());
    }
    SUBCASE("reference channels are never window inputs") {
        const TimeSeries resp = uniform_series(Channel::RESP_REF, 100.0, 30.0);
        const auto w =
            SignalWindow::from_series(0, 30.0, 100.0, {&ok, &resp}, ActivityTag::Sitting);
        REQUIRE(w.has_value());
        CHECK(!w->has(Channel::RESP_REF));
    }
}

TEST_CASE("from_uniform enforces the exact sample count") {
    std::map<Channel, Eigen::ArrayXd> chans;
    chans[Channel::PPG_IR] = Eigen::ArrayXd::Zero(2999);
    CHECK_THROWS_AS(SignalWindow::from_uniform(0, 30.0, 100.0, chans, ActivityTag::Sitting),
                    Error);
    chans[Channel::PPG_IR] = Eigen::ArrayXd::Zero(3000);
    CHECK_NOTHROW(SignalWindow::from_uniform(0, 30.0, 100.0, chans, ActivityTag::Sitting));
}

TEST_CASE("interpolation is exact on grid points and linear between them") {
    const TimeSeries s = make_series(Channel::PPG_IR, {0, 10, 20}, {1.0, 3.0, 5.0});
    CHECK(interp_at(s.timestamps_ms, s.values, 10.0) == 3.0);
    CHECK(interp_at(s.timestamps_ms, s.values, 5.0) == doctest::Approx(2.0));
    CHECK(interp_at(s.timestamps_ms, s.values, -5.0) == 1.0);  // clamped
    CHECK(interp_at(s.timestamps_ms, s.values, 100.0) == 5.0); // clamped
}
