#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "ringkit/errors.hpp"
#include "ringkit/estimators.hpp"
#include "ringkit/synth.hpp"

using namespace ringkit;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::ArrayXd sine(double freq_hz, double rate_hz, double duration_s, double amp = 1.0,
                    double phase = 0.0) {
    const auto n = static_cast<Eigen::Index>(duration_s * rate_hz);
    Eigen::ArrayXd x(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        x[k] = amp * std::sin(2.0 * kPi * freq_hz * static_cast<double>(k) / rate_hz + phase);
    }
    return x;
}

} // namespace

TEST_CASE("detect_peaks counts cycles of a clean sine") {
    const auto peaks = detect_peaks(sine(1.25, 100.0, 30.0), 100.0, hr_band());
    CHECK(peaks.size() >= 37);
    CHECK(peaks.size() <= 38);
    for (std::size_t i = 1; i < peaks.size(); ++i) {
        CHECK(peaks[i] > peaks[i - 1]);
    }
}

TEST_CASE("detect_peaks rejects a constant signal") {
    CHECK_THROWS_AS(detect_peaks(Eigen::ArrayXd::Constant(3000, 2.0), 100.0, hr_band()),
                    DegenerateSignal);
}

TEST_CASE("detect_peaks rejects dicrotic notches on a synthetic pulse train") {
    SynthSpec spec;
    spec.hr_bpm = {{0.0, 75.0}};
    spec.notch_amp = 0.2;
    spec.seed = 21;
    const SessionRecord session = generate(spec);
    const WindowingResult wr = window_session(session);
    REQUIRE(wr.windows.size() == 1);
    const Eigen::ArrayXd filtered =
        bandpass(wr.windows[0].samples(Channel::PPG_IR), 100.0, hr_band().filter);
    const auto peaks = detect_peaks(filtered, 100.0, hr_band());
    // 75 beats/min over 30 s is 37.5 cycles.
    CHECK(peaks.size() >= 37);
    CHECK(peaks.size() <= 38);
}

TEST_CASE("rate_from_peaks applies the counting rule") {
    std::vector<Eigen::Index> peaks(40);
    const RateEstimate r = rate_from_peaks(peaks, 30.0, hr_band());
    CHECK(r.per_min == 80.0);
    CHECK(!r.out_of_band);

    const RateEstimate zero = rate_from_peaks({}, 30.0, hr_band());
    CHECK(zero.per_min == 0.0);
    CHECK(zero.out_of_band);

    std::vector<Eigen::Index> nine(9);
    const RateEstimate rr = rate_from_peaks(nine, 30.0, rr_band());
    CHECK(rr.per_min == 18.0);
    CHECK(!rr.out_of_band);
}

TEST_CASE("peak pipeline tracks a sine across the band") {
    // Sweep in 0.05 Hz steps; the counting rule is exact to one cycle.
    for (double f = 0.55; f <= 2.95; f += 0.05) {
        const Eigen::ArrayXd x = sine(f, 100.0, 30.0);
        const auto peaks = detect_peaks(x, 100.0, hr_band());
        const RateEstimate est = rate_from_peaks(peaks, 30.0, hr_band());
        CHECK(std::abs(est.per_min - 60.0 * f) <= 60.0 / 30.0 + 1e-9);
    }
    for (double f = 0.12; f <= 0.49; f += 0.05) {
        const Eigen::ArrayXd x = sine(f, 100.0, 30.0);
        const auto peaks = detect_peaks(x, 100.0, rr_band());
        const RateEstimate est = rate_from_peaks(peaks, 30.0, rr_band());
        CHECK(std::abs(est.per_min - 60.0 * f) <= 60.0 / 30.0 + 1e-9);
    }
}

TEST_CASE("rate_from_spectrum picks the band argmax") {
    const SpectrumEstimate spec = welch_psd(sine(1.5, 100.0, 30.0), 100.0);
    const RateEstimate est = rate_from_spectrum(spec, hr_band());
    CHECK(est.per_min == doctest::Approx(90.0).epsilon(1.0 / 90.0));
}

TEST_CASE("rate_from_spectrum works in the respiratory band") {
    const SpectrumEstimate spec = welch_psd(sine(0.3, 100.0, 30.0), 100.0);
    const RateEstimate est = rate_from_spectrum(spec, rr_band());
    CHECK(est.per_min == doctest::Approx(18.0).epsilon(0.6 / 18.0));
}

TEST_CASE("rate_from_spectrum prefers the stronger of two tones") {
    const Eigen::ArrayXd x =
        sine(1.0, 100.0, 30.0, 1.0) + sine(2.0, 100.0, 30.0, std::sqrt(0.5));
    const SpectrumEstimate spec = welch_psd(x, 100.0);
    const RateEstimate est = rate_from_spectrum(spec, hr_band());
    CHECK(est.per_min == doctest::Approx(60.0).epsilon(0.02));
    // The dense DFT oracle agrees.
    const double oracle = brute_force_dft_argmax(x, 100.0, 0.5, 3.0);
    CHECK(oracle == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("rate_from_spectrum reports an empty band") {
    SpectrumEstimate spec;
    spec.freqs_hz = Eigen::ArrayXd::LinSpaced(5, 10.0, 20.0);
    spec.power = Eigen::ArrayXd::Ones(5);
    CHECK_THROWS_AS(rate_from_spectrum(spec, hr_band()), EmptyBand);
}

TEST_CASE("spectral estimator matches the dense DFT oracle on seeded tones") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const bool hr = trial % 2 == 0;
        const RateBand band = hr ? hr_band() : rr_band();
        std::uniform_real_distribution<double> freq(band.min_per_min / 60.0 * 1.05,
                                                    band.max_per_min / 60.0 * 0.95);
        std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
        const double f = freq(rng);
        const Eigen::ArrayXd x = sine(f, 100.0, 30.0, 1.0, phase(rng));

        const SpectrumEstimate spec = welch_psd(x, 100.0);
        const RateEstimate est = rate_from_spectrum(spec, band);
        const double oracle =
            brute_force_dft_argmax(x, 100.0, band.min_per_min / 60.0, band.max_per_min / 60.0);
        CHECK(std::abs(est.per_min / 60.0 - oracle) <= spec.df());
    }
}

TEST_CASE("ac_dc splits a tone riding on a level") {
    const Eigen::ArrayXd x = 1000.0 + sine(1.5, 100.0, 30.0, 10.0);
    const AcDc a = ac_dc(x, 100.0);
    CHECK(a.dc == doctest::Approx(1000.0).epsilon(1e-4));
    CHECK(a.ac == doctest::Approx(10.0).epsilon(0.05));
}

TEST_CASE("ac_dc of a constant is pure DC") {
    const AcDc a = ac_dc(Eigen::ArrayXd::Constant(3000, 500.0), 100.0);
    CHECK(a.dc == 500.0);
    CHECK(a.ac == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("ac_dc rejects nonpositive DC") {
    const Eigen::ArrayXd x = sine(1.5, 100.0, 30.0, 10.0) - 5.0;
    CHECK_THROWS_AS(ac_dc(x, 100.0), NonPositiveDC);
}

TEST_CASE("spo2_ratio of identical channels is one") {
    const Eigen::ArrayXd x = 1000.0 + sine(1.2, 100.0, 30.0, 20.0);
    CHECK(spo2_ratio(x, x, 100.0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("spo2_ratio scales with the red AC") {
    const Eigen::ArrayXd ir = 1000.0 + sine(1.2, 100.0, 30.0, 20.0);
    const Eigen::ArrayXd red = 1000.0 + sine(1.2, 100.0, 30.0, 40.0);
    CHECK(spo2_ratio(ir, red, 100.0) == doctest::Approx(2.0).epsilon(0.005));
}

TEST_CASE("spo2_ratio is invariant under per-channel gain") {
    const Eigen::ArrayXd ir = 1000.0 + sine(1.2, 100.0, 30.0, 20.0);
    const Eigen::ArrayXd red = 900.0 + sine(1.2, 100.0, 30.0, 15.0);
    const double r0 = spo2_ratio(ir, red, 100.0);
    const double r1 = spo2_ratio(4.0 * ir, 0.5 * red, 100.0);
    CHECK(r1 == doctest::Approx(r0).epsilon(1e-9));
}

TEST_CASE("spo2_ratio propagates degenerate inputs") {
    const Eigen::ArrayXd flat = Eigen::ArrayXd::Constant(3000, 800.0);
    const Eigen::ArrayXd pulsed = 1000.0 + sine(1.2, 100.0, 30.0, 20.0);
    CHECK_THROWS_AS(spo2_ratio(flat, pulsed, 100.0), DegenerateSignal);
    const Eigen::ArrayXd negative = Eigen::ArrayXd::Constant(3000, -10.0);
    CHECK_THROWS_AS(spo2_ratio(negative, pulsed, 100.0), NonPositiveDC);
}

TEST_CASE("spo2_estimate applies the calibration line") {
    const SpO2Calibration reflective = default_calibration(RingType::Reflective);
    CHECK(spo2_estimate(1.0, reflective).percent == doctest::Approx(93.0).epsilon(1e-12));
    CHECK(spo2_estimate(0.5, reflective).percent == doctest::Approx(96.0).epsilon(1e-12));
    const SpO2Calibration transmissive = default_calibration(RingType::Transmissive);
    CHECK(spo2_estimate(1.0, transmissive).percent == doctest::Approx(93.0).epsilon(1e-12));
    CHECK(!spo2_estimate(1.0, reflective).out_of_band);
    CHECK(spo2_estimate(6.0, reflective).out_of_band); // 63 percent
}

TEST_CASE("spo2_estimate is monotone in the ratio") {
    const SpO2Calibration reflective{99.0, 6.0};
    const SpO2Calibration transmissive{87.0, -6.0};
    double prev_r = spo2_estimate(0.1, reflective).percent;
    double prev_t = spo2_estimate(0.1, transmissive).percent;
    for (double r = 0.2; r <= 3.0; r += 0.1) {
        const double cur_r = spo2_estimate(r, reflective).percent;
        const double cur_t = spo2_estimate(r, transmissive).percent;
        CHECK(cur_r < prev_r); // b > 0: strictly decreasing
        CHECK(cur_t > prev_t); // b < 0: strictly increasing
        prev_r = cur_r;
        prev_t = cur_t;
    }
}
