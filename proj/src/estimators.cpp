#include "ringkit/estimators.hpp"

#include <algorithm>
#include <cmath>

#include "ringkit/errors.hpp"

namespace ringkit {

namespace {

constexpr double kProminenceFraction = 0.3;

// Prominence of the peak at index p: height above the higher of the two
// valley floors found while walking outward to the nearest higher sample
// (or the signal edge).
double prominence_at(const Eigen::ArrayXd& x, Eigen::Index p) {
    const double h = x[p];
    double left_min = h;
    for (Eigen::Index i = p - 1; i >= 0; --i) {
        if (x[i] > h) break;
        left_min = std::min(left_min, x[i]);
    }
    double right_min = h;
    for (Eigen::Index i = p + 1; i < x.size(); ++i) {
        if (x[i] > h) break;
        right_min = std::min(right_min, x[i]);
    }
    return h - std::max(left_min, right_min);
}

} // namespace

RateBand hr_band() { return {VitalKind::HR, 30.0, 180.0, {0.5, 3.0, 4}}; }

RateBand rr_band() { return {VitalKind::RR, 6.0, 30.0, {0.1, 0.5, 4}}; }

RateBand band_for(VitalKind kind) {
    switch (kind) {
    case VitalKind::HR: return hr_band();
    case VitalKind::RR: return rr_band();
    default: throw Error("no rate band for task " + std::string(to_string(kind)));
    }
}

void SpO2Calibration::validate() const {
    if (!(a >= 80.0 && a <= 110.0)) {
        throw ConfigError("SpO2 calibration intercept out of range: " + std::to_string(a));
    }
}

std::string_view to_string(RingType t) {
    return t == RingType::Reflective ? "reflective" : "transmissive";
}

std::optional<RingType> ring_type_from_string(std::string_view s) {
    if (s == "reflective") return RingType::Reflective;
    if (s == "transmissive") return RingType::Transmissive;
    return std::nullopt;
}

SpO2Calibration default_calibration(RingType ring) {
    return ring == RingType::Reflective ? SpO2Calibration{99.0, 6.0}
                                        : SpO2Calibration{87.0, -6.0};
}

std::vector<Eigen::Index> detect_peaks(const Eigen::ArrayXd& x, double rate_hz,
                                       const RateBand& band) {
    const Eigen::Index n = x.size();
    if (n < 3) return {};
    if (x.maxCoeff() == x.minCoeff()) {
        throw DegenerateSignal("detect_peaks: constant signal");
    }
    const double mean = x.mean();
    const double sd = std::sqrt((x - mean).square().mean());
    const double min_prom = kProminenceFraction * sd;
    const auto min_dist = std::max<Eigen::Index>(
        1, static_cast<Eigen::Index>(60.0 / band.max_per_min * rate_hz));

    // Strict local maxima; plateaus count once, at their midpoint.
    std::vector<Eigen::Index> candidates;
    Eigen::Index i = 1;
    while (i < n - 1) {
        if (x[i] > x[i - 1]) {
            Eigen::Index j = i;
            while (j < n - 1 && x[j + 1] == x[i]) ++j;
            if (j < n - 1 && x[j + 1] < x[i]) {
                candidates.push_back((i + j) / 2);
            }
            i = j + 1;
        } else {
            ++i;
        }
    }

    std::vector<Eigen::Index> prominent;
    prominent.reserve(candidates.size());
    for (Eigen::Index p : candidates) {
        if (prominence_at(x, p) >= min_prom) prominent.push_back(p);
    }

    // Enforce the minimum distance, keeping taller peaks first.
    std::vector<Eigen::Index> order(prominent.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<Eigen::Index>(k);
    std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        const double xa = x[prominent[static_cast<std::size_t>(a)]];
        const double xb = x[prominent[static_cast<std::size_t>(b)]];
        if (xa != xb) return xa > xb;
        return prominent[static_cast<std::size_t>(a)] < prominent[static_cast<std::size_t>(b)];
    });
    std::vector<bool> keep(prominent.size(), true);
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const auto k = static_cast<std::size_t>(order[oi]);
        if (!keep[k]) continue;
        for (std::size_t m = 0; m < prominent.size(); ++m) {
            if (m == k || !keep[m]) continue;
            if (std::abs(prominent[m] - prominent[k]) < min_dist &&
                (x[prominent[m]] < x[prominent[k]] ||
                 (x[prominent[m]] == x[prominent[k]] && prominent[m] > prominent[k]))) {
                keep[m] = false;
            }
        }
    }

    std::vector<Eigen::Index> out;
    for (std::size_t k = 0; k < prominent.size(); ++k) {
        if (keep[k]) out.push_back(prominent[k]);
    }
    return out;
}

RateEstimate rate_from_peaks(const std::vector<Eigen::Index>& peaks, double duration_s,
                             const RateBand& band) {
    if (!(duration_s > 0.0)) {
        throw Error("rate_from_peaks: duration must be positive");
    }
    const double rate = 60.0 * static_cast<double>(peaks.size()) / duration_s;
    return {rate, rate < band.min_per_min || rate > band.max_per_min};
}

RateEstimate rate_from_spectrum(const SpectrumEstimate& spec, const RateBand& band) {
    const double f_lo = band.min_per_min / 60.0;
    const double f_hi = band.max_per_min / 60.0;
    const Eigen::Index n = spec.freqs_hz.size();

    Eigen::Index best = -1;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double f = spec.freqs_hz[k];
        if (f < f_lo || f > f_hi) continue;
        if (best < 0 || spec.power[k] > spec.power[best]) best = k;
    }
    if (best < 0) {
        throw EmptyBand("rate_from_spectrum: no spectrum bins inside " + std::to_string(f_lo) +
                        "-" + std::to_string(f_hi) + " Hz");
    }

    double f_peak = spec.freqs_hz[best];
    if (best > 0 && best + 1 < n) {
        const double pm = spec.power[best - 1];
        const double p0 = spec.power[best];
        const double pp = spec.power[best + 1];
        const double denom = pm - 2.0 * p0 + pp;
        if (denom < 0.0) {
            double delta = 0.5 * (pm - pp) / denom;
            delta = std::clamp(delta, -0.5, 0.5);
            f_peak += delta * spec.df();
        }
    }
    f_peak = std::clamp(f_peak, f_lo, f_hi);
    return {60.0 * f_peak, false};
}

AcDc ac_dc(const Eigen::ArrayXd& raw, double rate_hz, const FilterSpec& cardiac) {
    const double dc = raw.mean();
    if (!(dc > 0.0)) {
        throw NonPositiveDC("ac_dc: mean level " + std::to_string(dc) + " is not positive");
    }
    const Eigen::ArrayXd pulsatile = bandpass(raw, rate_hz, cardiac);
    const double rms = std::sqrt(pulsatile.square().mean());
    return {rms * std::sqrt(2.0), dc};
}

double spo2_ratio(const Eigen::ArrayXd& ir, const Eigen::ArrayXd& red, double rate_hz,
                  const FilterSpec& cardiac) {
    if (ir.size() != red.size()) {
        throw Error("spo2_ratio: channel lengths differ");
    }
    const AcDc i = ac_dc(ir, rate_hz, cardiac);
    const AcDc r = ac_dc(red, rate_hz, cardiac);
    if (i.ac <= 1e-9 * i.dc || r.ac <= 1e-9 * r.dc) {
        throw DegenerateSignal("spo2_ratio: no pulsatile component");
    }
    return (r.ac / r.dc) / (i.ac / i.dc);
}

SpO2Estimate spo2_estimate(double r, const SpO2Calibration& cal) {
    if (!(r > 0.0)) {
        throw Error("spo2_estimate: ratio must be positive");
    }
    const double value = cal.a - cal.b * r;
    return {value, value < 70.0 || value > 100.0};
}

} // namespace ringkit
