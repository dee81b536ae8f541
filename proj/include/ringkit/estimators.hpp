#pragma once

#include <Eigen/Core>

#include <vector>

#include "ringkit/preprocess.hpp"
#include "ringkit/types.hpp"

namespace ringkit {

/// Physiological band for a rate task, with the matching passband.
struct RateBand {
    VitalKind kind = VitalKind::HR;
    double min_per_min = 30.0;
    double max_per_min = 180.0;
    FilterSpec filter{0.5, 3.0, 4};
};

/// Heart rate: 30-180 beats/min through a 0.5-3 Hz passband.
RateBand hr_band();
/// Respiratory rate: 6-30 breaths/min through a 0.1-0.5 Hz passband.
RateBand rr_band();
RateBand band_for(VitalKind kind);

/// Linear pulse-oximetry calibration: SpO2 = a - b * R.
struct SpO2Calibration {
    double a = 99.0;
    double b = 6.0;

    void validate() const;
};

enum class RingType { Reflective, Transmissive };

std::string_view to_string(RingType t);
std::optional<RingType> ring_type_from_string(std::string_view s);

/// Default coefficients: reflective (99, 6), transmissive (87, -6).
SpO2Calibration default_calibration(RingType ring);

struct RateEstimate {
    double per_min = 0.0;
    bool out_of_band = false;
};

/// Local maxima of an already band-passed signal, with a minimum inter-peak
/// distance of 60 / band.max_per_min seconds and prominence of at least
/// 0.3 times the signal's standard deviation. Indices ascend.
std::vector<Eigen::Index> detect_peaks(const Eigen::ArrayXd& x, double rate_hz,
                                       const RateBand& band);

/// 60 * peak count / duration, flagged when outside the band limits.
RateEstimate rate_from_peaks(const std::vector<Eigen::Index>& peaks, double duration_s,
                             const RateBand& band);

/// 60 * argmax frequency inside the band, refined by parabolic interpolation
/// over the peak bin and its neighbors.
RateEstimate rate_from_spectrum(const SpectrumEstimate& spec, const RateBand& band);

struct AcDc {
    double ac = 0.0;
    double dc = 0.0;
};

/// Pulsatile and quasi-static components of a raw (unstandardized) PPG
/// window: dc is the mean, ac is the sinusoid-equivalent amplitude
/// (RMS * sqrt(2)) of the cardiac-band component.
AcDc ac_dc(const Eigen::ArrayXd& raw, double rate_hz, const FilterSpec& cardiac = {0.5, 3.0, 4});

/// Ratio of ratios R = (AC_red / DC_red) / (AC_ir / DC_ir) from raw channels.
double spo2_ratio(const Eigen::ArrayXd& ir, const Eigen::ArrayXd& red, double rate_hz,
                  const FilterSpec& cardiac = {0.5, 3.0, 4});

struct SpO2Estimate {
    double percent = 0.0;
    bool out_of_band = false;
};

/// SpO2 = a - b * R, flagged when outside 70-100 %. Never clamped.
SpO2Estimate spo2_estimate(double r, const SpO2Calibration& cal);

} // namespace ringkit
