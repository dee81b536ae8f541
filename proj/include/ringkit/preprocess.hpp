#pragma once

#include <Eigen/Core>

#include <string>
#include <variant>
#include <vector>

#include "ringkit/types.hpp"

namespace ringkit {

/// Passband description for the zero-phase recursive band-pass.
/// Valid when 0 < low_hz < high_hz < rate_hz / 2.
struct FilterSpec {
    double low_hz = 0.5;
    double high_hz = 3.0;
    int order = 4;

    void validate(double rate_hz) const;
};

/// One-sided power spectral density on a uniform frequency grid running from
/// 0 to rate_hz / 2. Integrating power over frequency recovers the signal
/// variance (Parseval, to within windowing loss).
struct SpectrumEstimate {
    Eigen::ArrayXd freqs_hz;
    Eigen::ArrayXd power;
    double segment_s = 10.0;
    double overlap_fraction = 0.5;
    std::string window_fn = "hann";

    double df() const { return freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : 0.0; }
};

/// Zero-mean unit-variance normalization (population standard deviation).
/// A constant input maps to all zeros.
Eigen::ArrayXd standardize(const Eigen::ArrayXd& x);

/// Zero-phase band-pass: an order-`spec.order` Butterworth band-pass applied
/// forward and backward over second-order sections. Length-preserving.
Eigen::ArrayXd bandpass(const Eigen::ArrayXd& x, double rate_hz, const FilterSpec& spec);

/// First difference followed by standardization; output is one sample
/// shorter than the input.
Eigen::ArrayXd diffnorm(const Eigen::ArrayXd& x);

/// Averaged modified periodogram over Hann-windowed overlapping segments.
/// Each segment is mean-detrended before windowing.
SpectrumEstimate welch_psd(const Eigen::ArrayXd& x, double rate_hz, double segment_s = 10.0,
                           double overlap = 0.5);

// ─── Plans ───────────────────────────────────────────────────────────────────

struct PlanStep {
    enum class Op { Standardize, Filter, DiffNorm, Spectral };

    Op op = Op::Standardize;
    FilterSpec filter;       // Op::Filter
    double segment_s = 10.0; // Op::Spectral
    double overlap = 0.5;    // Op::Spectral
};

/// Ordered preprocessing steps. Spectral, if present, must be the last step
/// and may appear at most once.
struct PreprocessPlan {
    std::vector<PlanStep> steps;

    void validate() const;
    bool ends_with_spectral() const;
};

using PlanOutput = std::variant<Eigen::ArrayXd, SpectrumEstimate>;

/// Applies the plan's steps in order to one window channel. The result is a
/// SpectrumEstimate exactly when the plan ends with a Spectral step.
PlanOutput run_plan(const SignalWindow& w, Channel channel, const PreprocessPlan& plan);

/// Same, starting from raw samples at a known rate.
PlanOutput run_plan_samples(const Eigen::ArrayXd& samples, double rate_hz,
                            const PreprocessPlan& plan);

} // namespace ringkit
