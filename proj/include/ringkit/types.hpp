#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ringkit/errors.hpp"

namespace ringkit {

// ─── Channels ────────────────────────────────────────────────────────────────

/// Sensor channels of a ring session. PPG and ACC kinds are ring inputs;
/// BVP_REF / RESP_REF come from reference devices and are never fed to
/// estimators.
enum class Channel {
    PPG_IR,
    PPG_RED,
    ACC_X,
    ACC_Y,
    ACC_Z,
    BVP_REF,
    RESP_REF,
};

inline constexpr Channel kAllChannels[] = {
    Channel::PPG_IR, Channel::PPG_RED, Channel::ACC_X,   Channel::ACC_Y,
    Channel::ACC_Z,  Channel::BVP_REF, Channel::RESP_REF,
};

bool is_ring_input(Channel c);
bool is_reference(Channel c);
bool is_ppg(Channel c);
bool is_acc(Channel c);

std::string_view to_string(Channel c);
std::optional<Channel> channel_from_string(std::string_view s);

// ─── Activities and scenarios ────────────────────────────────────────────────

enum class ActivityTag {
    Sitting,
    Talking,
    ShakingHead,
    Standing,
    Walking,
    LowOxygen,
    DeepSquat,
    Other,
};

/// Evaluation scenario. Stationary covers sitting, talking, head shaking,
/// standing and the low-oxygen protocol; Motion covers walking and deep squat.
enum class Scenario { Stationary, Motion };

Scenario scenario_of(ActivityTag tag);

std::string_view to_string(ActivityTag tag);
std::optional<ActivityTag> activity_from_string(std::string_view s);
std::string_view to_string(Scenario s);

// ─── Vital kinds ─────────────────────────────────────────────────────────────

enum class VitalKind { HR, RR, SpO2, SBP, DBP };

inline constexpr VitalKind kAllVitalKinds[] = {
    VitalKind::HR, VitalKind::RR, VitalKind::SpO2, VitalKind::SBP, VitalKind::DBP,
};

struct ValueBounds {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return v >= lo && v <= hi; }
};

/// Plausibility bounds used to vet reference labels. Wider than any single
/// cohort so legitimate extremes are not rejected: HR 25-220 beats/min,
/// RR 4-40 breaths/min, SpO2 70-100 %, SBP 70-200 mmHg, DBP 40-120 mmHg.
ValueBounds plausibility_bounds(VitalKind kind);

std::string_view to_string(VitalKind kind);
std::string_view unit_of(VitalKind kind);
std::optional<VitalKind> vital_from_string(std::string_view s);

// ─── Time series ─────────────────────────────────────────────────────────────

/// One channel of irregularly timestamped samples. Timestamps are
/// milliseconds since epoch and must be strictly increasing; values must all
/// be finite. PPG values are raw ADC counts, ACC is in g, reference
/// waveforms are in device units.
struct TimeSeries {
    Channel channel = Channel::PPG_IR;
    std::vector<std::int64_t> timestamps_ms;
    Eigen::ArrayXd values;

    std::size_t size() const { return timestamps_ms.size(); }
    bool empty() const { return timestamps_ms.empty(); }
};

struct Violation {
    enum class Kind { NonMonotone, NonFinite, LengthMismatch };
    Kind kind = Kind::NonMonotone;
    Eigen::Index index = 0;
};

/// Total function: returns every invariant violation of the series (an empty
/// list means the series is valid).
std::vector<Violation> validate_series(const TimeSeries& s);

// ─── Signal windows ──────────────────────────────────────────────────────────

/// A fixed-duration multi-channel segment resampled onto a uniform grid, the
/// unit of all estimation. Construction is gated: a source whose effective
/// sampling rate (sample count / span) falls below `gate_hz` cannot produce
/// a window.
class SignalWindow {
public:
    static constexpr double kDefaultDurationS = 30.0;
    static constexpr double kDefaultRateHz = 100.0;
    static constexpr double kDefaultGateHz = 95.0;

    /// Builds a window by linear interpolation of the given source series
    /// onto the uniform grid. Reference channels are ignored. Returns
    /// nullopt when any accepted channel's effective rate over the window
    /// span is below the gate.
    static std::optional<SignalWindow> from_series(std::int64_t start_ms, double duration_s,
                                                   double rate_hz,
                                                   const std::vector<const TimeSeries*>& sources,
                                                   ActivityTag activity,
                                                   double gate_hz = kDefaultGateHz);

    /// Wraps already-uniform samples. Every channel must contain exactly
    /// round(duration_s * rate_hz) finite samples.
    static SignalWindow from_uniform(std::int64_t start_ms, double duration_s, double rate_hz,
                                     std::map<Channel, Eigen::ArrayXd> channels,
                                     ActivityTag activity);

    std::int64_t start_ms() const { return start_ms_; }
    double duration_s() const { return duration_s_; }
    double rate_hz() const { return rate_hz_; }
    Eigen::Index samples_per_channel() const { return n_samples_; }
    ActivityTag activity() const { return activity_; }
    Scenario scenario() const { return scenario_of(activity_); }

    bool has(Channel c) const { return channels_.count(c) != 0; }
    const Eigen::ArrayXd& samples(Channel c) const;
    const std::map<Channel, Eigen::ArrayXd>& channels() const { return channels_; }

private:
    SignalWindow(std::int64_t start_ms, double duration_s, double rate_hz,
                 std::map<Channel, Eigen::ArrayXd> channels, ActivityTag activity);

    std::int64_t start_ms_ = 0;
    double duration_s_ = kDefaultDurationS;
    double rate_hz_ = kDefaultRateHz;
    Eigen::Index n_samples_ = 0;
    std::map<Channel, Eigen::ArrayXd> channels_;
    ActivityTag activity_ = ActivityTag::Other;
};

// ─── Estimates ───────────────────────────────────────────────────────────────

/// A single vital-sign estimate for one window. Values outside the kind's
/// plausibility bounds are flagged, never clamped.
struct Estimate {
    VitalKind kind = VitalKind::HR;
    double value = 0.0;
    std::string session_id;
    std::int64_t window_start_ms = 0;
    std::string method;
    bool out_of_band = false;
};

/// Linear interpolation of (timestamps, values) at time t_ms, holding the
/// boundary value outside the sampled range.
double interp_at(const std::vector<std::int64_t>& ts_ms, const Eigen::ArrayXd& values,
                 double t_ms);

} // namespace ringkit
