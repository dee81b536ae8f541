#include "ringkit/types.hpp"

#include <algorithm>
#include <cmath>

namespace ringkit {

bool is_ring_input(Channel c) { return !is_reference(c); }

bool is_reference(Channel c) { return c == Channel::BVP_REF || c == Channel::RESP_REF; }

bool is_ppg(Channel c) { return c == Channel::PPG_IR || c == Channel::PPG_RED; }

bool is_acc(Channel c) {
    return c == Channel::ACC_X || c == Channel::ACC_Y || c == Channel::ACC_Z;
}

std::string_view to_string(Channel c) {
    switch (c) {
    case Channel::PPG_IR: return "ppg_ir";
    case Channel::PPG_RED: return "ppg_red";
    case Channel::ACC_X: return "acc_x";
    case Channel::ACC_Y: return "acc_y";
    case Channel::ACC_Z: return "acc_z";
    case Channel::BVP_REF: return "bvp_ref";
    case Channel::RESP_REF: return "resp_ref";
    }
    return "?";
}

std::optional<Channel> channel_from_string(std::string_view s) {
    for (Channel c : kAllChannels) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

Scenario scenario_of(ActivityTag tag) {
    switch (tag) {
    case ActivityTag::Walking:
    case ActivityTag::DeepSquat: return Scenario::Motion;
    case ActivityTag::Sitting:
    case ActivityTag::Talking:
    case ActivityTag::ShakingHead:
    case ActivityTag::Standing:
    case ActivityTag::LowOxygen:
    case ActivityTag::Other: return Scenario::Stationary;
    }
    return Scenario::Stationary;
}

std::string_view to_string(ActivityTag tag) {
    switch (tag) {
    case ActivityTag::Sitting: return "sitting";
    case ActivityTag::Talking: return "talking";
    case ActivityTag::ShakingHead: return "shaking_head";
    case ActivityTag::Standing: return "standing";
    case ActivityTag::Walking: return "walking";
    case ActivityTag::LowOxygen: return "low_oxygen";
    case ActivityTag::DeepSquat: return "deep_squat";
    case ActivityTag::Other: return "other";
    }
    return "?";
}

std::optional<ActivityTag> activity_from_string(std::string_view s) {
    static constexpr ActivityTag all[] = {
        ActivityTag::Sitting,   ActivityTag::Talking,   ActivityTag::ShakingHead,
        ActivityTag::Standing,  ActivityTag::Walking,   ActivityTag::LowOxygen,
        ActivityTag::DeepSquat, ActivityTag::Other,
    };
    for (ActivityTag t : all) {
        if (to_string(t) == s) return t;
    }
    return std::nullopt;
}

std::string_view to_string(Scenario s) {
    return s == Scenario::Motion ? "motion" : "stationary";
}

ValueBounds plausibility_bounds(VitalKind kind) {
    switch (kind) {
    case VitalKind::HR: return {25.0, 220.0};
    case VitalKind::RR: return {4.0, 40.0};
    case VitalKind::SpO2: return {70.0, 100.0};
    case VitalKind::SBP: return {70.0, 200.0};
    case VitalKind::DBP: return {40.0, 120.0};
    }
    return {0.0, 0.0};
}

std::string_view to_string(VitalKind kind) {
    switch (kind) {
    case VitalKind::HR: return "hr";
    case VitalKind::RR: return "rr";
    case VitalKind::SpO2: return "spo2";
    case VitalKind::SBP: return "sbp";
    case VitalKind::DBP: return "dbp";
    }
    return "?";
}

std::string_view unit_of(VitalKind kind) {
    switch (kind) {
    case VitalKind::HR: return "beats/min";
    case VitalKind::RR: return "breaths/min";
    case VitalKind::SpO2: return "percent";
    case VitalKind::SBP:
    case VitalKind::DBP: return "mmHg";
    }
    return "?";
}

std::optional<VitalKind> vital_from_string(std::string_view s) {
    for (VitalKind k : kAllVitalKinds) {
        if (to_string(k) == s) return k;
    }
    return std::nullopt;
}

std::vector<Violation> validate_series(const TimeSeries& s) {
    std::vector<Violation> out;
    if (static_cast<Eigen::Index>(s.timestamps_ms.size()) != s.values.size()) {
        out.push_back({Violation::Kind::LengthMismatch, 0});
        return out;
    }
    for (std::size_t i = 1; i < s.timestamps_ms.size(); ++i) {
        if (s.timestamps_ms[i] <= s.timestamps_ms[i - 1]) {
            out.push_back({Violation::Kind::NonMonotone, static_cast<Eigen::Index>(i)});
        }
    }
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
        if (!std::isfinite(s.values[i])) {
            out.push_back({Violation::Kind::NonFinite, i});
        }
    }
    return out;
}

double interp_at(const std::vector<std::int64_t>& ts_ms, const Eigen::ArrayXd& values,
                 double t_ms) {
    if (ts_ms.empty()) return 0.0;
    if (t_ms <= static_cast<double>(ts_ms.front())) return values[0];
    if (t_ms >= static_cast<double>(ts_ms.back())) return values[values.size() - 1];
    auto it = std::upper_bound(ts_ms.begin(), ts_ms.end(), static_cast<std::int64_t>(t_ms),
                               [](std::int64_t a, std::int64_t b) { return a < b; });
    // upper_bound on the integer floor of t_ms can land one slot early when
    // t_ms has a fractional part; advance until ts[hi] > t_ms.
    std::size_t hi = static_cast<std::size_t>(it - ts_ms.begin());
    while (hi < ts_ms.size() && static_cast<double>(ts_ms[hi]) <= t_ms) ++hi;
    if (hi >= ts_ms.size()) return values[values.size() - 1];
    const std::size_t lo = hi - 1;
    const double t0 = static_cast<double>(ts_ms[lo]);
    const double t1 = static_cast<double>(ts_ms[hi]);
    const double w = (t_ms - t0) / (t1 - t0);
    return values[static_cast<Eigen::Index>(lo)] * (1.0 - w) +
           values[static_cast<Eigen::Index>(hi)] * w;
}

SignalWindow::SignalWindow(std::int64_t start_ms, double duration_s, double rate_hz,
                           std::map<Channel, Eigen::ArrayXd> channels, ActivityTag activity)
    : start_ms_(start_ms),
      duration_s_(duration_s),
      rate_hz_(rate_hz),
      n_samples_(static_cast<Eigen::Index>(std::llround(duration_s * rate_hz))),
      channels_(std::move(channels)),
      activity_(activity) {}

std::optional<SignalWindow> SignalWindow::from_series(std::int64_t start_ms, double duration_s,
                                                      double rate_hz,
                                                      const std::vector<const TimeSeries*>& sources,
                                                      ActivityTag activity, double gate_hz) {
    if (duration_s <= 0.0 || rate_hz <= 0.0) {
        throw Error("SignalWindow: duration_s and rate_hz must be positive");
    }
    const auto n = static_cast<Eigen::Index>(std::llround(duration_s * rate_hz));
    const double end_ms = static_cast<double>(start_ms) + duration_s * 1000.0;

    std::map<Channel, Eigen::ArrayXd> grids;
    for (const TimeSeries* s : sources) {
        if (s == nullptr || is_reference(s->channel)) continue;
        // Effective source rate over the window span gates acceptance.
        auto lo = std::lower_bound(s->timestamps_ms.begin(), s->timestamps_ms.end(), start_ms);
        auto hi = std::lower_bound(s->timestamps_ms.begin(), s->timestamps_ms.end(),
                                   static_cast<std::int64_t>(std::llround(end_ms)));
        const double count = static_cast<double>(hi - lo);
        if (count / duration_s < gate_hz) return std::nullopt;

        Eigen::ArrayXd g(n);
        const double step_ms = 1000.0 / rate_hz;
        for (Eigen::Index k = 0; k < n; ++k) {
            g[k] = interp_at(s->timestamps_ms, s->values,
                             static_cast<double>(start_ms) + static_cast<double>(k) * step_ms);
        }
        grids.emplace(s->channel, std::move(g));
    }
    if (grids.empty()) return std::nullopt;
    return SignalWindow(start_ms, duration_s, rate_hz, std::move(grids), activity);
}

SignalWindow SignalWindow::from_uniform(std::int64_t start_ms, double duration_s, double rate_hz,
                                        std::map<Channel, Eigen::ArrayXd> channels,
                                        ActivityTag activity) {
    const auto n = static_cast<Eigen::Index>(std::llround(duration_s * rate_hz));
    for (const auto& [ch, samples] : channels) {
        if (is_reference(ch)) {
            throw Error("SignalWindow: reference channels are not window inputs");
        }
        if (samples.size() != n) {
            throw Error("SignalWindow: channel " + std::string(to_string(ch)) + " has " +
                        std::to_string(samples.size()) + " samples, expected " +
                        std::to_string(n));
        }
        if (!samples.isFinite().all()) {
            throw Error("SignalWindow: non-finite sample in channel " +
                        std::string(to_string(ch)));
        }
    }
    return SignalWindow(start_ms, duration_s, rate_hz, std::move(channels), activity);
}

const Eigen::ArrayXd& SignalWindow::samples(Channel c) const {
    auto it = channels_.find(c);
    if (it == channels_.end()) {
        throw Error("SignalWindow: channel " + std::string(to_string(c)) + " not present");
    }
    return it->second;
}

} // namespace ringkit
