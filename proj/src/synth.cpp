#include "ringkit/synth.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "ringkit/errors.hpp"

namespace ringkit {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kLeadS = 1.0; // quiet margin before the activity segment
constexpr double kTailS = 1.0; // quiet margin after it

// Two-lobe beat template on cycle phase u in [0, 1): a wide systolic
// Gaussian lobe plus a dicrotic bump riding its falling edge, wrapped across
// cycle boundaries. The bump is a genuine local maximum (a hazard for naive
// peak counting) with small prominence.
constexpr double kSystolicCenter = 0.23;
constexpr double kSystolicWidth = 0.11;
constexpr double kNotchCenter = 0.55;
constexpr double kNotchWidth = 0.07;

double wrapped_lobe(double u, double center, double width) {
    double v = 0.0;
    for (int d = -1; d <= 1; ++d) {
        const double z = (u - center + static_cast<double>(d)) / width;
        v += std::exp(-0.5 * z * z);
    }
    return v;
}

double pulse_shape(double u, double notch_amp) {
    return wrapped_lobe(u, kSystolicCenter, kSystolicWidth) +
           notch_amp * wrapped_lobe(u, kNotchCenter, kNotchWidth);
}

// The wrapped Gaussians integrate to width * sqrt(2*pi) over one period.
double pulse_shape_mean(double notch_amp) {
    return std::sqrt(2.0 * kPi) * (kSystolicWidth + notch_amp * kNotchWidth);
}

double frac(double x) { return x - std::floor(x); }

void check_trajectory(const Trajectory& traj, double lo, double hi, const char* name) {
    if (traj.empty()) {
        throw SpecInvalid(std::string("synth: ") + name + " trajectory is empty");
    }
    for (std::size_t i = 0; i < traj.size(); ++i) {
        if (i > 0 && traj[i].t_s <= traj[i - 1].t_s) {
            throw SpecInvalid(std::string("synth: ") + name + " trajectory knots not increasing");
        }
        if (traj[i].value < lo || traj[i].value > hi) {
            throw SpecInvalid(std::string("synth: ") + name + " value " +
                              std::to_string(traj[i].value) + " outside [" + std::to_string(lo) +
                              ", " + std::to_string(hi) + "]");
        }
    }
}

// Cumulative cycles of a per-minute trajectory, sampled on a uniform grid.
Eigen::ArrayXd integrate_phase(const Trajectory& per_min, double phase0, Eigen::Index n,
                               double dt_s, double lead_s) {
    Eigen::ArrayXd phase(n);
    double acc = phase0;
    double prev_rate = trajectory_at(per_min, -lead_s) / 60.0;
    phase[0] = acc;
    for (Eigen::Index k = 1; k < n; ++k) {
        const double rate = trajectory_at(per_min, static_cast<double>(k) * dt_s - lead_s) / 60.0;
        acc += 0.5 * (prev_rate + rate) * dt_s;
        phase[k] = acc;
        prev_rate = rate;
    }
    return phase;
}

ActivityTag tag_for(const MotionSpec& motion) {
    switch (motion.kind) {
    case MotionKind::Walk: return ActivityTag::Walking;
    case MotionKind::Squat: return ActivityTag::DeepSquat;
    case MotionKind::None: return ActivityTag::Sitting;
    }
    return ActivityTag::Sitting;
}

std::vector<std::int64_t> uniform_timestamps(Eigen::Index n, double rate_hz) {
    std::vector<std::int64_t> ts(static_cast<std::size_t>(n));
    for (Eigen::Index k = 0; k < n; ++k) {
        ts[static_cast<std::size_t>(k)] =
            static_cast<std::int64_t>(std::llround(static_cast<double>(k) * 1000.0 / rate_hz));
    }
    return ts;
}

} // namespace

double trajectory_at(const Trajectory& traj, double t_s) {
    if (traj.empty()) return 0.0;
    if (t_s <= traj.front().t_s) return traj.front().value;
    if (t_s >= traj.back().t_s) return traj.back().value;
    for (std::size_t i = 1; i < traj.size(); ++i) {
        if (t_s <= traj[i].t_s) {
            const double w = (t_s - traj[i - 1].t_s) / (traj[i].t_s - traj[i - 1].t_s);
            return traj[i - 1].value * (1.0 - w) + traj[i].value * w;
        }
    }
    return traj.back().value;
}

void SynthSpec::validate() const {
    if (!(duration_s > 0.0)) throw SpecInvalid("synth: duration_s must be positive");
    if (!(rate_hz > 0.0)) throw SpecInvalid("synth: rate_hz must be positive");
    check_trajectory(hr_bpm, 30.0, 180.0, "hr_bpm");
    check_trajectory(rr_bpm, 6.0, 30.0, "rr_bpm");
    if (!(target_r > 0.0)) throw SpecInvalid("synth: target_r must be positive");
    if (!(dc_ir > 0.0) || !(dc_red > 0.0)) throw SpecInvalid("synth: DC levels must be positive");
    if (!(perfusion > 0.0)) throw SpecInvalid("synth: perfusion must be positive");
    if (notch_amp < 0.0) throw SpecInvalid("synth: notch_amp must be nonnegative");
    if (baseline_wander < 0.0 || amp_modulation < 0.0) {
        throw SpecInvalid("synth: coupling magnitudes must be nonnegative");
    }
    if (motion.kind != MotionKind::None && !(motion.fundamental_hz > 0.0)) {
        throw SpecInvalid("synth: motion fundamental must be positive");
    }
    if (session_id.empty() || subject_id.empty()) {
        throw SpecInvalid("synth: session_id and subject_id must be nonempty");
    }
}

SessionRecord generate(const SynthSpec& spec) {
    spec.validate();

    const double total_s = kLeadS + spec.duration_s + kTailS;
    const auto n = static_cast<Eigen::Index>(std::llround(total_s * spec.rate_hz));
    const double dt = 1.0 / spec.rate_hz;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double phase0_c = unit(rng);
    const double phase0_r = unit(rng);
    const double motion_phase1 = unit(rng) * 2.0 * kPi;
    const double motion_phase2 = unit(rng) * 2.0 * kPi;

    const Eigen::ArrayXd phase_c = integrate_phase(spec.hr_bpm, phase0_c, n, dt, kLeadS);
    const Eigen::ArrayXd phase_r = integrate_phase(spec.rr_bpm, phase0_r, n, dt, kLeadS);

    // Zero-mean pulsatile waveform shared by both optical channels.
    const double shape_mean = pulse_shape_mean(spec.notch_amp);
    Eigen::ArrayXd pulse(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        pulse[k] = pulse_shape(frac(phase_c[k]), spec.notch_amp) - shape_mean;
    }
    const double pulse_rms = std::sqrt(pulse.square().mean());

    // Channel amplitudes. The red amplitude is chosen so the ratio of ratios
    // comes out at target_r exactly; the shared waveform cancels.
    const double amp_ir = spec.perfusion * spec.dc_ir / (pulse_rms * std::sqrt(2.0));
    const double amp_red = spec.target_r * (amp_ir / spec.dc_ir) * spec.dc_red;

    Eigen::ArrayXd wander(n);
    Eigen::ArrayXd am(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        wander[k] = spec.baseline_wander * std::sin(2.0 * kPi * phase_r[k]);
        am[k] = spec.amp_modulation * std::sin(2.0 * kPi * phase_r[k] + 0.7);
    }

    Eigen::ArrayXd motion = Eigen::ArrayXd::Zero(n);
    double motion_hz = 0.0;
    if (spec.motion.kind != MotionKind::None) {
        motion_hz = spec.motion.kind == MotionKind::Squat && spec.motion.fundamental_hz == 2.0
                        ? 0.5
                        : spec.motion.fundamental_hz;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            motion[k] = spec.motion.relative_amp *
                        (std::sin(2.0 * kPi * motion_hz * t + motion_phase1) +
                         0.5 * std::sin(4.0 * kPi * motion_hz * t + motion_phase2));
        }
    }

    Eigen::ArrayXd ir(n);
    Eigen::ArrayXd red(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        const double pulsatile = pulse[k] * (1.0 + am[k]);
        ir[k] = (spec.dc_ir * (1.0 + wander[k]) + amp_ir * pulsatile) * (1.0 + motion[k]);
        red[k] = (spec.dc_red * (1.0 + wander[k]) + amp_red * pulsatile) * (1.0 + motion[k]);
    }

    std::normal_distribution<double> gauss(0.0, 1.0);
    if (std::isfinite(spec.noise_snr_db)) {
        const double gain = std::pow(10.0, -spec.noise_snr_db / 20.0);
        const double sigma_ir = amp_ir * pulse_rms * gain;
        const double sigma_red = amp_red * pulse_rms * gain;
        for (Eigen::Index k = 0; k < n; ++k) ir[k] += sigma_ir * gauss(rng);
        for (Eigen::Index k = 0; k < n; ++k) red[k] += sigma_red * gauss(rng);
    }

    // Accelerometer: gravity on z, small sensor noise, and additive motion
    // harmonics when the activity moves.
    const double acc_motion_amp = 2.0 * spec.motion.relative_amp;
    Eigen::ArrayXd acc[3];
    for (int axis = 0; axis < 3; ++axis) {
        acc[axis].resize(n);
        const double axis_phase = motion_phase1 + 2.0 * kPi * axis / 3.0;
        const double axis_gain = axis == 2 ? 0.8 : (axis == 0 ? 0.5 : 0.3);
        for (Eigen::Index k = 0; k < n; ++k) {
            const double t = static_cast<double>(k) * dt;
            double v = axis == 2 ? 1.0 : 0.0;
            if (spec.motion.kind != MotionKind::None) {
                v += acc_motion_amp * axis_gain * std::sin(2.0 * kPi * motion_hz * t + axis_phase);
            }
            acc[axis][k] = v + 0.01 * gauss(rng);
        }
    }

    // Reference waveforms at their native device rates.
    const double bvp_rate = 20.0;
    const auto n_bvp = static_cast<Eigen::Index>(std::llround(total_s * bvp_rate));
    const Eigen::ArrayXd phase_c_bvp =
        integrate_phase(spec.hr_bpm, phase0_c, n_bvp, 1.0 / bvp_rate, kLeadS);
    Eigen::ArrayXd bvp(n_bvp);
    for (Eigen::Index k = 0; k < n_bvp; ++k) {
        bvp[k] = pulse_shape(frac(phase_c_bvp[k]), spec.notch_amp) - shape_mean;
    }

    const double resp_rate = 50.0;
    const auto n_resp = static_cast<Eigen::Index>(std::llround(total_s * resp_rate));
    const Eigen::ArrayXd phase_r_resp =
        integrate_phase(spec.rr_bpm, phase0_r, n_resp, 1.0 / resp_rate, kLeadS);
    Eigen::ArrayXd resp(n_resp);
    for (Eigen::Index k = 0; k < n_resp; ++k) {
        resp[k] = std::sin(2.0 * kPi * phase_r_resp[k]);
    }
    if (std::isfinite(spec.noise_snr_db)) {
        const double sigma = std::numbers::sqrt2 / 2.0 * std::pow(10.0, -spec.noise_snr_db / 20.0);
        for (Eigen::Index k = 0; k < n_resp; ++k) resp[k] += sigma * gauss(rng);
    }

    SessionRecord session;
    session.session_id = spec.session_id;
    session.subject_id = spec.subject_id;
    session.ring_type = spec.ring_type;

    auto add_series = [&session](Channel ch, Eigen::ArrayXd values, double rate) {
        TimeSeries ts;
        ts.channel = ch;
        ts.timestamps_ms = uniform_timestamps(values.size(), rate);
        ts.values = std::move(values);
        session.signals.push_back(std::move(ts));
    };
    add_series(Channel::PPG_IR, std::move(ir), spec.rate_hz);
    add_series(Channel::PPG_RED, std::move(red), spec.rate_hz);
    add_series(Channel::ACC_X, std::move(acc[0]), spec.rate_hz);
    add_series(Channel::ACC_Y, std::move(acc[1]), spec.rate_hz);
    add_series(Channel::ACC_Z, std::move(acc[2]), spec.rate_hz);
    add_series(Channel::BVP_REF, std::move(bvp), bvp_rate);
    add_series(Channel::RESP_REF, std::move(resp), resp_rate);

    const auto lead_ms = static_cast<std::int64_t>(std::llround(kLeadS * 1000.0));
    const auto activity_end_ms =
        lead_ms + static_cast<std::int64_t>(std::llround(spec.duration_s * 1000.0));
    session.activities.push_back({tag_for(spec.motion), lead_ms, activity_end_ms});

    const std::int64_t span_end = session.span_end_ms();
    const SpO2Calibration cal = default_calibration(spec.ring_type);
    const double spo2_label = cal.a - cal.b * spec.target_r;
    for (std::int64_t t = 0; t <= span_end; t += 1000) {
        const double t_rel = static_cast<double>(t) / 1000.0 - kLeadS;
        session.labels.push_back({VitalKind::HR, t, trajectory_at(spec.hr_bpm, t_rel)});
        session.labels.push_back({VitalKind::RR, t, trajectory_at(spec.rr_bpm, t_rel)});
        session.labels.push_back({VitalKind::SpO2, t, spo2_label});
    }
    if (spec.emit_bp) {
        session.labels.push_back({VitalKind::SBP, 0, spec.sbp_mmhg});
        session.labels.push_back({VitalKind::DBP, 0, spec.dbp_mmhg});
        session.labels.push_back({VitalKind::SBP, span_end, spec.sbp_mmhg});
        session.labels.push_back({VitalKind::DBP, span_end, spec.dbp_mmhg});
    }
    std::stable_sort(session.labels.begin(), session.labels.end(),
                     [](const LabelSample& a, const LabelSample& b) {
                         if (a.t_ms != b.t_ms) return a.t_ms < b.t_ms;
                         return static_cast<int>(a.kind) < static_cast<int>(b.kind);
                     });
    return session;
}

double brute_force_dft_argmax(const Eigen::ArrayXd& x, double rate_hz, double f_lo_hz,
                              double f_hi_hz, double grid_hz) {
    if (x.size() == 0 || !(grid_hz > 0.0) || !(f_hi_hz >= f_lo_hz)) {
        throw Error("brute_force_dft_argmax: bad arguments");
    }
    const Eigen::ArrayXd d = x - x.mean();
    const Eigen::Index n = d.size();

    double best_f = f_lo_hz;
    double best_mag = -1.0;
    const auto steps = static_cast<std::int64_t>(std::floor((f_hi_hz - f_lo_hz) / grid_hz));
    for (std::int64_t s = 0; s <= steps; ++s) {
        const double f = f_lo_hz + static_cast<double>(s) * grid_hz;
        // Goertzel-style phasor accumulation.
        const double w = 2.0 * kPi * f / rate_hz;
        const std::complex<double> rot(std::cos(w), -std::sin(w));
        std::complex<double> phasor(1.0, 0.0);
        std::complex<double> acc(0.0, 0.0);
        for (Eigen::Index k = 0; k < n; ++k) {
            acc += d[k] * phasor;
            phasor *= rot;
        }
        const double mag = std::abs(acc);
        if (mag > best_mag) {
            best_mag = mag;
            best_f = f;
        }
    }
    return best_f;
}

} // namespace ringkit
