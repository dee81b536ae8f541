#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "ringkit/estimators.hpp"
#include "ringkit/ingest.hpp"
#include "ringkit/types.hpp"

namespace ringkit {

/// One knot of a piecewise-linear trajectory; a single knot means constant.
struct TrajectoryKnot {
    double t_s = 0.0;
    double value = 0.0;
};

using Trajectory = std::vector<TrajectoryKnot>;

double trajectory_at(const Trajectory& traj, double t_s);

enum class MotionKind { None, Walk, Squat };

struct MotionSpec {
    MotionKind kind = MotionKind::None;
    double fundamental_hz = 2.0; // walking cadence; squats default to 0.5
    double relative_amp = 0.08;  // artifact amplitude relative to the DC level
};

/// Full description of a synthetic session. The generator is pure: the same
/// spec (including seed) always produces bit-identical output.
struct SynthSpec {
    std::string session_id = "synth-000";
    std::string subject_id = "s000";
    RingType ring_type = RingType::Reflective;

    double duration_s = 30.0; // activity duration; 1 s quiet margins surround it
    double rate_hz = 100.0;

    Trajectory hr_bpm{{0.0, 75.0}};
    Trajectory rr_bpm{{0.0, 15.0}};

    double target_r = 1.0;
    double dc_ir = 20000.0;
    double dc_red = 18000.0;
    double perfusion = 0.02; // AC/DC of the infrared channel
    double notch_amp = 0.2;  // dicrotic notch relative to the systolic lobe

    double noise_snr_db = std::numeric_limits<double>::infinity(); // inf = clean
    double baseline_wander = 0.02; // respiratory wander, fraction of DC
    double amp_modulation = 0.05;  // respiratory AM of the pulsatile part

    MotionSpec motion;

    double sbp_mmhg = 110.0;
    double dbp_mmhg = 70.0;
    bool emit_bp = true;

    std::uint64_t seed = 0;

    void validate() const;
};

/// Generates a complete session: infrared and red PPG, 3-axis ACC, reference
/// BVP (20 Hz) and respiratory (50 Hz) waveforms, activity annotation and
/// 1 Hz labels taken from the generating trajectories.
SessionRecord generate(const SynthSpec& spec);

/// Dense direct-DFT magnitude argmax over [f_lo, f_hi] on a 1 mHz grid,
/// after mean removal. Deliberately brute force; serves as the independent
/// frequency oracle.
double brute_force_dft_argmax(const Eigen::ArrayXd& x, double rate_hz, double f_lo_hz,
                              double f_hi_hz, double grid_hz = 0.001);

} // namespace ringkit
