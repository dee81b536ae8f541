#include "ringkit/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>

#include "ringkit/errors.hpp"

namespace ringkit {

namespace {

constexpr double kPi = std::numbers::pi;

// ─── Butterworth band-pass as second-order sections ──────────────────────────

struct Biquad {
    double b0, b1, b2; // numerator
    double a1, a2;     // denominator (a0 normalized to 1)
};

// Analog Butterworth lowpass prototype poles, transformed to a band-pass and
// discretized with the bilinear transform. Each conjugate pole pair becomes
// one section with zeros at z = +1 and z = -1; the overall gain is split
// evenly across sections and normalized to unity at the geometric center of
// the passband.
std::vector<Biquad> design_butter_bandpass(const FilterSpec& spec, double rate_hz) {
    using cd = std::complex<double>;
    const int n = spec.order;
    const double fs2 = 2.0 * rate_hz;
    const double w1 = fs2 * std::tan(kPi * spec.low_hz / rate_hz);
    const double w2 = fs2 * std::tan(kPi * spec.high_hz / rate_hz);
    const double bw = w2 - w1;
    const double w0 = std::sqrt(w1 * w2);

    std::vector<cd> z_poles;
    z_poles.reserve(2 * static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double theta = kPi * (2.0 * k + n + 1.0) / (2.0 * n);
        const cd proto(std::cos(theta), std::sin(theta));
        const cd a = proto * (bw / 2.0);
        const cd disc = std::sqrt(a * a - cd(w0 * w0, 0.0));
        for (const cd s : {a + disc, a - disc}) {
            const cd zp = (cd(fs2, 0.0) + s) / (cd(fs2, 0.0) - s);
            if (std::abs(zp) >= 1.0 - 1e-12) {
                throw UnstableDesign("band-pass design unstable for " +
                                     std::to_string(spec.low_hz) + "-" +
                                     std::to_string(spec.high_hz) + " Hz at " +
                                     std::to_string(rate_hz) + " Hz");
            }
            z_poles.push_back(zp);
        }
    }

    // Pair each pole with its conjugate partner.
    std::vector<cd> upper;
    std::vector<double> reals;
    for (const cd& p : z_poles) {
        if (p.imag() > 1e-14) {
            upper.push_back(p);
        } else if (p.imag() < -1e-14) {
            continue; // its conjugate is in `upper`
        } else {
            reals.push_back(p.real());
        }
    }
    std::sort(upper.begin(), upper.end(), [](const cd& a, const cd& b) {
        return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
    });
    std::sort(reals.begin(), reals.end());

    std::vector<Biquad> sos;
    for (const cd& p : upper) {
        sos.push_back({1.0, 0.0, -1.0, -2.0 * p.real(), std::norm(p)});
    }
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
        sos.push_back({1.0, 0.0, -1.0, -(reals[i] + reals[i + 1]), reals[i] * reals[i + 1]});
    }

    // Normalize gain at the warped analog center frequency.
    const double theta0 = 2.0 * std::atan(w0 / fs2);
    const cd z0 = std::polar(1.0, theta0);
    const cd zi1 = 1.0 / z0;
    const cd zi2 = zi1 * zi1;
    cd h(1.0, 0.0);
    for (const Biquad& s : sos) {
        h *= (s.b0 + s.b1 * zi1 + s.b2 * zi2) / (cd(1.0, 0.0) + s.a1 * zi1 + s.a2 * zi2);
    }
    const double gain = std::abs(h);
    if (!(gain > 0.0) || !std::isfinite(gain)) {
        throw UnstableDesign("band-pass design degenerate");
    }
    const double g = std::pow(1.0 / gain, 1.0 / static_cast<double>(sos.size()));
    for (Biquad& s : sos) {
        s.b0 *= g;
        s.b1 *= g;
        s.b2 *= g;
    }
    return sos;
}

// Steady-state (unit step) section state, used to suppress startup
// transients when filtering.
std::array<double, 2> section_step_state(const Biquad& s) {
    const double h1 = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    const double z2 = s.b2 - s.a2 * h1;
    const double z1 = s.b1 - s.a1 * h1 + z2;
    return {z1, z2};
}

// Direct-form II transposed, one section over the whole array.
void run_section(const Biquad& s, Eigen::ArrayXd& x, std::array<double, 2> state) {
    double z1 = state[0];
    double z2 = state[1];
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double in = x[i];
        const double out = s.b0 * in + z1;
        z1 = s.b1 * in - s.a1 * out + z2;
        z2 = s.b2 * in - s.a2 * out;
        x[i] = out;
    }
}

void run_cascade(const std::vector<Biquad>& sos, Eigen::ArrayXd& x,
                 const std::vector<std::array<double, 2>>& zi, double scale) {
    for (std::size_t j = 0; j < sos.size(); ++j) {
        run_section(sos[j], x, {zi[j][0] * scale, zi[j][1] * scale});
    }
}

Eigen::ArrayXd odd_extension(const Eigen::ArrayXd& x, Eigen::Index pad) {
    const Eigen::Index n = x.size();
    Eigen::ArrayXd ext(n + 2 * pad);
    for (Eigen::Index i = 0; i < pad; ++i) {
        ext[i] = 2.0 * x[0] - x[pad - i];
    }
    ext.segment(pad, n) = x;
    for (Eigen::Index i = 0; i < pad; ++i) {
        ext[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
    }
    return ext;
}

std::size_t next_pow2(std::size_t v) {
    std::size_t p = 1;
    while (p < v) p <<= 1;
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    std::size_t j = 0;
    for (std::size_t i = 1; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

} // namespace

void FilterSpec::validate(double rate_hz) const {
    if (!(low_hz > 0.0) || !(high_hz > low_hz)) {
        throw ConfigError("filter spec requires 0 < low_hz < high_hz (got " +
                          std::to_string(low_hz) + ", " + std::to_string(high_hz) + ")");
    }
    if (order < 1 || order > 12) {
        throw ConfigError("filter order out of range: " + std::to_string(order));
    }
    if (!(high_hz < rate_hz / 2.0)) {
        throw UnstableDesign("filter edge " + std::to_string(high_hz) +
                             " Hz too close to Nyquist at rate " + std::to_string(rate_hz));
    }
}

Eigen::ArrayXd standardize(const Eigen::ArrayXd& x) {
    if (x.size() < 2) {
        throw Error("standardize: need at least 2 samples");
    }
    const double mean = x.mean();
    const double var = (x - mean).square().mean();
    if (var <= 0.0 || x.maxCoeff() == x.minCoeff()) {
        return Eigen::ArrayXd::Zero(x.size());
    }
    return (x - mean) / std::sqrt(var);
}

Eigen::ArrayXd bandpass(const Eigen::ArrayXd& x, double rate_hz, const FilterSpec& spec) {
    spec.validate(rate_hz);
    const Eigen::Index n = x.size();
    if (n <= 3 * spec.order) {
        throw Error("bandpass: input too short for order " + std::to_string(spec.order));
    }
    const auto sos = design_butter_bandpass(spec, rate_hz);

    std::vector<std::array<double, 2>> zi;
    zi.reserve(sos.size());
    for (const Biquad& s : sos) zi.push_back(section_step_state(s));

    // Pad enough to absorb the filter's transient; narrow low edges ring for
    // roughly a few periods of the low cutoff.
    const auto base = static_cast<Eigen::Index>(3 * (2 * sos.size() + 1));
    const auto ring = static_cast<Eigen::Index>(std::llround(3.0 * rate_hz / spec.low_hz));
    const Eigen::Index pad = std::min<Eigen::Index>(n - 1, std::max(base, ring));

    Eigen::ArrayXd y = odd_extension(x, pad);
    run_cascade(sos, y, zi, y[0]);
    y.reverseInPlace();
    run_cascade(sos, y, zi, y[0]);
    y.reverseInPlace();
    return y.segment(pad, n);
}

Eigen::ArrayXd diffnorm(const Eigen::ArrayXd& x) {
    if (x.size() < 3) {
        throw Error("diffnorm: need at least 3 samples");
    }
    const Eigen::ArrayXd d = x.tail(x.size() - 1) - x.head(x.size() - 1);
    return standardize(d);
}

SpectrumEstimate welch_psd(const Eigen::ArrayXd& x, double rate_hz, double segment_s,
                           double overlap) {
    const Eigen::Index n = x.size();
    const auto nper = static_cast<Eigen::Index>(std::llround(segment_s * rate_hz));
    if (nper < 8) {
        throw Error("welch_psd: segment too short");
    }
    if (nper > n) {
        throw SegmentTooLong("welch_psd: segment of " + std::to_string(nper) +
                             " samples exceeds input of " + std::to_string(n));
    }
    if (!(overlap >= 0.0 && overlap < 1.0)) {
        throw Error("welch_psd: overlap fraction must be in [0, 1)");
    }

    const auto noverlap = static_cast<Eigen::Index>(std::llround(overlap * nper));
    const Eigen::Index step = std::max<Eigen::Index>(1, nper - noverlap);

    Eigen::ArrayXd window(nper);
    for (Eigen::Index i = 0; i < nper; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / static_cast<double>(nper)));
    }
    const double win_sumsq = window.square().sum();

    const std::size_t nfft = next_pow2(static_cast<std::size_t>(nper));
    const std::size_t nbins = nfft / 2 + 1;
    Eigen::ArrayXd acc = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(nbins));

    std::vector<std::complex<double>> buf(nfft);
    int nseg = 0;
    for (Eigen::Index start = 0; start + nper <= n; start += step) {
        const Eigen::ArrayXd seg = x.segment(start, nper);
        const double seg_mean = seg.mean();
        for (Eigen::Index i = 0; i < nper; ++i) {
            buf[static_cast<std::size_t>(i)] = {(seg[i] - seg_mean) * window[i], 0.0};
        }
        std::fill(buf.begin() + nper, buf.end(), std::complex<double>(0.0, 0.0));
        fft_inplace(buf);
        for (std::size_t k = 0; k < nbins; ++k) {
            acc[static_cast<Eigen::Index>(k)] += std::norm(buf[k]);
        }
        ++nseg;
    }

    SpectrumEstimate out;
    out.segment_s = segment_s;
    out.overlap_fraction = overlap;
    out.power.resize(static_cast<Eigen::Index>(nbins));
    out.freqs_hz.resize(static_cast<Eigen::Index>(nbins));
    const double scale = 1.0 / (rate_hz * win_sumsq * static_cast<double>(nseg));
    for (std::size_t k = 0; k < nbins; ++k) {
        const bool interior = k != 0 && k != nbins - 1;
        out.power[static_cast<Eigen::Index>(k)] = acc[static_cast<Eigen::Index>(k)] * scale *
                                                  (interior ? 2.0 : 1.0);
        out.freqs_hz[static_cast<Eigen::Index>(k)] =
            static_cast<double>(k) * rate_hz / static_cast<double>(nfft);
    }
    return out;
}

void PreprocessPlan::validate() const {
    int spectral = 0;
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i].op == PlanStep::Op::Spectral) {
            ++spectral;
            if (i + 1 != steps.size()) {
                throw ConfigError("preprocess plan: spectral step must be last");
            }
        }
    }
    if (spectral > 1) {
        throw ConfigError("preprocess plan: at most one spectral step");
    }
}

bool PreprocessPlan::ends_with_spectral() const {
    return !steps.empty() && steps.back().op == PlanStep::Op::Spectral;
}

PlanOutput run_plan_samples(const Eigen::ArrayXd& samples, double rate_hz,
                            const PreprocessPlan& plan) {
    plan.validate();
    Eigen::ArrayXd x = samples;
    for (const PlanStep& step : plan.steps) {
        switch (step.op) {
        case PlanStep::Op::Standardize: x = standardize(x); break;
        case PlanStep::Op::Filter: x = bandpass(x, rate_hz, step.filter); break;
        case PlanStep::Op::DiffNorm: x = diffnorm(x); break;
        case PlanStep::Op::Spectral: return welch_psd(x, rate_hz, step.segment_s, step.overlap);
        }
    }
    return x;
}

PlanOutput run_plan(const SignalWindow& w, Channel channel, const PreprocessPlan& plan) {
    return run_plan_samples(w.samples(channel), w.rate_hz(), plan);
}

} // namespace ringkit
