#pragma once

// Synthetic PPG-like corpus with exact ground-truth labels: a per-beat
// double-Gaussian template (systolic peak plus a delayed dicrotic bump) on a
// beat grid driven by a slowly wandering heart-rate process, respiratory
// baseline wander, and white noise. Deterministic per (profile, t0); a
// stand-in for real monitoring data, not a physiological simulator.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "ppgfm/errors.hpp"
#include "ppgfm/rng.hpp"
#include "ppgfm/signal.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

enum class Rhythm { regular, irregular };

struct SynthSubjectProfile {
    double base_hr_bpm = 75.0;             // [40, 180]
    double hr_wander_amplitude = 3.0;      // bpm, slow sinusoidal drift
    double dicrotic_strength = 0.5;        // [0, 1]
    double noise_sigma = 0.02;
    double baseline_wander_amplitude = 0.15;
    Rhythm rhythm = Rhythm::regular;
    std::uint64_t seed = 0;
};

inline void validate(const SynthSubjectProfile& p) {
    if (!(p.base_hr_bpm >= 40.0 && p.base_hr_bpm <= 180.0)) {
        throw InvalidInput("synth profile: base_hr_bpm must lie in [40, 180]");
    }
    if (p.hr_wander_amplitude < 0.0 || p.noise_sigma < 0.0 || p.baseline_wander_amplitude < 0.0) {
        throw InvalidInput("synth profile: amplitudes must be nonnegative");
    }
    if (!(p.dicrotic_strength >= 0.0 && p.dicrotic_strength <= 1.0)) {
        throw InvalidInput("synth profile: dicrotic_strength must lie in [0, 1]");
    }
}

struct WindowLabels {
    double hr_bpm = 0.0;   // fractional beats over the window, scaled to bpm
    double rr_brpm = 0.0;  // baseline-wander frequency x 60
    int af_class = 0;      // 1 iff the rhythm is irregular
};

namespace detail {

// Subject-level latent parameters derived deterministically from the seed.
struct SubjectProcess {
    double hr_wander_freq, hr_wander_phase;
    double resp_freq, resp_phase;
    double first_beat_offset;
    Rng beat_rng;

    explicit SubjectProcess(const SynthSubjectProfile& p)
        : beat_rng(Rng(p.seed).child(0x6265)) {
        Rng rng = Rng(p.seed).child(0x7375);
        hr_wander_freq = rng.uniform(0.02, 0.08);
        hr_wander_phase = rng.uniform(0.0, 2.0 * M_PI);
        resp_freq = rng.uniform(0.15, 0.35);
        resp_phase = rng.uniform(0.0, 2.0 * M_PI);
        first_beat_offset = rng.uniform(0.0, 0.5);
    }
};

struct Beat {
    double time;
    double interval;  // to the next beat
};

// Beat grid from t=0 to at least t_end; irregular rhythm multiplies each
// interval by an i.i.d. log-normal factor (sigma = 0.25).
inline std::vector<Beat> beat_grid(const SynthSubjectProfile& p, SubjectProcess& proc,
                                   double t_end) {
    std::vector<Beat> beats;
    double t = proc.first_beat_offset;
    while (t < t_end) {
        const double hr = std::clamp(p.base_hr_bpm + p.hr_wander_amplitude *
                                                         std::sin(2.0 * M_PI * proc.hr_wander_freq * t +
                                                                  proc.hr_wander_phase),
                                     30.0, 220.0);
        double interval = 60.0 / hr;
        if (p.rhythm == Rhythm::irregular) {
            interval *= std::exp(0.25 * proc.beat_rng.normal());
        }
        beats.push_back({t, interval});
        t += interval;
    }
    return beats;
}

}  // namespace detail

// One min-max-normalized window of window_s seconds at fs_hz starting at
// absolute time t0 within the subject's continuous process.
inline std::pair<SignalWindow, WindowLabels> synth_window(const SynthSubjectProfile& profile,
                                                          double t0, double window_s = 30.0,
                                                          double fs_hz = 40.0) {
    validate(profile);
    if (!(window_s > 0.0) || !(fs_hz > 0.0)) throw InvalidInput("synth_window: bad geometry");
    detail::SubjectProcess proc(profile);
    const double t_end = t0 + window_s;
    const std::vector<detail::Beat> beats = detail::beat_grid(profile, proc, t_end + 2.0);

    const Index n = static_cast<Index>(std::llround(window_s * fs_hz));
    Vector<double> values = Vector<double>::Zero(n);

    // Beat morphology: unit systolic bump + scaled dicrotic bump, widths
    // proportional to the local interval.
    for (const auto& beat : beats) {
        const double T = beat.interval;
        const double sys_c = beat.time + 0.30 * T;
        const double sys_w = 0.10 * T;
        const double dic_c = beat.time + 0.62 * T;
        const double dic_w = 0.09 * T;
        const double reach = 4.0 * std::max(sys_w, dic_w);
        const Index lo = std::max<Index>(0, static_cast<Index>(std::floor((sys_c - reach - t0) * fs_hz)));
        const Index hi = std::min<Index>(n - 1, static_cast<Index>(std::ceil((dic_c + reach - t0) * fs_hz)));
        for (Index m = lo; m <= hi; ++m) {
            const double t = t0 + static_cast<double>(m) / fs_hz;
            const double ds = (t - sys_c) / sys_w;
            const double dd = (t - dic_c) / dic_w;
            values[m] += std::exp(-0.5 * ds * ds) +
                         0.45 * profile.dicrotic_strength * std::exp(-0.5 * dd * dd);
        }
    }

    // Respiratory baseline wander and white noise; the noise stream is keyed
    // by (seed, t0) so identical calls reproduce identical windows.
    std::uint64_t t0_bits;
    std::memcpy(&t0_bits, &t0, sizeof(t0_bits));
    Rng noise = Rng(profile.seed).child(0x6e6f).child(t0_bits);
    for (Index m = 0; m < n; ++m) {
        const double t = t0 + static_cast<double>(m) / fs_hz;
        values[m] += profile.baseline_wander_amplitude *
                     std::sin(2.0 * M_PI * proc.resp_freq * t + proc.resp_phase);
        if (profile.noise_sigma > 0.0) values[m] += profile.noise_sigma * noise.normal();
    }

    // Fractional beat count over [t0, t_end), scaled to beats per minute.
    double fractional_beats = 0.0;
    for (const auto& beat : beats) {
        const double lo = std::max(beat.time, t0);
        const double hi = std::min(beat.time + beat.interval, t_end);
        if (hi > lo) fractional_beats += (hi - lo) / beat.interval;
    }

    SignalWindow w;
    w.values = values.cast<Real>();
    w.subject_id = "S" + std::to_string(profile.seed % 1000000);
    w = minmax_normalize(w);

    WindowLabels labels;
    labels.hr_bpm = fractional_beats * 60.0 / window_s;
    labels.rr_brpm = proc.resp_freq * 60.0;
    labels.af_class = profile.rhythm == Rhythm::irregular ? 1 : 0;
    return {std::move(w), labels};
}

// Profile sampling ranges for corpus generation.
struct CorpusSpec {
    Index n_subjects = 10;
    Index windows_per_subject = 10;
    std::string label_task = "all";  // hr | rr | af | all
    std::uint64_t master_seed = 0;
    double hr_lo = 40.0, hr_hi = 180.0;
    double hr_wander_lo = 0.5, hr_wander_hi = 5.0;
    double dicrotic_lo = 0.2, dicrotic_hi = 0.9;
    double noise_lo = 0.005, noise_hi = 0.04;
    double baseline_wander_lo = 0.05, baseline_wander_hi = 0.25;
    double irregular_fraction = 0.3;
    double window_s = 30.0;
    double fs_hz = 40.0;
};

inline SynthSubjectProfile sample_profile(const CorpusSpec& spec, Rng& rng,
                                          std::uint64_t subject_index) {
    SynthSubjectProfile p;
    p.base_hr_bpm = rng.uniform(spec.hr_lo, spec.hr_hi);
    p.hr_wander_amplitude = rng.uniform(spec.hr_wander_lo, spec.hr_wander_hi);
    p.dicrotic_strength = rng.uniform(spec.dicrotic_lo, spec.dicrotic_hi);
    p.noise_sigma = rng.uniform(spec.noise_lo, spec.noise_hi);
    p.baseline_wander_amplitude = rng.uniform(spec.baseline_wander_lo, spec.baseline_wander_hi);
    p.rhythm = rng.uniform() < spec.irregular_fraction ? Rhythm::irregular : Rhythm::regular;
    p.seed = splitmix64(spec.master_seed ^ splitmix64(0x50524f46ULL + subject_index));
    return p;
}

}  // namespace ppgfm
