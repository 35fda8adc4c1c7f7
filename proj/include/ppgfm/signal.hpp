#pragma once

// Deterministic signal preparation: resampling, windowing, min-max
// normalization, the invertible boundary squash, and patching. All
// operations are pure functions on value types.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ppgfm/errors.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

template <class S>
struct BasicRawRecording {
    Vector<S> samples;
    S sampling_rate_hz = S(0);
    std::string subject_id;
};

template <class S>
struct BasicSignalWindow {
    Vector<S> values;
    std::string subject_id;
    std::optional<double> label;
};

// A window reshaped into N non-overlapping rows of P points. Row i holds
// values[i*P, (i+1)*P). `squashed` marks that entries live in [0.1, 0.9].
template <class S>
struct BasicPatchSequence {
    Matrix<S> patches;
    bool squashed = false;

    Index n_patches() const { return patches.rows(); }
    Index patch_size() const { return patches.cols(); }
};

using RawRecording = BasicRawRecording<Real>;
using SignalWindow = BasicSignalWindow<Real>;
using PatchSequence = BasicPatchSequence<Real>;

// Linear interpolation onto the grid k / target_hz, k = 0..floor(span*target).
// The spanned duration (n-1)/rate is preserved to within one sample period,
// and resampling at the original rate reproduces the input exactly.
template <class S>
BasicRawRecording<S> resample(const BasicRawRecording<S>& rec, double target_hz) {
    if (rec.samples.size() == 0) throw InvalidInput("resample: empty recording");
    if (!(target_hz > 0.0)) throw InvalidInput("resample: target rate must be positive");
    const Index n = rec.samples.size();
    const double rate_in = static_cast<double>(rec.sampling_rate_hz);
    const double span = static_cast<double>(n - 1) / rate_in;
    const Index m = static_cast<Index>(std::floor(span * target_hz + 1e-9)) + 1;

    BasicRawRecording<S> out;
    out.sampling_rate_hz = static_cast<S>(target_hz);
    out.subject_id = rec.subject_id;
    out.samples.resize(m);
    const double step = rate_in / target_hz;  // input-sample units per output sample
    for (Index k = 0; k < m; ++k) {
        const double pos = static_cast<double>(k) * step;
        Index i = static_cast<Index>(std::floor(pos));
        if (i >= n - 1) {
            out.samples[k] = rec.samples[n - 1];
            continue;
        }
        const double frac = pos - static_cast<double>(i);
        if (frac == 0.0) {
            out.samples[k] = rec.samples[i];
        } else {
            out.samples[k] = static_cast<S>((1.0 - frac) * static_cast<double>(rec.samples[i]) +
                                            frac * static_cast<double>(rec.samples[i + 1]));
        }
    }
    return out;
}

// Consecutive non-overlapping windows of window_s seconds; a trailing
// remainder shorter than one window is discarded. A recording shorter than
// one window yields an empty list.
template <class S>
std::vector<BasicSignalWindow<S>> segment(const BasicRawRecording<S>& rec, double window_s) {
    if (!(window_s > 0.0)) throw InvalidInput("segment: window length must be positive");
    if (!(rec.sampling_rate_hz > S(0))) throw InvalidInput("segment: sampling rate must be positive");
    const Index len = static_cast<Index>(std::llround(window_s * static_cast<double>(rec.sampling_rate_hz)));
    if (len <= 0) throw InvalidInput("segment: window shorter than one sample");
    std::vector<BasicSignalWindow<S>> out;
    const Index count = rec.samples.size() / len;
    out.reserve(static_cast<std::size_t>(count));
    for (Index w = 0; w < count; ++w) {
        BasicSignalWindow<S> win;
        win.values = rec.samples.segment(w * len, len);
        win.subject_id = rec.subject_id;
        out.push_back(std::move(win));
    }
    return out;
}

// Order-preserving affine map onto [0, 1] with both endpoints attained.
// Flat windows are rejected: the generative objective needs both extremes
// present so that the squashed values stay strictly inside (0, 1).
template <class S>
BasicSignalWindow<S> minmax_normalize(const BasicSignalWindow<S>& w) {
    if (w.values.size() == 0) throw InvalidInput("minmax_normalize: empty window");
    const S lo = w.values.minCoeff();
    const S hi = w.values.maxCoeff();
    if (static_cast<double>(hi) - static_cast<double>(lo) < 1e-8) {
        throw DegenerateWindow("minmax_normalize: window range below 1e-8");
    }
    BasicSignalWindow<S> out = w;
    out.values = ((w.values.array() - lo) / (hi - lo)).matrix();
    return out;
}

// Invertible boundary transform [0,1] -> [0.1, 0.9]: y = 0.1 + 0.8 x.
template <class S>
S squash(S x) {
    if (!(x >= S(0) && x <= S(1))) throw InvalidInput("squash: input outside [0, 1]");
    return S(0.1) + S(0.8) * x;
}

template <class S>
S unsquash(S y) {
    if (!(y >= S(0.1) - S(1e-6) && y <= S(0.9) + S(1e-6))) {
        throw InvalidInput("unsquash: input outside [0.1, 0.9]");
    }
    return (y - S(0.1)) / S(0.8);
}

template <class S>
BasicPatchSequence<S> squash(const BasicPatchSequence<S>& ps) {
    if (ps.squashed) throw InvalidInput("squash: sequence already squashed");
    BasicPatchSequence<S> out;
    out.patches.resize(ps.patches.rows(), ps.patches.cols());
    for (Index i = 0; i < ps.patches.rows(); ++i)
        for (Index j = 0; j < ps.patches.cols(); ++j) out.patches(i, j) = squash(ps.patches(i, j));
    out.squashed = true;
    return out;
}

template <class S>
BasicPatchSequence<S> unsquash(const BasicPatchSequence<S>& ps) {
    if (!ps.squashed) throw InvalidInput("unsquash: sequence is not squashed");
    BasicPatchSequence<S> out;
    out.patches.resize(ps.patches.rows(), ps.patches.cols());
    for (Index i = 0; i < ps.patches.rows(); ++i)
        for (Index j = 0; j < ps.patches.cols(); ++j) out.patches(i, j) = unsquash(ps.patches(i, j));
    out.squashed = false;
    return out;
}

// Reshape a window of length N*P into N contiguous patches of P points.
template <class S>
BasicPatchSequence<S> patchify(const BasicSignalWindow<S>& w, Index patch_size) {
    if (patch_size <= 0) throw InvalidInput("patchify: patch size must be positive");
    if (w.values.size() == 0 || w.values.size() % patch_size != 0) {
        throw InvalidInput("patchify: window length not divisible by patch size");
    }
    const Index n = w.values.size() / patch_size;
    BasicPatchSequence<S> ps;
    ps.patches.resize(n, patch_size);
    for (Index i = 0; i < n; ++i) {
        ps.patches.row(i) = w.values.segment(i * patch_size, patch_size).transpose();
    }
    return ps;
}

template <class S>
BasicSignalWindow<S> unpatchify(const BasicPatchSequence<S>& ps) {
    BasicSignalWindow<S> w;
    const Index n = ps.patches.rows();
    const Index p = ps.patches.cols();
    w.values.resize(n * p);
    for (Index i = 0; i < n; ++i) {
        w.values.segment(i * p, p) = ps.patches.row(i).transpose();
    }
    return w;
}

// Normalized window -> squashed patch sequence, the model's input unit.
template <class S>
BasicPatchSequence<S> to_model_input(const BasicSignalWindow<S>& w, Index patch_size) {
    return squash(patchify(w, patch_size));
}

}  // namespace ppgfm
