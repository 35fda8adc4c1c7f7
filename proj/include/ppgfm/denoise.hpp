#pragma once

// Sequential masked-patch denoising: masked patches are reconstructed left
// to right from the model's mu predictions (the distribution median mapped
// back to signal units); reconstructed patches feed later positions
// autoregressively, unmasked patches pass through untouched.

#include <algorithm>
#include <cmath>
#include <vector>

#include "ppgfm/errors.hpp"
#include "ppgfm/loss.hpp"
#include "ppgfm/model.hpp"
#include "ppgfm/rng.hpp"
#include "ppgfm/signal.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

// Reconstruct a squashed sequence under a patch mask (true = masked). The
// first patch must be unmasked: no left context exists to predict it.
// Returns the window in normalized [0, 1] units; unmasked points are the
// exact unsquash of the input.
template <class S>
BasicSignalWindow<S> denoise(const BasicModel<S>& m, const BasicPatchSequence<S>& ps,
                             const BoolArray& mask) {
    if (!ps.squashed) throw InvalidInput("denoise: input must be squashed");
    const Index n = ps.n_patches();
    const Index p = ps.patch_size();
    if (mask.size() != n) throw InvalidInput("denoise: mask length mismatch");
    if (n >= 1 && mask[0]) throw InvalidInput("denoise: patch 1 cannot be masked");

    BasicPatchSequence<S> work = ps;
    for (Index i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        // Position i predicts patch row i; rows >= i of the working copy do
        // not influence it under causal attention.
        const BasicLaplaceParams<S> params = predict_params(m, work, AttentionMode::causal);
        for (Index j = 0; j < p; ++j) {
            const S median = sigmoid(params.mu(i, j));
            work.patches(i, j) = std::clamp(median, S(0.1), S(0.9));
        }
    }

    BasicSignalWindow<S> out;
    out.values.resize(n * p);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < p; ++j) {
            out.values[i * p + j] = unsquash(mask[i] ? work.patches(i, j) : ps.patches(i, j));
        }
    }
    return out;
}

// Mask covering round(ratio * (N-1)) patches drawn uniformly without
// replacement from patches 2..N.
inline BoolArray random_patch_mask(Index n, double ratio, Rng& rng) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw InvalidInput("random_patch_mask: ratio outside [0, 1)");
    BoolArray mask = BoolArray::Constant(n, false);
    const Index count = static_cast<Index>(std::llround(ratio * static_cast<double>(n - 1)));
    for (Index pick : rng.sample_without_replacement(n - 1, count)) {
        mask[pick + 1] = true;
    }
    return mask;
}

// MAE between reconstruction and ground truth over masked points only.
template <class S>
double masked_mae(const BasicSignalWindow<S>& reconstruction, const BasicSignalWindow<S>& truth,
                  const BoolArray& mask, Index patch_size) {
    if (reconstruction.values.size() != truth.values.size()) {
        throw InvalidInput("masked_mae: length mismatch");
    }
    double total = 0.0;
    Index count = 0;
    for (Index i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        for (Index j = 0; j < patch_size; ++j) {
            const Index idx = i * patch_size + j;
            total += std::abs(static_cast<double>(reconstruction.values[idx]) -
                              static_cast<double>(truth.values[idx]));
            ++count;
        }
    }
    if (count == 0) return 0.0;
    return total / static_cast<double>(count);
}

struct DenoiseSweepResult {
    std::vector<double> mask_ratios;
    std::vector<double> mae_per_ratio;
    Index n_samples = 0;
};

// Masked-region reconstruction MAE as a function of mask ratio. Ratios must
// be strictly increasing inside (0, 1); masks are drawn per (window, ratio)
// from the given seed.
template <class S>
DenoiseSweepResult denoise_sweep(const BasicModel<S>& m,
                                 const std::vector<BasicPatchSequence<S>>& sequences,
                                 const std::vector<double>& ratios, std::uint64_t seed) {
    if (sequences.empty()) throw InvalidInput("denoise_sweep: no sequences");
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        if (!(ratios[i] > 0.0 && ratios[i] < 1.0)) {
            throw InvalidInput("denoise_sweep: ratios must lie in (0, 1)");
        }
        if (i > 0 && !(ratios[i] > ratios[i - 1])) {
            throw InvalidInput("denoise_sweep: ratios must be strictly increasing");
        }
    }
    DenoiseSweepResult result;
    result.mask_ratios = ratios;
    result.n_samples = static_cast<Index>(sequences.size());
    Rng rng(seed);
    for (std::size_t r = 0; r < ratios.size(); ++r) {
        double total = 0.0;
        Index counted = 0;
        for (std::size_t w = 0; w < sequences.size(); ++w) {
            const auto& ps = sequences[w];
            Rng mask_rng = rng.child((static_cast<std::uint64_t>(r) << 32) ^ w);
            const BoolArray mask = random_patch_mask(ps.n_patches(), ratios[r], mask_rng);
            if (!mask.any()) continue;
            const BasicSignalWindow<S> truth = unpatchify(unsquash(ps));
            const BasicSignalWindow<S> recon = denoise(m, ps, mask);
            total += masked_mae(recon, truth, mask, ps.patch_size());
            ++counted;
        }
        result.mae_per_ratio.push_back(counted > 0 ? total / static_cast<double>(counted) : 0.0);
    }
    return result;
}

}  // namespace ppgfm
