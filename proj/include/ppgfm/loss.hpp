#pragma once

// The logit-Laplace objective: per-point negative log likelihood, its
// analytic gradients, the optimal-scale solution, sequence-level NLL with
// position masking, and the constant-predictor collapse baseline.

#include <cmath>

#include "ppgfm/errors.hpp"
#include "ppgfm/signal.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

template <class S>
S logit(S x) {
    return std::log(x / (S(1) - x));
}

template <class S>
S sigmoid(S x) {
    if (x >= S(0)) {
        return S(1) / (S(1) + std::exp(-x));
    }
    const S e = std::exp(x);
    return e / (S(1) + e);
}

template <class S>
S softplus(S x) {
    if (x > S(20)) return x;
    if (x < S(-20)) return std::exp(x);
    return std::log1p(std::exp(x));
}

// -log f(x; mu, b) for the logit-Laplace density
//   f(x; mu, b) = 1 / (2 b x (1-x)) * exp(-|logit(x) - mu| / b),
// i.e. log(2b) + log x + log(1-x) + |logit(x) - mu| / b.
template <class S>
S logit_laplace_nll(S x, S mu, S b) {
    if (!(x > S(0) && x < S(1))) throw InvalidInput("logit_laplace_nll: x must lie in (0, 1)");
    if (!(b > S(0))) throw InvalidInput("logit_laplace_nll: b must be positive");
    return std::log(S(2) * b) + std::log(x) + std::log(S(1) - x) + std::abs(logit(x) - mu) / b;
}

template <class S>
struct NllGrad {
    S d_mu;
    S d_b;
};

// Analytic gradients of the NLL. At the kink |logit(x) - mu| = 0 the mu
// subgradient is 0 (the minimizer). d_b is written as (1 - |d|/b)/b so the
// stationary point b = |logit(x) - mu| evaluates to exactly zero.
template <class S>
NllGrad<S> nll_gradients(S x, S mu, S b) {
    const S delta = logit(x) - mu;
    const S sign = delta > S(0) ? S(1) : (delta < S(0) ? S(-1) : S(0));
    return {-sign / b, (S(1) - std::abs(delta) / b) / b};
}

// The scale minimizing the NLL for fixed (x, mu): b* = |logit(x) - mu|.
template <class S>
S optimal_scale(S x, S mu) {
    const S d = std::abs(logit(x) - mu);
    if (d == S(0)) throw Degenerate("optimal_scale: logit(x) equals mu, optimum collapses to 0");
    return d;
}

// Per-point (mu, b) predictions aligned with a patch sequence: row i of each
// matrix parameterizes the distribution of patch row i of the target.
template <class S>
struct BasicLaplaceParams {
    Matrix<S> mu;
    Matrix<S> b;
};

using LaplaceParams = BasicLaplaceParams<Real>;

template <class S>
struct BasicNllReport {
    Matrix<S> per_point_nll;  // N x P; rows masked out are still filled
    double mean_nll = 0.0;    // mean over masked-in positions x points
    double sequence_likelihood = 0.0;  // exp(-mean_nll)
};

using NllReport = BasicNllReport<Real>;

// Mean NLL over the masked-in positions of a squashed sequence. valid_mask
// selects prediction positions (rows); masked-out rows contribute nothing.
template <class S>
BasicNllReport<S> sequence_nll(const BasicPatchSequence<S>& ps, const BasicLaplaceParams<S>& params,
                               const BoolArray& valid_mask) {
    if (!ps.squashed) throw InvalidInput("sequence_nll: targets must be squashed");
    const Index n = ps.patches.rows();
    const Index p = ps.patches.cols();
    if (params.mu.rows() != n || params.mu.cols() != p || params.b.rows() != n || params.b.cols() != p) {
        throw InvalidInput("sequence_nll: parameter shape does not match targets");
    }
    if (valid_mask.size() != n) throw InvalidInput("sequence_nll: mask length does not match");
    if (!valid_mask.any()) throw InvalidInput("sequence_nll: all positions masked out");

    BasicNllReport<S> report;
    report.per_point_nll.resize(n, p);
    double total = 0.0;
    Index included = 0;
    for (Index i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (Index j = 0; j < p; ++j) {
            const S v = logit_laplace_nll(ps.patches(i, j), params.mu(i, j), params.b(i, j));
            report.per_point_nll(i, j) = v;
            row_sum += static_cast<double>(v);
        }
        if (valid_mask[i]) {
            total += row_sum;
            ++included;
        }
    }
    report.mean_nll = total / static_cast<double>(included * p);
    report.sequence_likelihood = std::exp(-report.mean_nll);
    return report;
}

template <class S>
BasicNllReport<S> sequence_nll(const BasicPatchSequence<S>& ps, const BasicLaplaceParams<S>& params) {
    return sequence_nll(ps, params, BoolArray::Constant(ps.patches.rows(), true));
}

// Sequence likelihood L(x) = exp(-mean per-point NLL), the geometric-mean
// per-point likelihood. May exceed 1 for sharply predicted sequences.
template <class S>
double sequence_likelihood(const BasicPatchSequence<S>& ps, const BasicLaplaceParams<S>& params) {
    return sequence_nll(ps, params).sequence_likelihood;
}

// NLL of the degenerate constant predictor mu = logit(0.5) = 0 with
// per-point optimal scale (floored like the model's b parameterization).
// Trained models must beat this bar; an MSE-style collapse cannot.
template <class S>
double collapse_baseline_nll(const BasicPatchSequence<S>& ps) {
    if (!ps.squashed) throw InvalidInput("collapse_baseline_nll: targets must be squashed");
    double total = 0.0;
    for (Index i = 0; i < ps.patches.rows(); ++i) {
        for (Index j = 0; j < ps.patches.cols(); ++j) {
            const S x = ps.patches(i, j);
            const S b = std::max(std::abs(logit(x)), S(1e-4));
            total += static_cast<double>(logit_laplace_nll(x, S(0), b));
        }
    }
    return total / static_cast<double>(ps.patches.size());
}

// Appendix-style lower bound: NLL of the given mu with per-point optimal
// (floored) scale. No b predictor can do better for that mu.
template <class S>
double optimal_scale_bound_nll(const BasicPatchSequence<S>& ps, const Matrix<S>& mu) {
    if (!ps.squashed) throw InvalidInput("optimal_scale_bound_nll: targets must be squashed");
    if (mu.rows() != ps.patches.rows() || mu.cols() != ps.patches.cols()) {
        throw InvalidInput("optimal_scale_bound_nll: mu shape does not match targets");
    }
    double total = 0.0;
    for (Index i = 0; i < ps.patches.rows(); ++i) {
        for (Index j = 0; j < ps.patches.cols(); ++j) {
            const S x = ps.patches(i, j);
            const S b = std::max(std::abs(logit(x) - mu(i, j)), S(1e-4));
            total += static_cast<double>(logit_laplace_nll(x, mu(i, j), b));
        }
    }
    return total / static_cast<double>(ps.patches.size());
}

}  // namespace ppgfm
