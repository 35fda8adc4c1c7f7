#pragma once

// Task heads and fine-tuning primitives: attention pooling, the gated MLP
// prediction module, objective losses, the mixed-loss combination with
// lambda annealing, and the likelihood-weighted fallback combination.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "ppgfm/errors.hpp"
#include "ppgfm/loss.hpp"
#include "ppgfm/model.hpp"
#include "ppgfm/rng.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

enum class TaskKind { regression, classification };

enum class FinetuneMode { full, frozen_backbone };

template <class S>
struct FallbackParams {
    Vector<S> y_fallback;  // same shape as the prediction
    S delta = S(0.1);      // likelihood floor in the fallback denominator
};

template <class S>
struct BasicTaskHead {
    TaskKind task_kind = TaskKind::regression;
    Index output_dim = 1;   // 1 for regression, C for classification
    Index hidden_dim = 0;   // gated-MLP hidden width
    Vector<S> pool_w;       // d_model
    Matrix<S> w1;           // hidden x output
    Matrix<S> w2, w3;       // d_model x hidden
    std::optional<FallbackParams<S>> fallback;
    // Regression labels are standardized inside the head; predictions are
    // mapped back to label units at the output.
    S label_mean = S(0);
    S label_scale = S(1);
};

using TaskHead = BasicTaskHead<Real>;

template <class S>
std::vector<ParamTensor<S>> param_tensors(BasicTaskHead<S>& h) {
    std::vector<ParamTensor<S>> out;
    auto add = [&out](const std::string& name, auto& t, bool decay) {
        out.push_back({name, t.data(), t.rows(), t.cols(), decay});
    };
    add("head.pool_w", h.pool_w, false);
    add("head.w2", h.w2, true);
    add("head.w3", h.w3, true);
    add("head.w1", h.w1, true);
    if (h.fallback) add("head.y_fallback", h.fallback->y_fallback, false);
    return out;
}

// pool_w starts at zero (uniform pooling) and y_fallback at zero (fallback
// is a no-op until trained); the MLP follows the backbone's init scheme.
template <class S>
BasicTaskHead<S> make_task_head(const ModelConfig& cfg, TaskKind kind, Index output_dim,
                                std::uint64_t seed, bool with_fallback = false,
                                Index hidden_dim = 0) {
    if (output_dim < 1) throw InvalidConfig("task head: output_dim must be >= 1");
    if (kind == TaskKind::regression && output_dim != 1) {
        throw InvalidConfig("task head: regression output_dim must be 1");
    }
    BasicTaskHead<S> h;
    h.task_kind = kind;
    h.output_dim = output_dim;
    h.hidden_dim = hidden_dim > 0 ? hidden_dim : cfg.d_model;
    h.pool_w = Vector<S>::Zero(cfg.d_model);
    h.w1.resize(h.hidden_dim, output_dim);
    h.w2.resize(cfg.d_model, h.hidden_dim);
    h.w3.resize(cfg.d_model, h.hidden_dim);
    Rng rng(seed);
    detail::fill_uniform_rowmajor<S>(h.w2, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_model)));
    detail::fill_uniform_rowmajor<S>(h.w3, rng, 1.0 / std::sqrt(static_cast<double>(cfg.d_model)));
    detail::fill_uniform_rowmajor<S>(h.w1, rng, 1.0 / std::sqrt(static_cast<double>(h.hidden_dim)));
    if (with_fallback) {
        FallbackParams<S> fb;
        fb.y_fallback = Vector<S>::Zero(output_dim);
        h.fallback = fb;
    }
    return h;
}

template <class S>
BasicTaskHead<S> zeros_like(const BasicTaskHead<S>& h) {
    BasicTaskHead<S> g = h;
    g.pool_w.setZero();
    g.w1.setZero();
    g.w2.setZero();
    g.w3.setZero();
    if (g.fallback) g.fallback->y_fallback.setZero();
    return g;
}

// ---------------------------------------------------------------------------
// Attention pooling: AP(H) = softmax(H w)^T H
// ---------------------------------------------------------------------------

template <class S>
Vector<S> attention_pool_weights(const Matrix<S>& h, const Vector<S>& pool_w) {
    if (h.rows() < 1) throw InvalidInput("attention_pool: empty feature matrix");
    Vector<S> scores = h * pool_w;
    const S mx = scores.maxCoeff();
    Vector<S> ex = (scores.array() - mx).exp().matrix();
    return ex / ex.sum();
}

template <class S>
Vector<S> attention_pool(const Matrix<S>& h, const Vector<S>& pool_w) {
    return h.transpose() * attention_pool_weights(h, pool_w);
}

// Gradients of pooled = H^T a, a = softmax(H w): fills d_h and accumulates
// into d_pool_w given the upstream gradient on the pooled vector.
template <class S>
void attention_pool_backward(const Matrix<S>& h, const Vector<S>& pool_w,
                             const Vector<S>& weights, const Vector<S>& d_pooled, Matrix<S>& d_h,
                             Vector<S>& d_pool_w) {
    const Vector<S> da = h * d_pooled;                    // dL/da_i
    const S dot = weights.dot(da);
    const Vector<S> ds = weights.cwiseProduct((da.array() - dot).matrix());
    d_h = weights * d_pooled.transpose();                 // through the values
    d_h.noalias() += ds * pool_w.transpose();             // through the scores
    d_pool_w.noalias() += h.transpose() * ds;
}

// ---------------------------------------------------------------------------
// Gated MLP: (SiLU(h^T W2) .* (h^T W3)) W1
// ---------------------------------------------------------------------------

template <class S>
struct GatedMlpCache {
    Vector<S> input;    // pooled feature
    Vector<S> u, v;     // pre-activation gate / value
    Vector<S> z;        // silu(u) .* v
};

template <class S>
Vector<S> gated_mlp(const BasicTaskHead<S>& head, const Vector<S>& h, GatedMlpCache<S>* cache = nullptr) {
    if (h.size() != head.w2.rows()) throw InvalidInput("gated_mlp: input width mismatch");
    Vector<S> u = head.w2.transpose() * h;
    Vector<S> v = head.w3.transpose() * h;
    Vector<S> z = u.unaryExpr([](S x) { return silu(x); }).cwiseProduct(v);
    Vector<S> out = head.w1.transpose() * z;
    if (cache) {
        cache->input = h;
        cache->u = std::move(u);
        cache->v = std::move(v);
        cache->z = std::move(z);
    }
    return out;
}

template <class S>
void gated_mlp_backward(const BasicTaskHead<S>& head, const GatedMlpCache<S>& cache,
                        const Vector<S>& d_out, BasicTaskHead<S>& grads, Vector<S>& d_input) {
    grads.w1.noalias() += cache.z * d_out.transpose();
    const Vector<S> dz = head.w1 * d_out;
    const Vector<S> sil = cache.u.unaryExpr([](S x) { return silu(x); });
    const Vector<S> ds = dz.cwiseProduct(cache.v);
    const Vector<S> dv = dz.cwiseProduct(sil);
    const Vector<S> du = ds.cwiseProduct(cache.u.unaryExpr([](S x) {
        const S sg = sigmoid(x);
        return sg * (S(1) + x * (S(1) - sg));
    }));
    grads.w2.noalias() += cache.input * du.transpose();
    grads.w3.noalias() += cache.input * dv.transpose();
    d_input = head.w2 * du + head.w3 * dv;
}

// ---------------------------------------------------------------------------
// Objective losses
// ---------------------------------------------------------------------------

// Squared error for regression; cross-entropy of softmax(prediction) against
// a class index for classification. d_prediction is accumulated if given.
template <class S>
double objective_loss(TaskKind kind, const Vector<S>& prediction, double label,
                      Vector<S>* d_prediction = nullptr) {
    if (kind == TaskKind::regression) {
        const double err = static_cast<double>(prediction[0]) - label;
        if (d_prediction) (*d_prediction)[0] += static_cast<S>(2.0 * err);
        return err * err;
    }
    const Index c = static_cast<Index>(label);
    if (c < 0 || c >= prediction.size() || static_cast<double>(c) != label) {
        throw InvalidInput("objective_loss: class label out of range");
    }
    const S mx = prediction.maxCoeff();
    Vector<S> ex = (prediction.array() - mx).exp().matrix();
    const S sum = ex.sum();
    const double loss = std::log(static_cast<double>(sum)) -
                        static_cast<double>(prediction[c] - mx);
    if (d_prediction) {
        Vector<S> soft = ex / sum;
        soft[c] -= S(1);
        *d_prediction += soft;
    }
    return loss;
}

// L(y, y', X, X') = L_o + lambda * L_m.
inline double mixed_loss(double objective, double modeling_nll, double lambda) {
    if (lambda < 0.0) throw InvalidInput("mixed_loss: lambda must be nonnegative");
    return objective + lambda * modeling_nll;
}

// Linear anneal to zero: lambda(step) = lambda0 * max(0, 1 - step/total).
inline double lambda_schedule(double lambda0, std::int64_t step, std::int64_t total_steps) {
    if (lambda0 < 0.0) throw InvalidInput("lambda_schedule: lambda0 must be nonnegative");
    if (total_steps <= 0) return 0.0;
    const double frac = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
    return lambda0 * std::max(0.0, frac);
}

// ---------------------------------------------------------------------------
// Fallback combination: y = L(x) P(x) + y_fallback / max(L(x), delta)
// ---------------------------------------------------------------------------

// For classification the result is treated as logits. The likelihood is a
// constant w.r.t. the trainable head parameters (it comes from the frozen
// pre-trained signal model), so gradients flow through P(x) and y_fallback.
template <class S>
Vector<S> fallback_combine(const Vector<S>& prediction, double likelihood,
                           const FallbackParams<S>& fb) {
    if (!(likelihood > 0.0)) throw InvalidInput("fallback_combine: likelihood must be positive");
    if (prediction.size() != fb.y_fallback.size()) {
        throw InvalidInput("fallback_combine: shape mismatch");
    }
    const S lx = static_cast<S>(likelihood);
    return lx * prediction + fb.y_fallback / std::max(lx, fb.delta);
}

template <class S>
void fallback_backward(double likelihood, const FallbackParams<S>& fb, const Vector<S>& d_out,
                       Vector<S>& d_prediction, Vector<S>& d_y_fallback) {
    const S lx = static_cast<S>(likelihood);
    d_prediction += lx * d_out;
    d_y_fallback += d_out / std::max(lx, fb.delta);
}

// ---------------------------------------------------------------------------
// Full task-branch forward (pool -> gated MLP -> optional fallback)
// ---------------------------------------------------------------------------

template <class S>
struct TaskBranchCache {
    Vector<S> pool_weights;
    GatedMlpCache<S> mlp;
    Vector<S> raw_prediction;  // before fallback / label rescaling
    double likelihood = 1.0;
};

// Prediction in internal units (standardized for regression, logits for
// classification). `likelihood` is only consulted when fallback is present.
template <class S>
Vector<S> task_branch_forward(const BasicTaskHead<S>& head, const Matrix<S>& features,
                              double likelihood, bool apply_fallback,
                              TaskBranchCache<S>* cache = nullptr) {
    Vector<S> weights = attention_pool_weights(features, head.pool_w);
    Vector<S> pooled = features.transpose() * weights;
    GatedMlpCache<S> mlp_cache;
    Vector<S> pred = gated_mlp(head, pooled, &mlp_cache);
    Vector<S> out = pred;
    if (apply_fallback && head.fallback) {
        out = fallback_combine(pred, likelihood, *head.fallback);
    }
    if (cache) {
        cache->pool_weights = std::move(weights);
        cache->mlp = std::move(mlp_cache);
        cache->raw_prediction = std::move(pred);
        cache->likelihood = likelihood;
    }
    return out;
}

// Backward of the task branch. d_features receives the gradient w.r.t. the
// feature matrix (for full fine-tuning); head gradients accumulate in grads.
template <class S>
void task_branch_backward(const BasicTaskHead<S>& head, const Matrix<S>& features,
                          const TaskBranchCache<S>& cache, const Vector<S>& d_out,
                          bool apply_fallback, BasicTaskHead<S>& grads, Matrix<S>& d_features) {
    Vector<S> d_pred = Vector<S>::Zero(head.output_dim);
    if (apply_fallback && head.fallback) {
        fallback_backward(cache.likelihood, *head.fallback, d_out, d_pred,
                          grads.fallback->y_fallback);
    } else {
        d_pred = d_out;
    }
    Vector<S> d_pooled;
    gated_mlp_backward(head, cache.mlp, d_pred, grads, d_pooled);
    attention_pool_backward(features, head.pool_w, cache.pool_weights, d_pooled, d_features,
                            grads.pool_w);
}

// Label-space prediction for one sequence: regression outputs are mapped
// back to label units; classification outputs are logits.
template <class S>
Vector<S> predict(const BasicModel<S>& m, const BasicTaskHead<S>& head,
                  const BasicPatchSequence<S>& ps, AttentionMode mode = AttentionMode::causal,
                  bool apply_fallback = false) {
    const Matrix<S> features = decode(m, embed_sequence(m, ps), mode);
    double likelihood = 1.0;
    if (apply_fallback && head.fallback) {
        // The likelihood is always the causal chain-rule likelihood of the
        // signal model, independent of the feature-extraction mode.
        likelihood = sequence_nll(ps, signal_head(m, decode(m, embed_sequence(m, ps),
                                                            AttentionMode::causal)))
                         .sequence_likelihood;
    }
    Vector<S> out = task_branch_forward(head, features, likelihood, apply_fallback);
    if (head.task_kind == TaskKind::regression) {
        out[0] = out[0] * head.label_scale + head.label_mean;
    }
    return out;
}

}  // namespace ppgfm
