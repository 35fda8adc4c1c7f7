#pragma once

// Optimization loops: pre-training on the next-patch generative objective,
// mixed-objective fine-tuning (full or frozen backbone, causal or masked
// bidirectional), and unlabeled test-time adaptation. Runs are deterministic
// given (seed, config, data order).

#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ppgfm/errors.hpp"
#include "ppgfm/heads.hpp"
#include "ppgfm/loss.hpp"
#include "ppgfm/model.hpp"
#include "ppgfm/optim.hpp"
#include "ppgfm/rng.hpp"
#include "ppgfm/signal.hpp"
#include "ppgfm/util.hpp"

namespace ppgfm {

struct FinetuneConfig {
    double lambda0 = 1.0;  // annealed linearly to zero over total_steps
    FinetuneMode mode = FinetuneMode::full;
    AttentionMode attention = AttentionMode::causal;
    double mask_fraction = 0.25;  // bidirectional masking rate
    bool use_fallback = false;
};

inline void validate(const FinetuneConfig& cfg) {
    if (cfg.lambda0 < 0.0) throw InvalidConfig("finetune config: lambda0 must be nonnegative");
    if (cfg.attention == AttentionMode::bidirectional &&
        !(cfg.mask_fraction > 0.0 && cfg.mask_fraction < 1.0)) {
        throw InvalidConfig("finetune config: mask_fraction must lie in (0, 1)");
    }
}

struct TrainConfig {
    Index batch_size = 16;
    std::int64_t total_steps = 1000;
    double learning_rate = 1e-3;
    std::int64_t warmup_steps = 100;
    double grad_clip_norm = 1.0;
    std::uint64_t seed = 0;
    OptimConfig optim;
};

inline void validate(const TrainConfig& cfg) {
    if (cfg.batch_size < 1) throw InvalidConfig("train config: batch_size must be >= 1");
    if (cfg.total_steps < 0) throw InvalidConfig("train config: total_steps must be >= 0");
    if (!(cfg.learning_rate > 0.0)) throw InvalidConfig("train config: learning_rate must be positive");
    if (cfg.warmup_steps < 0 || cfg.warmup_steps > cfg.total_steps) {
        throw InvalidConfig("train config: warmup_steps must lie in [0, total_steps]");
    }
    if (!(cfg.grad_clip_norm > 0.0)) throw InvalidConfig("train config: grad_clip_norm must be positive");
}

struct StepRecord {
    std::int64_t step = 0;
    double loss = 0.0;
    double lambda = 0.0;
    double lr = 0.0;
    double grad_norm = 0.0;
    double wall_ms = 0.0;  // elapsed since run start
};

struct TrainLog {
    std::vector<StepRecord> records;
    std::int64_t start_unix_ms = 0;
};

inline std::string train_log_csv(const TrainLog& log, const ReproHeader& header = {}) {
    std::string out = header.render();
    out += "# started_unix_ms=" + std::to_string(log.start_unix_ms) + "\n";
    out += "step,loss,lambda,lr,grad_norm\n";
    for (const auto& r : log.records) {
        out += std::to_string(r.step) + "," + format_double(r.loss) + "," +
               format_double(r.lambda) + "," + format_double(r.lr) + "," +
               format_double(r.grad_norm) + "\n";
    }
    return out;
}

template <class S>
struct BasicLabeledSequence {
    BasicPatchSequence<S> ps;
    double label = 0.0;
    std::string subject_id;
};

using LabeledSequence = BasicLabeledSequence<Real>;

namespace detail {

inline std::int64_t unix_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

// Epoch-reshuffled batch stream. Indices are bucketed by sequence length so
// every batch is rectangular; batch order interleaves buckets deterministically.
class BatchSampler {
public:
    BatchSampler(const std::vector<Index>& lengths, Index batch_size, Rng rng)
        : batch_size_(batch_size), rng_(rng) {
        std::map<Index, std::vector<Index>> buckets;
        for (std::size_t i = 0; i < lengths.size(); ++i) {
            buckets[lengths[i]].push_back(static_cast<Index>(i));
        }
        for (auto& [len, idx] : buckets) buckets_.push_back(std::move(idx));
        refill();
    }

    const std::vector<Index>& next() {
        if (cursor_ == queue_.size()) refill();
        return queue_[cursor_++];
    }

private:
    void refill() {
        queue_.clear();
        cursor_ = 0;
        for (auto& bucket : buckets_) {
            rng_.shuffle(bucket);
            for (std::size_t start = 0; start < bucket.size(); start += batch_size_) {
                const std::size_t stop = std::min(bucket.size(), start + batch_size_);
                queue_.emplace_back(bucket.begin() + static_cast<std::ptrdiff_t>(start),
                                    bucket.begin() + static_cast<std::ptrdiff_t>(stop));
            }
        }
        rng_.shuffle(queue_);
    }

    std::size_t batch_size_;
    Rng rng_;
    std::vector<std::vector<Index>> buckets_;
    std::vector<std::vector<Index>> queue_;
    std::size_t cursor_ = 0;
};

// Stacked inputs and targets for a batch of equal-length sequences.
// Input row s*n+i (i >= 1) holds patch row i-1; target row s*n+i holds patch
// row i. masked_positions (optional, per sequence) lists prediction
// positions whose following input patch is zeroed out.
template <class S, class GetSeq>
void stack_batch(GetSeq&& seq_at, Index batch, Index n, Matrix<S>& inputs, Matrix<S>& targets,
                 const std::vector<std::vector<Index>>* masked_positions = nullptr) {
    const BasicPatchSequence<S>& first = seq_at(0);
    const Index p = first.patch_size();
    inputs.setZero(batch * n, p);
    targets.resize(batch * n, p);
    for (Index s = 0; s < batch; ++s) {
        const BasicPatchSequence<S>& ps = seq_at(s);
        if (!ps.squashed) throw InvalidInput("training: sequences must be squashed");
        if (ps.n_patches() != n || ps.patch_size() != p) {
            throw InvalidInput("training: ragged batch");
        }
        inputs.block(s * n + 1, 0, n - 1, p) = ps.patches.topRows(n - 1);
        targets.block(s * n, 0, n, p) = ps.patches;
        if (masked_positions) {
            for (Index pos : (*masked_positions)[static_cast<std::size_t>(s)]) {
                inputs.row(s * n + pos + 1).setZero();
            }
        }
    }
}

// Mean logit-Laplace NLL over valid positions; accumulates d_mu / d_b
// (already divided by the number of contributing points) when requested.
template <class S>
double nll_loss_and_grads(const Matrix<S>& targets, const ForwardCache<S>& cache,
                          const std::vector<std::vector<Index>>* valid_positions, Index batch,
                          Index n, Matrix<S>* d_mu, Matrix<S>* d_b) {
    const Index p = targets.cols();
    Index valid_rows = 0;
    double total = 0.0;
    std::vector<char> row_valid(static_cast<std::size_t>(batch * n), 0);
    if (valid_positions) {
        for (Index s = 0; s < batch; ++s) {
            for (Index pos : (*valid_positions)[static_cast<std::size_t>(s)]) {
                row_valid[static_cast<std::size_t>(s * n + pos)] = 1;
                ++valid_rows;
            }
        }
    } else {
        std::fill(row_valid.begin(), row_valid.end(), 1);
        valid_rows = batch * n;
    }
    if (valid_rows == 0) throw InvalidInput("training: no valid prediction positions");
    const double denom = static_cast<double>(valid_rows) * static_cast<double>(p);

    for (Index r = 0; r < batch * n; ++r) {
        if (!row_valid[static_cast<std::size_t>(r)]) continue;
        for (Index j = 0; j < p; ++j) {
            const S x = targets(r, j);
            const S mu = cache.head_mu(r, j);
            const S b = cache.head_b(r, j);
            total += static_cast<double>(logit_laplace_nll(x, mu, b));
            if (d_mu) {
                const NllGrad<S> g = nll_gradients(x, mu, b);
                (*d_mu)(r, j) += static_cast<S>(static_cast<double>(g.d_mu) / denom);
                (*d_b)(r, j) += static_cast<S>(static_cast<double>(g.d_b) / denom);
            }
        }
    }
    return total / denom;
}

}  // namespace detail

// Prediction positions to mask for bidirectional reconstruction: each chosen
// position i (0 <= i <= N-2) gets input patch i+1 zeroed and contributes its
// NLL term; ceil(mask_fraction * (N-1)) positions per sequence.
inline std::vector<Index> plan_bidirectional_positions(Index n, double mask_fraction, Rng& rng) {
    if (n < 2) throw InvalidInput("bidirectional masking: need at least 2 patches");
    if (!(mask_fraction > 0.0 && mask_fraction < 1.0)) {
        throw InvalidInput("bidirectional masking: mask_fraction must lie in (0, 1)");
    }
    const Index maskable = n - 1;
    const Index count = static_cast<Index>(
        std::ceil(mask_fraction * static_cast<double>(maskable) - 1e-12));
    return rng.sample_without_replacement(maskable, std::max<Index>(count, 1));
}

// Masked-next-patch reconstruction loss with bidirectional attention. The
// ground truth of a masked position enters only as the loss target, never
// through the input path.
template <class S>
double bidirectional_modeling_loss(const BasicModel<S>& m, const BasicPatchSequence<S>& ps,
                                   double mask_fraction, Rng& rng,
                                   std::vector<Index>* positions_out = nullptr) {
    const Index n = ps.n_patches();
    std::vector<Index> positions = plan_bidirectional_positions(n, mask_fraction, rng);
    std::vector<std::vector<Index>> masked{positions};
    Matrix<S> inputs, targets;
    detail::stack_batch<S>([&](Index) -> const BasicPatchSequence<S>& { return ps; }, 1, n, inputs,
                           targets, &masked);
    detail::ForwardCache<S> cache;
    detail::forward_batch(m, inputs, 1, n, AttentionMode::bidirectional, cache);
    const double loss =
        detail::nll_loss_and_grads<S>(targets, cache, &masked, 1, n, nullptr, nullptr);
    if (positions_out) *positions_out = std::move(positions);
    return loss;
}

// ---------------------------------------------------------------------------
// Pre-training
// ---------------------------------------------------------------------------

template <class S>
TrainLog pretrain(BasicModel<S>& m, const std::vector<BasicPatchSequence<S>>& data,
                  const TrainConfig& cfg) {
    validate(cfg);
    if (data.empty()) throw InvalidInput("pretrain: empty dataset");
    std::vector<Index> lengths;
    lengths.reserve(data.size());
    for (const auto& ps : data) {
        if (!ps.squashed) throw InvalidInput("pretrain: sequences must be squashed");
        if (ps.n_patches() > m.config.max_patches) {
            throw SequenceTooLong("pretrain: sequence exceeds max_patches");
        }
        lengths.push_back(ps.n_patches());
    }

    TrainLog log;
    log.start_unix_ms = detail::unix_ms_now();
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.total_steps == 0) return log;

    AdamW<S> opt(cfg.optim);
    auto params = param_tensors(m);
    BasicModel<S> grads = zeros_like(m);
    auto grad_tensors = param_tensors(grads);
    detail::BatchSampler sampler(lengths, cfg.batch_size, Rng(cfg.seed));

    Matrix<S> inputs, targets, d_mu, d_b;
    for (std::int64_t step = 0; step < cfg.total_steps; ++step) {
        const auto& batch_idx = sampler.next();
        const Index batch = static_cast<Index>(batch_idx.size());
        const Index n = data[static_cast<std::size_t>(batch_idx[0])].n_patches();
        detail::stack_batch<S>(
            [&](Index s) -> const BasicPatchSequence<S>& {
                return data[static_cast<std::size_t>(batch_idx[static_cast<std::size_t>(s)])];
            },
            batch, n, inputs, targets);

        detail::ForwardCache<S> cache;
        detail::forward_batch(m, inputs, batch, n, AttentionMode::causal, cache);
        d_mu.setZero(batch * n, m.config.patch_size);
        d_b.setZero(batch * n, m.config.patch_size);
        const double loss =
            detail::nll_loss_and_grads<S>(targets, cache, nullptr, batch, n, &d_mu, &d_b);
        if (!std::isfinite(loss)) {
            throw NumericalFailure("pretrain: non-finite loss at step " + std::to_string(step));
        }

        for (auto& g : grad_tensors) std::fill(g.data, g.data + g.size(), S(0));
        detail::backward_batch(m, cache, d_mu, d_b, Matrix<S>(), grads);
        const double gnorm = global_grad_norm(grad_tensors);
        if (!std::isfinite(gnorm)) {
            throw NumericalFailure("pretrain: non-finite gradient at step " + std::to_string(step));
        }
        if (gnorm > cfg.grad_clip_norm) scale_grads(grad_tensors, cfg.grad_clip_norm / gnorm);
        const double lr = lr_at(cfg.learning_rate, step, cfg.warmup_steps, cfg.total_steps);
        opt.step(params, grad_tensors, lr);

        StepRecord rec;
        rec.step = step;
        rec.loss = loss;
        rec.lambda = 0.0;
        rec.lr = lr;
        rec.grad_norm = gnorm;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        log.records.push_back(rec);
    }
    return log;
}

// Unlabeled adaptation: fine-tunes the backbone with the signal modeling
// loss on ceil(fraction * |pool|) sequences; any task head is untouched.
template <class S>
TrainLog test_time_adapt(BasicModel<S>& m, const std::vector<BasicPatchSequence<S>>& unlabeled,
                         double fraction, const TrainConfig& cfg) {
    if (unlabeled.empty()) throw InvalidInput("test_time_adapt: empty pool");
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw InvalidInput("test_time_adapt: fraction must lie in (0, 1]");
    }
    const Index take = static_cast<Index>(
        std::ceil(fraction * static_cast<double>(unlabeled.size()) - 1e-12));
    Rng rng(cfg.seed);
    std::vector<Index> order = rng.sample_without_replacement(
        static_cast<Index>(unlabeled.size()), std::max<Index>(take, 1));
    std::vector<BasicPatchSequence<S>> subset;
    subset.reserve(order.size());
    for (Index i : order) subset.push_back(unlabeled[static_cast<std::size_t>(i)]);
    return pretrain(m, subset, cfg);
}

// ---------------------------------------------------------------------------
// Fine-tuning
// ---------------------------------------------------------------------------

namespace detail {

template <class S>
struct FrozenFeatures {
    std::vector<Matrix<S>> features;   // per window, N x d
    std::vector<double> modeling_nll;  // causal mean NLL under frozen weights
    std::vector<double> likelihood;    // exp(-nll)
};

template <class S>
FrozenFeatures<S> precompute_frozen_features(const BasicModel<S>& m,
                                             const std::vector<BasicLabeledSequence<S>>& data,
                                             AttentionMode feature_mode) {
    FrozenFeatures<S> out;
    out.features.reserve(data.size());
    out.modeling_nll.reserve(data.size());
    out.likelihood.reserve(data.size());
    for (const auto& ex : data) {
        const Matrix<S> h_in = embed_sequence(m, ex.ps);
        Matrix<S> h_causal = decode(m, h_in, AttentionMode::causal);
        const auto report = sequence_nll(ex.ps, signal_head(m, h_causal));
        out.modeling_nll.push_back(report.mean_nll);
        out.likelihood.push_back(report.sequence_likelihood);
        out.features.push_back(feature_mode == AttentionMode::causal
                                   ? std::move(h_causal)
                                   : decode(m, h_in, AttentionMode::bidirectional));
    }
    return out;
}

}  // namespace detail

// Mixed-objective fine-tuning. In full mode the backbone and head both train
// (task gradient plus lambda-weighted signal modeling gradient); in frozen
// mode backbone features, modeling NLL and likelihoods are precomputed with
// the pre-trained weights and only the head trains. Regression labels are
// standardized internally; the statistics are stored on the head.
template <class S>
TrainLog finetune(BasicModel<S>& m, BasicTaskHead<S>& head,
                  const std::vector<BasicLabeledSequence<S>>& data, const TrainConfig& cfg,
                  const FinetuneConfig& ft) {
    validate(cfg);
    validate(ft);
    if (data.empty()) throw InvalidInput("finetune: empty dataset");
    if (ft.use_fallback && !head.fallback) {
        throw InvalidConfig("finetune: fallback enabled but head has no fallback parameters");
    }
    for (const auto& ex : data) {
        if (!ex.ps.squashed) throw InvalidInput("finetune: sequences must be squashed");
        if (ex.ps.n_patches() > m.config.max_patches) {
            throw SequenceTooLong("finetune: sequence exceeds max_patches");
        }
        if (head.task_kind == TaskKind::classification) {
            const auto c = static_cast<Index>(ex.label);
            if (c < 0 || c >= head.output_dim || static_cast<double>(c) != ex.label) {
                throw InvalidInput("finetune: class label out of range");
            }
        }
    }

    if (head.task_kind == TaskKind::regression) {
        double mean = 0.0;
        for (const auto& ex : data) mean += ex.label;
        mean /= static_cast<double>(data.size());
        double var = 0.0;
        for (const auto& ex : data) var += (ex.label - mean) * (ex.label - mean);
        var /= static_cast<double>(data.size());
        head.label_mean = static_cast<S>(mean);
        head.label_scale = static_cast<S>(std::sqrt(var) > 1e-12 ? std::sqrt(var) : 1.0);
    }

    TrainLog log;
    log.start_unix_ms = detail::unix_ms_now();
    const auto t0 = std::chrono::steady_clock::now();
    if (cfg.total_steps == 0) return log;

    const bool frozen = ft.mode == FinetuneMode::frozen_backbone;
    const bool bidir_masked = !frozen && ft.attention == AttentionMode::bidirectional;

    detail::FrozenFeatures<S> cached;
    if (frozen) cached = detail::precompute_frozen_features(m, data, ft.attention);

    AdamW<S> opt(cfg.optim);
    BasicModel<S> model_grads = zeros_like(m);
    BasicTaskHead<S> head_grads = zeros_like(head);
    std::vector<ParamTensor<S>> params = param_tensors(head);
    std::vector<ParamTensor<S>> grad_tensors = param_tensors(head_grads);
    if (!frozen) {
        auto mp = param_tensors(m);
        auto mg = param_tensors(model_grads);
        params.insert(params.begin(), mp.begin(), mp.end());
        grad_tensors.insert(grad_tensors.begin(), mg.begin(), mg.end());
    }

    std::vector<Index> lengths;
    lengths.reserve(data.size());
    for (const auto& ex : data) lengths.push_back(ex.ps.n_patches());
    Rng run_rng(cfg.seed);
    detail::BatchSampler sampler(lengths, cfg.batch_size, run_rng.child(1));
    Rng mask_rng = run_rng.child(2);

    auto standardized = [&](double label) {
        return head.task_kind == TaskKind::regression
                   ? (label - static_cast<double>(head.label_mean)) /
                         static_cast<double>(head.label_scale)
                   : label;
    };

    Matrix<S> inputs, targets, d_mu, d_b, d_hidden;
    for (std::int64_t step = 0; step < cfg.total_steps; ++step) {
        const double lambda = lambda_schedule(ft.lambda0, step, cfg.total_steps);
        const auto& batch_idx = sampler.next();
        const Index batch = static_cast<Index>(batch_idx.size());
        const auto example = [&](Index s) -> const BasicLabeledSequence<S>& {
            return data[static_cast<std::size_t>(batch_idx[static_cast<std::size_t>(s)])];
        };

        for (auto& g : grad_tensors) std::fill(g.data, g.data + g.size(), S(0));
        double objective_sum = 0.0;
        double modeling = 0.0;

        if (frozen) {
            for (Index s = 0; s < batch; ++s) {
                const Index idx = batch_idx[static_cast<std::size_t>(s)];
                const auto& ex = example(s);
                const Matrix<S>& features = cached.features[static_cast<std::size_t>(idx)];
                TaskBranchCache<S> branch;
                Vector<S> pred = task_branch_forward(
                    head, features, cached.likelihood[static_cast<std::size_t>(idx)],
                    ft.use_fallback, &branch);
                Vector<S> d_pred = Vector<S>::Zero(head.output_dim);
                objective_sum += objective_loss(head.task_kind, pred, standardized(ex.label), &d_pred);
                d_pred /= static_cast<S>(batch);
                Matrix<S> d_features;  // discarded: backbone is frozen
                task_branch_backward(head, features, branch, d_pred, ft.use_fallback, head_grads,
                                     d_features);
                modeling += cached.modeling_nll[static_cast<std::size_t>(idx)];
            }
        } else {
            const Index n = example(0).ps.n_patches();
            std::vector<std::vector<Index>> masked;
            if (bidir_masked) {
                masked.resize(static_cast<std::size_t>(batch));
                for (auto& pos : masked) {
                    pos = plan_bidirectional_positions(n, ft.mask_fraction, mask_rng);
                }
            }
            detail::stack_batch<S>([&](Index s) -> const BasicPatchSequence<S>& { return example(s).ps; },
                                   batch, n, inputs, targets, bidir_masked ? &masked : nullptr);
            detail::ForwardCache<S> cache;
            detail::forward_batch(m, inputs, batch, n, ft.attention, cache);

            d_mu.setZero(batch * n, m.config.patch_size);
            d_b.setZero(batch * n, m.config.patch_size);
            if (lambda > 0.0) {
                modeling = detail::nll_loss_and_grads<S>(
                    targets, cache, bidir_masked ? &masked : nullptr, batch, n, &d_mu, &d_b);
                d_mu *= static_cast<S>(lambda);
                d_b *= static_cast<S>(lambda);
            }

            d_hidden.setZero(batch * n, m.config.d_model);
            for (Index s = 0; s < batch; ++s) {
                const auto& ex = example(s);
                const Matrix<S> features = cache.h_out.middleRows(s * n, n);
                double likelihood = 1.0;
                if (ft.use_fallback) {
                    // Full-mode fallback needs the causal likelihood under the
                    // current weights; treated as a constant in the gradient.
                    likelihood = model_nll(m, ex.ps).sequence_likelihood;
                }
                TaskBranchCache<S> branch;
                Vector<S> pred =
                    task_branch_forward(head, features, likelihood, ft.use_fallback, &branch);
                Vector<S> d_pred = Vector<S>::Zero(head.output_dim);
                objective_sum += objective_loss(head.task_kind, pred, standardized(ex.label), &d_pred);
                d_pred /= static_cast<S>(batch);
                Matrix<S> d_features;
                task_branch_backward(head, features, branch, d_pred, ft.use_fallback, head_grads,
                                     d_features);
                d_hidden.middleRows(s * n, n) += d_features;
            }
            detail::backward_batch(m, cache, lambda > 0.0 ? d_mu : Matrix<S>(),
                                   lambda > 0.0 ? d_b : Matrix<S>(), d_hidden, model_grads);
        }

        const double objective = objective_sum / static_cast<double>(batch);
        const double modeling_mean = frozen ? modeling / static_cast<double>(batch) : modeling;
        const double loss = (!frozen && ft.lambda0 == 0.0)
                                ? objective
                                : mixed_loss(objective, modeling_mean, lambda);
        if (!std::isfinite(loss)) {
            throw NumericalFailure("finetune: non-finite loss at step " + std::to_string(step));
        }

        const double gnorm = global_grad_norm(grad_tensors);
        if (!std::isfinite(gnorm)) {
            throw NumericalFailure("finetune: non-finite gradient at step " + std::to_string(step));
        }
        if (gnorm > cfg.grad_clip_norm) scale_grads(grad_tensors, cfg.grad_clip_norm / gnorm);
        const double lr = lr_at(cfg.learning_rate, step, cfg.warmup_steps, cfg.total_steps);
        opt.step(params, grad_tensors, lr);

        StepRecord rec;
        rec.step = step;
        rec.loss = loss;
        rec.lambda = lambda;
        rec.lr = lr;
        rec.grad_norm = gnorm;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                          .count();
        log.records.push_back(rec);
    }
    return log;
}

}  // namespace ppgfm
