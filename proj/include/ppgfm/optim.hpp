#pragma once

// Adaptive-moment optimizer with decoupled weight decay, the warmup/cosine
// learning-rate schedule, and global gradient-norm clipping. State is keyed
// by tensor visit order, so the same parameter enumeration must be used on
// every step.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ppgfm/errors.hpp"
#include "ppgfm/model.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

struct OptimConfig {
    double beta1 = 0.9;
    double beta2 = 0.95;
    double eps = 1e-8;
    double weight_decay = 0.01;  // decoupled; applied to 2-D weights only
};

// Linear warmup to `lr`, then cosine decay to zero at total_steps.
inline double lr_at(double lr, std::int64_t step, std::int64_t warmup_steps,
                    std::int64_t total_steps) {
    if (warmup_steps > 0 && step < warmup_steps) {
        return lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
    }
    const std::int64_t span = total_steps - warmup_steps;
    if (span <= 0) return lr;
    const double progress = static_cast<double>(step - warmup_steps) / static_cast<double>(span);
    return lr * 0.5 * (1.0 + std::cos(M_PI * std::min(1.0, progress)));
}

template <class S>
double global_grad_norm(const std::vector<ParamTensor<S>>& grads) {
    double sq = 0.0;
    for (const auto& g : grads) {
        for (Index i = 0; i < g.size(); ++i) {
            const double v = static_cast<double>(g.data[i]);
            sq += v * v;
        }
    }
    return std::sqrt(sq);
}

template <class S>
void scale_grads(const std::vector<ParamTensor<S>>& grads, double factor) {
    for (const auto& g : grads) {
        for (Index i = 0; i < g.size(); ++i) {
            g.data[i] = static_cast<S>(static_cast<double>(g.data[i]) * factor);
        }
    }
}

template <class S>
class AdamW {
public:
    explicit AdamW(OptimConfig cfg = {}) : cfg_(cfg) {}

    const OptimConfig& config() const { return cfg_; }

    void step(const std::vector<ParamTensor<S>>& params, const std::vector<ParamTensor<S>>& grads,
              double lr) {
        if (params.size() != grads.size()) throw InvalidInput("optimizer: tensor list mismatch");
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(static_cast<std::size_t>(params[i].size()), S(0));
                v_[i].assign(static_cast<std::size_t>(params[i].size()), S(0));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const auto& p = params[i];
            const auto& g = grads[i];
            if (p.size() != g.size()) throw InvalidInput("optimizer: shape mismatch");
            S* m = m_[i].data();
            S* v = v_[i].data();
            for (Index j = 0; j < p.size(); ++j) {
                const double gj = static_cast<double>(g.data[j]);
                const double mj = cfg_.beta1 * static_cast<double>(m[j]) + (1.0 - cfg_.beta1) * gj;
                const double vj =
                    cfg_.beta2 * static_cast<double>(v[j]) + (1.0 - cfg_.beta2) * gj * gj;
                m[j] = static_cast<S>(mj);
                v[j] = static_cast<S>(vj);
                double update = (mj / bc1) / (std::sqrt(vj / bc2) + cfg_.eps);
                if (p.decay) update += cfg_.weight_decay * static_cast<double>(p.data[j]);
                p.data[j] = static_cast<S>(static_cast<double>(p.data[j]) - lr * update);
            }
        }
    }

private:
    OptimConfig cfg_;
    std::int64_t t_ = 0;
    std::vector<std::vector<S>> m_, v_;
};

}  // namespace ppgfm
