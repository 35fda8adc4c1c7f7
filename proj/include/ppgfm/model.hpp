#pragma once

// The decoder-only transformer: linear patch embedding with a learnable
// start vector, pre-norm residual blocks (RMSNorm -> rotary attention,
// RMSNorm -> gated FFN), and the signal modeling head producing per-point
// (mu, b). Forward passes cache activations so the hand-written backward
// pass can produce exact parameter gradients; everything is deterministic
// given (config, seed, input).

#include <cmath>
#include <vector>

#include "ppgfm/config.hpp"
#include "ppgfm/errors.hpp"
#include "ppgfm/loss.hpp"
#include "ppgfm/rng.hpp"
#include "ppgfm/signal.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

enum class AttentionMode { causal, bidirectional };

template <class S>
struct DecoderLayer {
    Vector<S> norm1_gain, norm2_gain;
    Matrix<S> wq, wk, wv, wo;  // each d x d
    Matrix<S> w1;              // d_ffn x d (down projection)
    Matrix<S> w2, w3;          // d x d_ffn (gate and value projections)
};

template <class S>
struct BasicModel {
    ModelConfig config;
    Matrix<S> embed_w;    // P x d
    Vector<S> embed_b;    // d
    Vector<S> start_vec;  // d, prepended in place of a start token
    std::vector<DecoderLayer<S>> layers;
    Matrix<S> head_w;  // d x 2P, columns [mu | raw_b]
    Vector<S> head_b;  // 2P
};

using Model = BasicModel<Real>;

// ---------------------------------------------------------------------------
// Parameter traversal (canonical order, shared by init, checkpoints, optim)
// ---------------------------------------------------------------------------

template <class S>
struct ParamTensor {
    std::string name;
    S* data = nullptr;
    Index rows = 0, cols = 0;
    bool decay = false;  // weight decay applies (2-D projection weights only)

    Index size() const { return rows * cols; }
    // Element (r, c) independent of Eigen's storage order.
    S& at(Index r, Index c) const { return data[c * rows + r]; }
};

// Canonical enumeration: embed_w, embed_b, start_vec, then per layer
// norm1_gain, wq, wk, wv, wo, norm2_gain, w2, w3, w1, then head_w, head_b.
// Serialization writes each tensor row-major in this order.
template <class S>
std::vector<ParamTensor<S>> param_tensors(BasicModel<S>& m) {
    std::vector<ParamTensor<S>> out;
    auto add = [&out](const std::string& name, auto& t, bool decay) {
        out.push_back({name, t.data(), t.rows(), t.cols(), decay});
    };
    add("embed_w", m.embed_w, true);
    add("embed_b", m.embed_b, false);
    add("start_vec", m.start_vec, false);
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        add(p + "norm1_gain", m.layers[l].norm1_gain, false);
        add(p + "wq", m.layers[l].wq, true);
        add(p + "wk", m.layers[l].wk, true);
        add(p + "wv", m.layers[l].wv, true);
        add(p + "wo", m.layers[l].wo, true);
        add(p + "norm2_gain", m.layers[l].norm2_gain, false);
        add(p + "w2", m.layers[l].w2, true);
        add(p + "w3", m.layers[l].w3, true);
        add(p + "w1", m.layers[l].w1, true);
    }
    add("head_w", m.head_w, true);
    add("head_b", m.head_b, false);
    return out;
}

template <class S>
std::int64_t count_params(BasicModel<S>& m) {
    std::int64_t total = 0;
    for (const auto& t : param_tensors(m)) total += t.size();
    return total;
}

template <class S>
void allocate(BasicModel<S>& m, const ModelConfig& cfg) {
    const Index d = cfg.d_model, f = cfg.d_ffn, p = cfg.patch_size;
    m.config = cfg;
    m.embed_w.setZero(p, d);
    m.embed_b.setZero(d);
    m.start_vec.setZero(d);
    m.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    for (auto& layer : m.layers) {
        layer.norm1_gain.setZero(d);
        layer.norm2_gain.setZero(d);
        layer.wq.setZero(d, d);
        layer.wk.setZero(d, d);
        layer.wv.setZero(d, d);
        layer.wo.setZero(d, d);
        layer.w1.setZero(f, d);
        layer.w2.setZero(d, f);
        layer.w3.setZero(d, f);
    }
    m.head_w.setZero(d, 2 * p);
    m.head_b.setZero(2 * p);
}

template <class S>
BasicModel<S> zeros_like(const BasicModel<S>& m) {
    BasicModel<S> g;
    allocate(g, m.config);
    return g;
}

namespace detail {

template <class S, class T>
void fill_uniform_rowmajor(T& tensor, Rng& rng, double bound) {
    for (Index r = 0; r < tensor.rows(); ++r)
        for (Index c = 0; c < tensor.cols(); ++c)
            tensor(r, c) = static_cast<S>(rng.uniform(-bound, bound));
}

}  // namespace detail

// Deterministic initialization: uniform with bound 1/sqrt(fan_in); the
// residual output projections (wo, w1) are further scaled by 1/sqrt(2L).
template <class S>
BasicModel<S> build_model(const ModelConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    BasicModel<S> m;
    allocate(m, cfg);
    Rng rng(seed);
    const double d = static_cast<double>(cfg.d_model);
    const double f = static_cast<double>(cfg.d_ffn);
    const double p = static_cast<double>(cfg.patch_size);
    const double resid_scale = 1.0 / std::sqrt(2.0 * static_cast<double>(cfg.n_layers));

    detail::fill_uniform_rowmajor<S>(m.embed_w, rng, 1.0 / std::sqrt(p));
    m.embed_b.setZero();
    detail::fill_uniform_rowmajor<S>(m.start_vec, rng, 1.0 / std::sqrt(d));
    for (auto& layer : m.layers) {
        layer.norm1_gain.setOnes();
        detail::fill_uniform_rowmajor<S>(layer.wq, rng, 1.0 / std::sqrt(d));
        detail::fill_uniform_rowmajor<S>(layer.wk, rng, 1.0 / std::sqrt(d));
        detail::fill_uniform_rowmajor<S>(layer.wv, rng, 1.0 / std::sqrt(d));
        detail::fill_uniform_rowmajor<S>(layer.wo, rng, resid_scale / std::sqrt(d));
        layer.norm2_gain.setOnes();
        detail::fill_uniform_rowmajor<S>(layer.w2, rng, 1.0 / std::sqrt(d));
        detail::fill_uniform_rowmajor<S>(layer.w3, rng, 1.0 / std::sqrt(d));
        detail::fill_uniform_rowmajor<S>(layer.w1, rng, resid_scale / std::sqrt(f));
    }
    detail::fill_uniform_rowmajor<S>(m.head_w, rng, 1.0 / std::sqrt(d));
    m.head_b.setZero();
    return m;
}

inline Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
    return build_model<Real>(cfg, seed);
}

// ---------------------------------------------------------------------------
// Small kernels
// ---------------------------------------------------------------------------

// Row-normalized to unit root-mean-square (pre-gain).
template <class S>
RowVector<S> rms_normalize(const RowVector<S>& row, S eps = S(1e-6)) {
    const S r = std::sqrt(row.squaredNorm() / static_cast<S>(row.size()) + eps);
    return row / r;
}

template <class S>
S silu(S x) {
    return x * sigmoid(x);
}

namespace detail {

constexpr double kRmsEps = 1e-6;
constexpr double kScaleFloor = 1e-4;  // floor added to softplus(raw) for b

// Rotation table for rotary embedding: pair t at position i is rotated by
// angle i * base^(-2t/head_dim).
template <class S>
struct RopeTable {
    Matrix<S> cosv, sinv;  // n x head_dim/2

    RopeTable(Index n, Index head_dim, double base) {
        const Index half = head_dim / 2;
        cosv.resize(n, half);
        sinv.resize(n, half);
        for (Index i = 0; i < n; ++i) {
            for (Index t = 0; t < half; ++t) {
                const double freq = std::pow(base, -2.0 * static_cast<double>(t) /
                                                       static_cast<double>(head_dim));
                const double angle = static_cast<double>(i) * freq;
                cosv(i, t) = static_cast<S>(std::cos(angle));
                sinv(i, t) = static_cast<S>(std::sin(angle));
            }
        }
    }
};

// Apply the rotation (or its inverse for backward) in place to a stacked
// (B*N) x d matrix, per head, position = row index within each sequence.
template <class S>
void rope_apply(Matrix<S>& x, Index batch, Index n, Index n_heads, Index head_dim,
                const RopeTable<S>& table, bool inverse) {
    const Index half = head_dim / 2;
    for (Index s = 0; s < batch; ++s) {
        for (Index i = 0; i < n; ++i) {
            const Index row = s * n + i;
            for (Index h = 0; h < n_heads; ++h) {
                const Index base_col = h * head_dim;
                for (Index t = 0; t < half; ++t) {
                    const S c = table.cosv(i, t);
                    const S sn = inverse ? -table.sinv(i, t) : table.sinv(i, t);
                    const S a = x(row, base_col + 2 * t);
                    const S b = x(row, base_col + 2 * t + 1);
                    x(row, base_col + 2 * t) = a * c - b * sn;
                    x(row, base_col + 2 * t + 1) = a * sn + b * c;
                }
            }
        }
    }
}

template <class S>
struct LayerCache {
    Matrix<S> x_in;      // residual stream entering the layer
    Vector<S> inv_rms1;  // per-row 1/rms of x_in
    Matrix<S> normed1;   // rmsnorm(x_in) * gain
    Matrix<S> q, k, v;   // q, k post-rope
    std::vector<Matrix<S>> attn;  // batch*n_heads softmax matrices (N x N)
    Matrix<S> attn_concat;        // per-head A*V, concatenated
    Matrix<S> x_mid;              // x_in + attention output
    Vector<S> inv_rms2;
    Matrix<S> normed2;
    Matrix<S> ffn_u, ffn_v;  // normed2*w2, normed2*w3
};

template <class S>
struct ForwardCache {
    Index batch = 0, n = 0;
    AttentionMode mode = AttentionMode::causal;
    Matrix<S> inputs;  // (B*N) x P embedding inputs; start rows zero
    Matrix<S> h_in;
    std::vector<LayerCache<S>> layers;
    Matrix<S> h_out;
    Matrix<S> head_mu, head_raw, head_b;  // (B*N) x P each
};

template <class S>
void rmsnorm_rows(const Matrix<S>& x, const Vector<S>& gain, Matrix<S>& out, Vector<S>& inv_rms) {
    const Index rows = x.rows(), d = x.cols();
    out.resize(rows, d);
    inv_rms.resize(rows);
    for (Index r = 0; r < rows; ++r) {
        const S rms = std::sqrt(x.row(r).squaredNorm() / static_cast<S>(d) + S(kRmsEps));
        inv_rms[r] = S(1) / rms;
        out.row(r) = (x.row(r) * inv_rms[r]).cwiseProduct(gain.transpose());
    }
}

// dL/dx and gain gradient for y = gain .* x / rms(x).
template <class S>
void rmsnorm_backward(const Matrix<S>& x, const Vector<S>& gain, const Vector<S>& inv_rms,
                      const Matrix<S>& dy, Matrix<S>& dx, Vector<S>& dgain) {
    const Index rows = x.rows(), d = x.cols();
    dx.resize(rows, d);
    for (Index r = 0; r < rows; ++r) {
        const S ir = inv_rms[r];
        const RowVector<S> gdy = dy.row(r).cwiseProduct(gain.transpose());
        const S dot = gdy.dot(x.row(r));
        dx.row(r) = gdy * ir - x.row(r) * (dot * ir * ir * ir / static_cast<S>(d));
        dgain += dy.row(r).cwiseProduct(x.row(r) * ir).transpose();
    }
}

// Runs the decoder stack over an already-embedded input, filling the cache.
template <class S>
void run_layers(const BasicModel<S>& m, const Matrix<S>& h_in, Index batch, Index n,
                AttentionMode mode, ForwardCache<S>& cache) {
    const ModelConfig& cfg = m.config;
    const Index d = cfg.d_model, heads = cfg.n_heads, hd = cfg.head_dim();
    const S scale = S(1.0 / std::sqrt(static_cast<double>(hd)));
    const RopeTable<S> rope(n, hd, cfg.rope_base);

    cache.batch = batch;
    cache.n = n;
    cache.mode = mode;
    cache.h_in = h_in;
    cache.layers.clear();
    cache.layers.resize(m.layers.size());

    Matrix<S> x = h_in;
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
        const DecoderLayer<S>& layer = m.layers[l];
        LayerCache<S>& lc = cache.layers[l];
        lc.x_in = x;

        rmsnorm_rows(lc.x_in, layer.norm1_gain, lc.normed1, lc.inv_rms1);
        lc.q.noalias() = lc.normed1 * layer.wq;
        lc.k.noalias() = lc.normed1 * layer.wk;
        lc.v.noalias() = lc.normed1 * layer.wv;
        rope_apply(lc.q, batch, n, heads, hd, rope, false);
        rope_apply(lc.k, batch, n, heads, hd, rope, false);

        lc.attn.assign(static_cast<std::size_t>(batch * heads), Matrix<S>());
        lc.attn_concat.setZero(batch * n, d);
        for (Index s = 0; s < batch; ++s) {
            for (Index h = 0; h < heads; ++h) {
                const auto qb = lc.q.block(s * n, h * hd, n, hd);
                const auto kb = lc.k.block(s * n, h * hd, n, hd);
                const auto vb = lc.v.block(s * n, h * hd, n, hd);
                Matrix<S>& a = lc.attn[static_cast<std::size_t>(s * heads + h)];
                a.setZero(n, n);
                for (Index i = 0; i < n; ++i) {
                    const Index limit = (mode == AttentionMode::causal) ? i + 1 : n;
                    RowVector<S> scores = (qb.row(i) * kb.topRows(limit).transpose()) * scale;
                    const S mx = scores.maxCoeff();
                    const RowVector<S> ex = (scores.array() - mx).exp().matrix();
                    a.row(i).head(limit) = ex / ex.sum();
                }
                lc.attn_concat.block(s * n, h * hd, n, hd).noalias() = a * vb;
            }
        }
        lc.x_mid.noalias() = lc.x_in + lc.attn_concat * layer.wo;

        rmsnorm_rows(lc.x_mid, layer.norm2_gain, lc.normed2, lc.inv_rms2);
        lc.ffn_u.noalias() = lc.normed2 * layer.w2;
        lc.ffn_v.noalias() = lc.normed2 * layer.w3;
        const Matrix<S> z =
            lc.ffn_u.unaryExpr([](S u) { return silu(u); }).cwiseProduct(lc.ffn_v);
        x.noalias() = lc.x_mid + z * layer.w1;
    }
    cache.h_out = std::move(x);
    if (!cache.h_out.allFinite()) {
        throw NumericalFailure("decode: non-finite activations");
    }
}

template <class S>
void apply_head(const BasicModel<S>& m, ForwardCache<S>& cache) {
    const Index p = m.config.patch_size;
    Matrix<S> o = (cache.h_out * m.head_w).rowwise() + m.head_b.transpose();
    cache.head_mu = o.leftCols(p);
    cache.head_raw = o.rightCols(p);
    cache.head_b =
        cache.head_raw.unaryExpr([](S r) { return softplus(r) + S(kScaleFloor); });
}

// Stacked embedding of B equal-length sequences: row s*n is the start
// vector; row s*n+i (i >= 1) embeds input patch row i-1 of sequence s.
// `inputs` rows corresponding to start slots must be zero; masked patches
// are represented by zeroed input rows (the bias still applies).
template <class S>
Matrix<S> embed_rows(const BasicModel<S>& m, const Matrix<S>& inputs, Index batch, Index n) {
    Matrix<S> h = (inputs * m.embed_w).rowwise() + m.embed_b.transpose();
    for (Index s = 0; s < batch; ++s) h.row(s * n) = m.start_vec.transpose();
    return h;
}

template <class S>
void forward_batch(const BasicModel<S>& m, const Matrix<S>& inputs, Index batch, Index n,
                   AttentionMode mode, ForwardCache<S>& cache, bool with_head = true) {
    cache.inputs = inputs;
    const Matrix<S> h_in = embed_rows(m, inputs, batch, n);
    run_layers(m, h_in, batch, n, mode, cache);
    if (with_head) apply_head(m, cache);
}

// Backward through head, decoder stack and embedding. d_mu/d_b are gradients
// w.r.t. the head outputs ((B*N) x P, may be empty for a task-only pass);
// d_hidden_extra (optional) is an additional gradient on the final hidden
// states, e.g. from an attention-pooling task branch.
template <class S>
void backward_batch(const BasicModel<S>& m, const ForwardCache<S>& cache, const Matrix<S>& d_mu,
                    const Matrix<S>& d_b, const Matrix<S>& d_hidden_extra, BasicModel<S>& grads) {
    const ModelConfig& cfg = m.config;
    const Index d = cfg.d_model, heads = cfg.n_heads, hd = cfg.head_dim(), p = cfg.patch_size;
    const Index batch = cache.batch, n = cache.n;
    const Index rows = batch * n;
    const S scale = S(1.0 / std::sqrt(static_cast<double>(hd)));
    const RopeTable<S> rope(n, hd, cfg.rope_base);

    Matrix<S> dx = Matrix<S>::Zero(rows, d);
    if (d_mu.size() > 0) {
        // b = softplus(raw) + floor, so d_raw = d_b * sigmoid(raw).
        Matrix<S> d_o(rows, 2 * p);
        d_o.leftCols(p) = d_mu;
        d_o.rightCols(p) =
            d_b.cwiseProduct(cache.head_raw.unaryExpr([](S r) { return sigmoid(r); }));
        grads.head_w.noalias() += cache.h_out.transpose() * d_o;
        grads.head_b += d_o.colwise().sum().transpose();
        dx.noalias() += d_o * m.head_w.transpose();
    }
    if (d_hidden_extra.size() > 0) dx += d_hidden_extra;

    for (std::size_t li = m.layers.size(); li-- > 0;) {
        const DecoderLayer<S>& layer = m.layers[li];
        const LayerCache<S>& lc = cache.layers[li];
        DecoderLayer<S>& gl = grads.layers[li];

        // FFN block: x_out = x_mid + (silu(u) .* v) w1
        const Matrix<S> sil = lc.ffn_u.unaryExpr([](S u) { return silu(u); });
        const Matrix<S> z = sil.cwiseProduct(lc.ffn_v);
        gl.w1.noalias() += z.transpose() * dx;
        const Matrix<S> dz = dx * layer.w1.transpose();
        const Matrix<S> ds = dz.cwiseProduct(lc.ffn_v);
        const Matrix<S> dv = dz.cwiseProduct(sil);
        const Matrix<S> du = ds.cwiseProduct(lc.ffn_u.unaryExpr([](S u) {
            const S sg = sigmoid(u);
            return sg * (S(1) + u * (S(1) - sg));
        }));
        gl.w2.noalias() += lc.normed2.transpose() * du;
        gl.w3.noalias() += lc.normed2.transpose() * dv;
        Matrix<S> d_normed2 = du * layer.w2.transpose() + dv * layer.w3.transpose();
        Matrix<S> d_xmid;
        rmsnorm_backward(lc.x_mid, layer.norm2_gain, lc.inv_rms2, d_normed2, d_xmid,
                         gl.norm2_gain);
        d_xmid += dx;  // residual branch

        // Attention block: x_mid = x_in + concat_h(A_h V_h) wo
        gl.wo.noalias() += lc.attn_concat.transpose() * d_xmid;
        const Matrix<S> d_concat = d_xmid * layer.wo.transpose();
        Matrix<S> dq = Matrix<S>::Zero(rows, d);
        Matrix<S> dk = Matrix<S>::Zero(rows, d);
        Matrix<S> dvfull = Matrix<S>::Zero(rows, d);
        for (Index s = 0; s < batch; ++s) {
            for (Index h = 0; h < heads; ++h) {
                const Matrix<S>& a = lc.attn[static_cast<std::size_t>(s * heads + h)];
                const auto qb = lc.q.block(s * n, h * hd, n, hd);
                const auto kb = lc.k.block(s * n, h * hd, n, hd);
                const auto vb = lc.v.block(s * n, h * hd, n, hd);
                const auto dzb = d_concat.block(s * n, h * hd, n, hd);
                const Matrix<S> da = dzb * vb.transpose();
                dvfull.block(s * n, h * hd, n, hd).noalias() = a.transpose() * dzb;
                // softmax backward row-wise; rows of `a` are zero beyond the
                // causal limit, which zeroes masked score gradients too.
                Matrix<S> dscore(n, n);
                for (Index i = 0; i < n; ++i) {
                    const S dot = a.row(i).dot(da.row(i));
                    dscore.row(i) = a.row(i).cwiseProduct((da.row(i).array() - dot).matrix());
                }
                dq.block(s * n, h * hd, n, hd).noalias() = dscore * kb * scale;
                dk.block(s * n, h * hd, n, hd).noalias() = dscore.transpose() * qb * scale;
            }
        }
        rope_apply(dq, batch, n, heads, hd, rope, true);
        rope_apply(dk, batch, n, heads, hd, rope, true);
        gl.wq.noalias() += lc.normed1.transpose() * dq;
        gl.wk.noalias() += lc.normed1.transpose() * dk;
        gl.wv.noalias() += lc.normed1.transpose() * dvfull;
        Matrix<S> d_normed1 =
            dq * layer.wq.transpose() + dk * layer.wk.transpose() + dvfull * layer.wv.transpose();
        Matrix<S> d_xin;
        rmsnorm_backward(lc.x_in, layer.norm1_gain, lc.inv_rms1, d_normed1, d_xin, gl.norm1_gain);
        dx = d_xin + d_xmid;  // residual branch
    }

    // Embedding: start slots feed the start vector, the rest the linear embed.
    for (Index s = 0; s < batch; ++s) {
        grads.start_vec += dx.row(s * n).transpose();
        dx.row(s * n).setZero();
    }
    grads.embed_w.noalias() += cache.inputs.transpose() * dx;
    grads.embed_b += dx.colwise().sum().transpose();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Public single-sequence operations
// ---------------------------------------------------------------------------

// {h_s, e(x_1), ..., e(x_{N-1})}: the final patch is never embedded.
template <class S>
Matrix<S> embed_sequence(const BasicModel<S>& m, const BasicPatchSequence<S>& ps) {
    if (!ps.squashed) throw InvalidInput("embed_sequence: input must be squashed");
    const Index n = ps.n_patches();
    if (n < 1) throw InvalidInput("embed_sequence: empty sequence");
    if (n > m.config.max_patches) throw SequenceTooLong("embed_sequence: sequence exceeds max_patches");
    if (ps.patch_size() != m.config.patch_size) {
        throw InvalidInput("embed_sequence: patch size does not match model");
    }
    Matrix<S> inputs = Matrix<S>::Zero(n, m.config.patch_size);
    inputs.bottomRows(n - 1) = ps.patches.topRows(n - 1);
    return detail::embed_rows(m, inputs, 1, n);
}

template <class S>
Matrix<S> decode(const BasicModel<S>& m, const Matrix<S>& h_in, AttentionMode mode) {
    if (h_in.cols() != m.config.d_model) throw InvalidInput("decode: hidden width mismatch");
    detail::ForwardCache<S> cache;
    detail::run_layers(m, h_in, 1, h_in.rows(), mode, cache);
    return cache.h_out;
}

// Per position i, the (mu, b) parameters for every point of target patch
// row i (the patch following position i's last input).
template <class S>
BasicLaplaceParams<S> signal_head(const BasicModel<S>& m, const Matrix<S>& h) {
    if (h.cols() != m.config.d_model) throw InvalidInput("signal_head: hidden width mismatch");
    const Index p = m.config.patch_size;
    Matrix<S> o = (h * m.head_w).rowwise() + m.head_b.transpose();
    BasicLaplaceParams<S> out;
    out.mu = o.leftCols(p);
    out.b = o.rightCols(p).unaryExpr([](S r) { return softplus(r) + S(detail::kScaleFloor); });
    return out;
}

template <class S>
BasicLaplaceParams<S> predict_params(const BasicModel<S>& m, const BasicPatchSequence<S>& ps,
                                     AttentionMode mode = AttentionMode::causal) {
    return signal_head(m, decode(m, embed_sequence(m, ps), mode));
}

// Mean next-patch NLL of one squashed sequence under the model.
template <class S>
BasicNllReport<S> model_nll(const BasicModel<S>& m, const BasicPatchSequence<S>& ps,
                            AttentionMode mode = AttentionMode::causal) {
    return sequence_nll(ps, predict_params(m, ps, mode));
}

}  // namespace ppgfm
