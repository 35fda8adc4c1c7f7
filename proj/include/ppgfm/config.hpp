#pragma once

#include <cstdint>
#include <string>

#include "ppgfm/errors.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

struct ModelConfig {
    Index d_model = 64;
    Index n_layers = 4;
    Index n_heads = 4;
    Index d_ffn = 256;
    Index patch_size = 40;
    Index max_patches = 64;
    double rope_base = 10000.0;
    std::string preset_name = "micro";

    Index head_dim() const { return d_model / n_heads; }

    bool operator==(const ModelConfig& o) const {
        return d_model == o.d_model && n_layers == o.n_layers && n_heads == o.n_heads &&
               d_ffn == o.d_ffn && patch_size == o.patch_size && max_patches == o.max_patches &&
               rope_base == o.rope_base;
    }
};

inline void validate(const ModelConfig& cfg) {
    if (cfg.d_model < 1 || cfg.n_layers < 1 || cfg.n_heads < 1 || cfg.d_ffn < 1 ||
        cfg.patch_size < 1 || cfg.max_patches < 1) {
        throw InvalidConfig("model config: all dimensions must be >= 1");
    }
    if (cfg.d_model % cfg.n_heads != 0) {
        throw InvalidConfig("model config: d_model must be divisible by n_heads");
    }
    if ((cfg.d_model / cfg.n_heads) % 2 != 0) {
        throw InvalidConfig("model config: head dimension must be even for rotary pairs");
    }
    if (!(cfg.rope_base > 0.0)) throw InvalidConfig("model config: rope_base must be positive");
}

// Named scale presets. Only `micro` is expected to train in tests; the
// larger presets are size-matched stand-ins checked via param_count.
inline ModelConfig preset(const std::string& name) {
    ModelConfig c;
    c.preset_name = name;
    if (name == "micro") {
        c.d_model = 64;
        c.n_layers = 4;
        c.n_heads = 4;
        c.d_ffn = 256;
    } else if (name == "19M") {
        c.d_model = 384;
        c.n_layers = 10;
        c.n_heads = 6;
        c.d_ffn = 1536;
    } else if (name == "85M") {
        c.d_model = 640;
        c.n_layers = 16;
        c.n_heads = 10;
        c.d_ffn = 2560;
    } else if (name == "345M") {
        c.d_model = 1024;
        c.n_layers = 26;
        c.n_heads = 16;
        c.d_ffn = 4096;
    } else if (name == "1B") {
        c.d_model = 1536;
        c.n_layers = 36;
        c.n_heads = 16;
        c.d_ffn = 6144;
    } else {
        throw InvalidConfig("unknown preset: " + name);
    }
    validate(c);
    return c;
}

// Exact closed-form count of all trainable parameters.
inline std::int64_t param_count(const ModelConfig& cfg) {
    validate(cfg);
    const std::int64_t d = cfg.d_model;
    const std::int64_t f = cfg.d_ffn;
    const std::int64_t p = cfg.patch_size;
    const std::int64_t embed = p * d + d;
    const std::int64_t start = d;
    const std::int64_t per_layer = 2 * d        // two RMSNorm gains
                                   + 4 * d * d  // Q, K, V, O projections
                                   + 3 * d * f; // gated FFN
    const std::int64_t head = d * 2 * p + 2 * p;
    return embed + start + cfg.n_layers * per_layer + head;
}

}  // namespace ppgfm
