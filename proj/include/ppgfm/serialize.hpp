#pragma once

// JSON (de)serialization for configuration types. nlohmann::json keeps keys
// sorted, so dumps are deterministic.

#include <string>

#include <json.hpp>

#include "ppgfm/config.hpp"
#include "ppgfm/errors.hpp"
#include "ppgfm/heads.hpp"
#include "ppgfm/train.hpp"

namespace ppgfm {

using Json = nlohmann::json;

inline std::string to_string(AttentionMode m) {
    return m == AttentionMode::causal ? "causal" : "bidirectional";
}

inline AttentionMode attention_mode_from_string(const std::string& s) {
    if (s == "causal") return AttentionMode::causal;
    if (s == "bidirectional") return AttentionMode::bidirectional;
    throw InvalidConfig("unknown attention mode: " + s);
}

inline std::string to_string(FinetuneMode m) {
    return m == FinetuneMode::full ? "full" : "frozen_backbone";
}

inline FinetuneMode finetune_mode_from_string(const std::string& s) {
    if (s == "full") return FinetuneMode::full;
    if (s == "frozen_backbone") return FinetuneMode::frozen_backbone;
    throw InvalidConfig("unknown finetune mode: " + s);
}

inline std::string to_string(TaskKind k) {
    return k == TaskKind::regression ? "regression" : "classification";
}

inline TaskKind task_kind_from_string(const std::string& s) {
    if (s == "regression") return TaskKind::regression;
    if (s == "classification") return TaskKind::classification;
    throw InvalidConfig("unknown task kind: " + s);
}

inline Json to_json(const ModelConfig& c) {
    return Json{{"d_model", c.d_model},         {"n_layers", c.n_layers},
                {"n_heads", c.n_heads},         {"d_ffn", c.d_ffn},
                {"patch_size", c.patch_size},   {"max_patches", c.max_patches},
                {"rope_base", c.rope_base},     {"preset_name", c.preset_name}};
}

inline ModelConfig model_config_from_json(const Json& j) {
    ModelConfig c;
    if (j.contains("preset_name") && j.size() == 1) {
        return preset(j.at("preset_name").get<std::string>());
    }
    c.d_model = j.at("d_model").get<Index>();
    c.n_layers = j.at("n_layers").get<Index>();
    c.n_heads = j.at("n_heads").get<Index>();
    c.d_ffn = j.at("d_ffn").get<Index>();
    c.patch_size = j.value("patch_size", Index(40));
    c.max_patches = j.value("max_patches", Index(64));
    c.rope_base = j.value("rope_base", 10000.0);
    c.preset_name = j.value("preset_name", std::string("custom"));
    validate(c);
    return c;
}

inline Json to_json(const TrainConfig& c) {
    return Json{{"batch_size", c.batch_size},
                {"total_steps", c.total_steps},
                {"learning_rate", c.learning_rate},
                {"warmup_steps", c.warmup_steps},
                {"grad_clip_norm", c.grad_clip_norm},
                {"seed", c.seed},
                {"beta1", c.optim.beta1},
                {"beta2", c.optim.beta2},
                {"weight_decay", c.optim.weight_decay}};
}

inline TrainConfig train_config_from_json(const Json& j) {
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.total_steps = j.value("total_steps", c.total_steps);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.grad_clip_norm = j.value("grad_clip_norm", c.grad_clip_norm);
    c.seed = j.value("seed", c.seed);
    c.optim.beta1 = j.value("beta1", c.optim.beta1);
    c.optim.beta2 = j.value("beta2", c.optim.beta2);
    c.optim.weight_decay = j.value("weight_decay", c.optim.weight_decay);
    validate(c);
    return c;
}

inline Json to_json(const FinetuneConfig& c) {
    return Json{{"lambda0", c.lambda0},
                {"mode", to_string(c.mode)},
                {"attention", to_string(c.attention)},
                {"mask_fraction", c.mask_fraction},
                {"use_fallback", c.use_fallback}};
}

inline FinetuneConfig finetune_config_from_json(const Json& j) {
    FinetuneConfig c;
    c.lambda0 = j.value("lambda0", c.lambda0);
    if (j.contains("mode")) c.mode = finetune_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("attention")) {
        c.attention = attention_mode_from_string(j.at("attention").get<std::string>());
    }
    c.mask_fraction = j.value("mask_fraction", c.mask_fraction);
    c.use_fallback = j.value("use_fallback", c.use_fallback);
    validate(c);
    return c;
}

}  // namespace ppgfm
