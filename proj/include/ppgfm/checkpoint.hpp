#pragma once

// Checkpoint format: one file holding a single-line JSON manifest (format
// version, model config, seed, training step, optional task-head config and
// fine-tune config) followed by a contiguous blob of float32 little-endian
// parameter values. The blob stores each tensor row-major, model tensors in
// canonical traversal order, then task-head tensors. Round trips are
// bitwise stable.

#include <optional>
#include <string>

#include "ppgfm/heads.hpp"
#include "ppgfm/model.hpp"
#include "ppgfm/serialize.hpp"
#include "ppgfm/util.hpp"

namespace ppgfm {

inline constexpr const char* kCheckpointVersion = "ppgfm-checkpoint-v1";

struct Checkpoint {
    Model model;
    std::optional<TaskHead> head;
    std::uint64_t seed = 0;
    std::int64_t training_step = 0;
    Json finetune_config;  // recorded verbatim for provenance; may be null
};

namespace detail {

inline void append_tensors(std::string& blob, const std::vector<ParamTensor<Real>>& tensors) {
    for (const auto& t : tensors) {
        for (Index r = 0; r < t.rows; ++r) {
            for (Index c = 0; c < t.cols; ++c) append_f32_le(blob, t.at(r, c));
        }
    }
}

inline void read_tensors(const std::string& blob, std::size_t& cursor,
                         const std::vector<ParamTensor<Real>>& tensors) {
    for (const auto& t : tensors) {
        for (Index r = 0; r < t.rows; ++r) {
            for (Index c = 0; c < t.cols; ++c) {
                t.at(r, c) = read_f32_le(blob.data() + cursor);
                cursor += 4;
            }
        }
    }
}

inline Json task_head_manifest(const TaskHead& h) {
    Json j{{"task_kind", to_string(h.task_kind)},
           {"output_dim", h.output_dim},
           {"hidden_dim", h.hidden_dim},
           {"label_mean", static_cast<double>(h.label_mean)},
           {"label_scale", static_cast<double>(h.label_scale)},
           {"has_fallback", h.fallback.has_value()}};
    if (h.fallback) j["fallback_delta"] = static_cast<double>(h.fallback->delta);
    return j;
}

inline TaskHead task_head_from_manifest(const Json& j, const ModelConfig& cfg) {
    TaskHead h = make_task_head<Real>(cfg, task_kind_from_string(j.at("task_kind")),
                                      j.at("output_dim").get<Index>(), /*seed=*/0,
                                      j.at("has_fallback").get<bool>(),
                                      j.at("hidden_dim").get<Index>());
    h.label_mean = static_cast<Real>(j.at("label_mean").get<double>());
    h.label_scale = static_cast<Real>(j.at("label_scale").get<double>());
    if (h.fallback) h.fallback->delta = static_cast<Real>(j.at("fallback_delta").get<double>());
    return h;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, Model& model, TaskHead* head,
                            std::uint64_t seed, std::int64_t training_step,
                            const Json& finetune_config = Json()) {
    Json manifest{{"format_version", kCheckpointVersion},
                  {"config", to_json(model.config)},
                  {"seed", seed},
                  {"training_step", training_step},
                  {"has_task_head", head != nullptr}};
    if (head) manifest["task_head"] = detail::task_head_manifest(*head);
    if (!finetune_config.is_null()) manifest["finetune_config"] = finetune_config;

    std::string out = manifest.dump();
    out.push_back('\n');
    const auto model_tensors = param_tensors(model);
    std::int64_t n_values = 0;
    for (const auto& t : model_tensors) n_values += t.size();
    if (head) {
        for (const auto& t : param_tensors(*head)) n_values += t.size();
    }
    out.reserve(out.size() + static_cast<std::size_t>(4 * n_values));
    detail::append_tensors(out, model_tensors);
    if (head) detail::append_tensors(out, param_tensors(*head));
    write_file(path, out);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    const std::string raw = read_file(path);
    const std::size_t newline = raw.find('\n');
    if (newline == std::string::npos) throw CorruptCheckpoint("checkpoint: missing manifest line");
    Json manifest;
    try {
        manifest = Json::parse(raw.substr(0, newline));
    } catch (const Json::exception&) {
        throw CorruptCheckpoint("checkpoint: malformed manifest JSON");
    }
    if (!manifest.contains("format_version") ||
        manifest.at("format_version").get<std::string>() != kCheckpointVersion) {
        throw UnsupportedCheckpoint("checkpoint: unsupported format version");
    }

    Checkpoint ckpt;
    ModelConfig cfg;
    try {
        cfg = model_config_from_json(manifest.at("config"));
        ckpt.seed = manifest.value("seed", std::uint64_t(0));
        ckpt.training_step = manifest.value("training_step", std::int64_t(0));
        if (manifest.contains("finetune_config")) {
            ckpt.finetune_config = manifest.at("finetune_config");
        }
        allocate(ckpt.model, cfg);
        if (manifest.at("has_task_head").get<bool>()) {
            ckpt.head = detail::task_head_from_manifest(manifest.at("task_head"), cfg);
        }
    } catch (const Json::exception&) {
        throw CorruptCheckpoint("checkpoint: manifest fields missing or mistyped");
    }

    std::int64_t n_values = 0;
    auto model_tensors = param_tensors(ckpt.model);
    for (const auto& t : model_tensors) n_values += t.size();
    std::vector<ParamTensor<Real>> head_tensors;
    if (ckpt.head) {
        head_tensors = param_tensors(*ckpt.head);
        for (const auto& t : head_tensors) n_values += t.size();
    }
    const std::size_t blob_bytes = raw.size() - newline - 1;
    if (blob_bytes != static_cast<std::size_t>(4 * n_values)) {
        throw CorruptCheckpoint("checkpoint: blob length does not match parameter count");
    }
    const std::string blob = raw.substr(newline + 1);
    std::size_t cursor = 0;
    detail::read_tensors(blob, cursor, model_tensors);
    if (ckpt.head) detail::read_tensors(blob, cursor, head_tensors);
    return ckpt;
}

// Load while requiring the stored model config to match an expected one.
inline Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
    Checkpoint ckpt = load_checkpoint(path);
    if (!(ckpt.model.config == expected)) {
        throw UnsupportedCheckpoint("checkpoint: stored config does not match the requested one");
    }
    return ckpt;
}

}  // namespace ppgfm
