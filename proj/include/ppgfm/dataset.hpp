#pragma once

// Dataset container and formats: a JSON manifest plus a float32-LE blob of
// concatenated windows, a CSV interchange format, corpus synthesis, and
// subject-disjoint split machinery (leave-one-subject-out and k-fold).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ppgfm/errors.hpp"
#include "ppgfm/rng.hpp"
#include "ppgfm/signal.hpp"
#include "ppgfm/synth.hpp"
#include "ppgfm/train.hpp"
#include "ppgfm/util.hpp"

namespace ppgfm {

inline constexpr const char* kDatasetVersion = "ppgfm-dataset-v1";

struct WindowRecord {
    std::string subject_id;
    std::int64_t offset = 0;  // element offset into the blob
    std::optional<double> hr_bpm;
    std::optional<double> rr_brpm;
    std::optional<int> af_class;
};

struct DatasetManifest {
    std::string format_version = kDatasetVersion;
    double sampling_rate_hz = 40.0;
    Index window_len = 1200;
    std::vector<WindowRecord> records;
};

struct Dataset {
    DatasetManifest manifest;
    std::vector<float> blob;

    Index size() const { return static_cast<Index>(manifest.records.size()); }
};

inline SignalWindow window_at(const Dataset& ds, Index i) {
    const auto& rec = ds.manifest.records[static_cast<std::size_t>(i)];
    SignalWindow w;
    w.values.resize(ds.manifest.window_len);
    for (Index j = 0; j < ds.manifest.window_len; ++j) {
        w.values[j] = ds.blob[static_cast<std::size_t>(rec.offset + j)];
    }
    w.subject_id = rec.subject_id;
    return w;
}

inline std::optional<double> label_of(const WindowRecord& rec, const std::string& key) {
    if (key == "hr_bpm") return rec.hr_bpm;
    if (key == "rr_brpm") return rec.rr_brpm;
    if (key == "af_class") {
        if (rec.af_class) return static_cast<double>(*rec.af_class);
        return std::nullopt;
    }
    throw InvalidInput("unknown label key: " + key);
}

inline std::vector<std::string> subject_ids(const DatasetManifest& manifest) {
    std::set<std::string> seen;
    std::vector<std::string> out;
    for (const auto& rec : manifest.records) {
        if (seen.insert(rec.subject_id).second) out.push_back(rec.subject_id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

// Subjects drawn with distinct derived seeds; windows are consecutive 30s
// strips of each subject's continuous process. Deterministic in master_seed.
inline Dataset synth_corpus(const CorpusSpec& spec) {
    if (spec.n_subjects < 1 || spec.windows_per_subject < 1) {
        throw InvalidInput("synth_corpus: need at least one subject and window");
    }
    const bool keep_hr = spec.label_task == "all" || spec.label_task == "hr";
    const bool keep_rr = spec.label_task == "all" || spec.label_task == "rr";
    const bool keep_af = spec.label_task == "all" || spec.label_task == "af";
    if (!keep_hr && !keep_rr && !keep_af) {
        throw InvalidInput("synth_corpus: unknown label_task " + spec.label_task);
    }

    Dataset ds;
    ds.manifest.sampling_rate_hz = spec.fs_hz;
    ds.manifest.window_len = static_cast<Index>(std::llround(spec.window_s * spec.fs_hz));
    Rng master(spec.master_seed);
    for (Index s = 0; s < spec.n_subjects; ++s) {
        const SynthSubjectProfile profile =
            sample_profile(spec, master, static_cast<std::uint64_t>(s));
        char id[32];
        std::snprintf(id, sizeof(id), "S%04lld", static_cast<long long>(s));
        for (Index w = 0; w < spec.windows_per_subject; ++w) {
            const double t0 = spec.window_s * static_cast<double>(w);
            auto [win, labels] = synth_window(profile, t0, spec.window_s, spec.fs_hz);
            WindowRecord rec;
            rec.subject_id = id;
            rec.offset = static_cast<std::int64_t>(ds.blob.size());
            if (keep_hr) rec.hr_bpm = labels.hr_bpm;
            if (keep_rr) rec.rr_brpm = labels.rr_brpm;
            if (keep_af) rec.af_class = labels.af_class;
            ds.blob.insert(ds.blob.end(), win.values.data(), win.values.data() + win.values.size());
            ds.manifest.records.push_back(std::move(rec));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Binary + JSON persistence
// ---------------------------------------------------------------------------

inline void write_dataset(const Dataset& ds, const std::string& manifest_path,
                          const std::string& blob_path) {
    nlohmann::json j{{"format_version", ds.manifest.format_version},
                     {"sampling_rate_hz", ds.manifest.sampling_rate_hz},
                     {"window_len", ds.manifest.window_len}};
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : ds.manifest.records) {
        nlohmann::json r{{"subject_id", rec.subject_id}, {"offset", rec.offset}};
        if (rec.hr_bpm) r["hr_bpm"] = *rec.hr_bpm;
        if (rec.rr_brpm) r["rr_brpm"] = *rec.rr_brpm;
        if (rec.af_class) r["af_class"] = *rec.af_class;
        records.push_back(std::move(r));
    }
    j["records"] = std::move(records);
    write_file(manifest_path, j.dump(2) + "\n");

    std::string blob;
    blob.reserve(ds.blob.size() * 4);
    for (float v : ds.blob) append_f32_le(blob, v);
    write_file(blob_path, blob);
}

inline Dataset read_dataset(const std::string& manifest_path, const std::string& blob_path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(manifest_path));
    } catch (const nlohmann::json::exception&) {
        throw CorruptDataset("dataset: malformed manifest JSON");
    }
    Dataset ds;
    try {
        if (j.at("format_version").get<std::string>() != kDatasetVersion) {
            throw CorruptDataset("dataset: unsupported format version");
        }
        ds.manifest.sampling_rate_hz = j.at("sampling_rate_hz").get<double>();
        ds.manifest.window_len = j.at("window_len").get<Index>();
        for (const auto& r : j.at("records")) {
            WindowRecord rec;
            rec.subject_id = r.at("subject_id").get<std::string>();
            rec.offset = r.at("offset").get<std::int64_t>();
            if (r.contains("hr_bpm")) rec.hr_bpm = r.at("hr_bpm").get<double>();
            if (r.contains("rr_brpm")) rec.rr_brpm = r.at("rr_brpm").get<double>();
            if (r.contains("af_class")) rec.af_class = r.at("af_class").get<int>();
            ds.manifest.records.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception&) {
        throw CorruptDataset("dataset: manifest fields missing or mistyped");
    }

    const std::string blob = read_file(blob_path);
    if (blob.size() % 4 != 0) throw CorruptDataset("dataset: blob size not a multiple of 4");
    const std::size_t n_values = blob.size() / 4;
    if (n_values != ds.manifest.records.size() * static_cast<std::size_t>(ds.manifest.window_len)) {
        throw CorruptDataset("dataset: blob length does not match manifest");
    }
    ds.blob.resize(n_values);
    for (std::size_t i = 0; i < n_values; ++i) ds.blob[i] = read_f32_le(blob.data() + 4 * i);

    std::vector<std::int64_t> offsets;
    for (const auto& rec : ds.manifest.records) {
        if (rec.offset < 0 ||
            rec.offset + ds.manifest.window_len > static_cast<std::int64_t>(n_values)) {
            throw CorruptDataset("dataset: window offset out of bounds");
        }
        offsets.push_back(rec.offset);
    }
    std::sort(offsets.begin(), offsets.end());
    for (std::size_t i = 1; i < offsets.size(); ++i) {
        if (offsets[i] - offsets[i - 1] < ds.manifest.window_len) {
            throw CorruptDataset("dataset: overlapping window offsets");
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// CSV interchange (one row per window: subject, labels, then samples)
// ---------------------------------------------------------------------------

inline std::string dataset_csv(const Dataset& ds, const ReproHeader& header = {}) {
    std::string out = header.render();
    out += "subject_id,hr_bpm,rr_brpm,af_class";
    for (Index j = 0; j < ds.manifest.window_len; ++j) out += ",v" + std::to_string(j);
    out += "\n";
    for (const auto& rec : ds.manifest.records) {
        out += rec.subject_id;
        out += ",";
        if (rec.hr_bpm) out += format_double(*rec.hr_bpm);
        out += ",";
        if (rec.rr_brpm) out += format_double(*rec.rr_brpm);
        out += ",";
        if (rec.af_class) out += std::to_string(*rec.af_class);
        for (Index j = 0; j < ds.manifest.window_len; ++j) {
            out += "," + format_float(ds.blob[static_cast<std::size_t>(rec.offset + j)]);
        }
        out += "\n";
    }
    return out;
}

inline Dataset dataset_from_csv(const std::string& csv, double sampling_rate_hz = 40.0) {
    Dataset ds;
    ds.manifest.sampling_rate_hz = sampling_rate_hz;
    std::istringstream in(csv);
    std::string line;
    bool header_seen = false;
    Index window_len = -1;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (cells.size() < 5) throw CorruptDataset("dataset csv: too few columns");
        const Index len = static_cast<Index>(cells.size()) - 4;
        if (window_len < 0) {
            window_len = len;
            ds.manifest.window_len = len;
        } else if (len != window_len) {
            throw CorruptDataset("dataset csv: ragged rows");
        }
        WindowRecord rec;
        rec.subject_id = cells[0];
        rec.offset = static_cast<std::int64_t>(ds.blob.size());
        if (!cells[1].empty()) rec.hr_bpm = std::stod(cells[1]);
        if (!cells[2].empty()) rec.rr_brpm = std::stod(cells[2]);
        if (!cells[3].empty()) rec.af_class = std::stoi(cells[3]);
        for (Index j = 0; j < window_len; ++j) {
            ds.blob.push_back(std::stof(cells[static_cast<std::size_t>(4 + j)]));
        }
        ds.manifest.records.push_back(std::move(rec));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Subject-disjoint splits
// ---------------------------------------------------------------------------

struct SubjectSplit {
    std::string id;
    std::vector<std::string> test_subjects;
    std::vector<Index> train_records;
    std::vector<Index> test_records;
};

namespace detail {

inline SubjectSplit materialize_split(const DatasetManifest& manifest,
                                      const std::set<std::string>& test_set, std::string id) {
    SubjectSplit split;
    split.id = std::move(id);
    split.test_subjects.assign(test_set.begin(), test_set.end());
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (test_set.count(manifest.records[i].subject_id)) {
            split.test_records.push_back(static_cast<Index>(i));
        } else {
            split.train_records.push_back(static_cast<Index>(i));
        }
    }
    return split;
}

}  // namespace detail

// One split per subject: that subject's windows are the test set.
inline std::vector<SubjectSplit> loso_splits(const DatasetManifest& manifest) {
    const std::vector<std::string> subjects = subject_ids(manifest);
    if (subjects.size() < 2) throw InvalidInput("loso_splits: need at least 2 subjects");
    std::vector<SubjectSplit> out;
    for (const auto& s : subjects) {
        out.push_back(detail::materialize_split(manifest, {s}, s));
    }
    return out;
}

// Subjects shuffled by seed and cut into k near-equal folds (sizes differ by
// at most one subject).
inline std::vector<SubjectSplit> kfold_subject_splits(const DatasetManifest& manifest, Index k,
                                                      std::uint64_t seed) {
    std::vector<std::string> subjects = subject_ids(manifest);
    if (k < 1 || k > static_cast<Index>(subjects.size())) {
        throw InvalidInput("kfold_subject_splits: k must lie in [1, n_subjects]");
    }
    Rng rng(seed);
    rng.shuffle(subjects);
    std::vector<SubjectSplit> out;
    const Index n = static_cast<Index>(subjects.size());
    const Index base = n / k;
    const Index extra = n % k;
    Index cursor = 0;
    for (Index f = 0; f < k; ++f) {
        const Index size = base + (f < extra ? 1 : 0);
        std::set<std::string> fold(subjects.begin() + cursor, subjects.begin() + cursor + size);
        cursor += size;
        out.push_back(detail::materialize_split(manifest, fold, "fold" + std::to_string(f)));
    }
    return out;
}

// Single split holding out ceil(fraction * n_subjects) subjects.
inline SubjectSplit fixed_test_split(const DatasetManifest& manifest, double test_fraction,
                                     std::uint64_t seed) {
    std::vector<std::string> subjects = subject_ids(manifest);
    if (subjects.size() < 2) throw InvalidInput("fixed_test_split: need at least 2 subjects");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
        throw InvalidInput("fixed_test_split: test_fraction must lie in (0, 1)");
    }
    Rng rng(seed);
    rng.shuffle(subjects);
    const Index n_test = std::max<Index>(
        1, static_cast<Index>(std::ceil(test_fraction * static_cast<double>(subjects.size()) - 1e-12)));
    std::set<std::string> test_set(subjects.end() - n_test, subjects.end());
    return detail::materialize_split(manifest, test_set, "fixed_test");
}

// Materialize model-ready labeled sequences for a list of record indices.
inline std::vector<LabeledSequence> labeled_sequences(const Dataset& ds,
                                                      const std::vector<Index>& records,
                                                      const std::string& label_key,
                                                      Index patch_size) {
    std::vector<LabeledSequence> out;
    out.reserve(records.size());
    for (Index i : records) {
        const auto& rec = ds.manifest.records[static_cast<std::size_t>(i)];
        const auto label = label_of(rec, label_key);
        if (!label) throw InvalidInput("dataset: record missing label " + label_key);
        LabeledSequence ex;
        ex.ps = to_model_input(window_at(ds, i), patch_size);
        ex.label = *label;
        ex.subject_id = rec.subject_id;
        out.push_back(std::move(ex));
    }
    return out;
}

inline std::vector<PatchSequence> model_inputs(const Dataset& ds, const std::vector<Index>& records,
                                               Index patch_size) {
    std::vector<PatchSequence> out;
    out.reserve(records.size());
    for (Index i : records) out.push_back(to_model_input(window_at(ds, i), patch_size));
    return out;
}

inline std::vector<Index> all_records(const Dataset& ds) {
    std::vector<Index> out(static_cast<std::size_t>(ds.size()));
    for (Index i = 0; i < ds.size(); ++i) out[static_cast<std::size_t>(i)] = i;
    return out;
}

}  // namespace ppgfm
