#pragma once

// Experiment runners: per-window NLL scoring, split-protocol evaluation
// (train a head per split, aggregate metrics), and the NLL-vs-performance
// diagnostic with rank correlation.

#include <algorithm>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ppgfm/dataset.hpp"
#include "ppgfm/heads.hpp"
#include "ppgfm/metrics.hpp"
#include "ppgfm/model.hpp"
#include "ppgfm/train.hpp"
#include "ppgfm/util.hpp"

namespace ppgfm {

// ---------------------------------------------------------------------------
// score: per-window signal modeling NLL
// ---------------------------------------------------------------------------

struct ScoreRow {
    Index window = 0;
    std::string subject_id;
    double mean_nll = 0.0;
};

struct ScoreReport {
    std::vector<ScoreRow> rows;
    double dataset_mean_nll = 0.0;
};

inline ScoreReport score(const Model& m, const Dataset& ds) {
    if (ds.size() == 0) throw InvalidInput("score: empty dataset");
    ScoreReport report;
    double total = 0.0;
    for (Index i = 0; i < ds.size(); ++i) {
        const auto ps = to_model_input(window_at(ds, i), m.config.patch_size);
        const double nll = model_nll(m, ps).mean_nll;
        report.rows.push_back({i, ds.manifest.records[static_cast<std::size_t>(i)].subject_id, nll});
        total += nll;
    }
    report.dataset_mean_nll = total / static_cast<double>(ds.size());
    return report;
}

inline std::string score_csv(const ScoreReport& report, const ReproHeader& header = {}) {
    std::string out = header.render();
    out += "# dataset_mean_nll=" + format_double(report.dataset_mean_nll) + "\n";
    out += "window_id,subject_id,mean_nll\n";
    for (const auto& row : report.rows) {
        out += std::to_string(row.window) + "," + row.subject_id + "," +
               format_double(row.mean_nll) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// evaluate: split protocols
// ---------------------------------------------------------------------------

struct EvalProtocol {
    enum class Kind { loso, kfold, fixed_test };
    Kind kind = Kind::loso;
    Index k = 5;                // kfold only
    double test_fraction = 0.2;  // fixed_test only
    std::uint64_t split_seed = 0;
};

struct EvalOptions {
    TaskKind task = TaskKind::regression;
    std::string label_key = "hr_bpm";
    Index n_classes = 2;  // classification only
    FinetuneConfig finetune;
    TrainConfig train;
    bool with_nll = false;  // also score each split's test windows with the base model
};

namespace detail {

inline std::vector<SubjectSplit> make_splits(const DatasetManifest& manifest,
                                             const EvalProtocol& protocol) {
    std::vector<SubjectSplit> splits;
    switch (protocol.kind) {
        case EvalProtocol::Kind::loso:
            splits = loso_splits(manifest);
            break;
        case EvalProtocol::Kind::kfold:
            splits = kfold_subject_splits(manifest, protocol.k, protocol.split_seed);
            break;
        case EvalProtocol::Kind::fixed_test:
            splits = {fixed_test_split(manifest, protocol.test_fraction, protocol.split_seed)};
            break;
    }
    // Canonical order by test-subject set so protocols that induce the same
    // partition produce identical reports.
    std::sort(splits.begin(), splits.end(), [](const SubjectSplit& a, const SubjectSplit& b) {
        return a.test_subjects < b.test_subjects;
    });
    return splits;
}

}  // namespace detail

// Fine-tunes a fresh head (and backbone copy, in full mode) per split from
// the given base model, then evaluates on the held-out subjects.
inline MetricsReport evaluate(const Model& base, const Dataset& ds, const EvalProtocol& protocol,
                              const EvalOptions& options) {
    const std::vector<SubjectSplit> splits = detail::make_splits(ds.manifest, protocol);
    MetricsReport report;
    report.task_kind = options.task;

    for (const auto& split : splits) {
        const auto train_data =
            labeled_sequences(ds, split.train_records, options.label_key, base.config.patch_size);
        const auto test_data =
            labeled_sequences(ds, split.test_records, options.label_key, base.config.patch_size);
        if (train_data.empty() || test_data.empty()) {
            throw InvalidInput("evaluate: split with empty train or test side");
        }

        Model model = base;
        TaskHead head = make_task_head<Real>(
            model.config, options.task, options.task == TaskKind::regression ? 1 : options.n_classes,
            options.train.seed, options.finetune.use_fallback);
        finetune(model, head, train_data, options.train, options.finetune);

        SplitMetrics sm;
        sm.split_id = split.id;
        sm.n_test = static_cast<Index>(test_data.size());
        if (options.task == TaskKind::regression) {
            std::vector<double> preds, labels, train_labels;
            for (const auto& ex : train_data) train_labels.push_back(ex.label);
            for (const auto& ex : test_data) {
                const Vector<Real> y = predict(model, head, ex.ps, options.finetune.attention,
                                            options.finetune.use_fallback);
                preds.push_back(static_cast<double>(y[0]));
                labels.push_back(ex.label);
            }
            sm.mae = mean_absolute_error(preds, labels);
            sm.baseline_mae = mean_baseline_mae(train_labels, labels);
        } else {
            std::vector<int> pred_class, truth;
            std::vector<double> scores;
            for (const auto& ex : test_data) {
                const Vector<Real> logits = predict(model, head, ex.ps, options.finetune.attention,
                                                 options.finetune.use_fallback);
                Index argmax = 0;
                logits.maxCoeff(&argmax);
                pred_class.push_back(static_cast<int>(argmax));
                truth.push_back(static_cast<int>(ex.label));
                scores.push_back(static_cast<double>(logits[std::min<Index>(1, logits.size() - 1)] -
                                                     logits[0]));
            }
            sm.accuracy = accuracy(pred_class, truth);
            sm.f1 = f1_positive(pred_class, truth);
            if (!sm.f1) {
                std::cerr << "warning: F1 undefined on split " << split.id
                          << " (single-class test set)\n";
            }
            sm.auroc = auroc(scores, truth);
        }
        if (options.with_nll) {
            double total = 0.0;
            for (const auto& ex : test_data) total += model_nll(base, ex.ps).mean_nll;
            sm.mean_nll = total / static_cast<double>(test_data.size());
        }
        report.n_windows += sm.n_test;
        report.splits.push_back(std::move(sm));
    }
    return report;
}

inline std::string metrics_csv(const MetricsReport& report, const ReproHeader& header = {}) {
    std::string out = header.render();
    out += "split_id,n_test,mae,baseline_mae,accuracy,f1,auroc,mean_nll\n";
    auto cell = [](const std::optional<double>& v) {
        return v ? format_double(*v) : std::string();
    };
    for (const auto& s : report.splits) {
        out += s.split_id + "," + std::to_string(s.n_test) + "," + cell(s.mae) + "," +
               cell(s.baseline_mae) + "," + cell(s.accuracy) + "," + cell(s.f1) + "," +
               cell(s.auroc) + "," + cell(s.mean_nll) + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// NLL-vs-performance diagnostic
// ---------------------------------------------------------------------------

struct NllPerfPoint {
    std::string split_id;
    double mean_nll = 0.0;
    double metric_value = 0.0;
};

struct NllPerfReport {
    std::vector<NllPerfPoint> points;
    std::optional<double> rank_correlation;  // omitted for <3 points or ties
};

inline NllPerfReport nll_vs_performance(const std::vector<NllPerfPoint>& points) {
    NllPerfReport report;
    report.points = points;
    std::vector<double> nll, metric;
    for (const auto& p : points) {
        nll.push_back(p.mean_nll);
        metric.push_back(p.metric_value);
    }
    if (points.size() >= 3) report.rank_correlation = spearman(nll, metric);
    return report;
}

inline NllPerfReport nll_vs_performance(const MetricsReport& metrics) {
    std::vector<NllPerfPoint> points;
    for (const auto& s : metrics.splits) {
        if (!s.mean_nll) continue;
        const std::optional<double> metric =
            metrics.task_kind == TaskKind::regression ? s.mae : s.f1;
        if (!metric) continue;
        points.push_back({s.split_id, *s.mean_nll, *metric});
    }
    return nll_vs_performance(points);
}

inline std::string nll_perf_csv(const NllPerfReport& report, const ReproHeader& header = {}) {
    std::string out = header.render();
    if (report.rank_correlation) {
        out += "# rank_correlation=" + format_double(*report.rank_correlation) + "\n";
    }
    out += "split_id,mean_nll,metric_value\n";
    for (const auto& p : report.points) {
        out += p.split_id + "," + format_double(p.mean_nll) + "," + format_double(p.metric_value) +
               "\n";
    }
    return out;
}

}  // namespace ppgfm
