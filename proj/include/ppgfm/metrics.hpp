#pragma once

// Evaluation metrics: MAE, accuracy, positive-class F1, rank-based AUROC,
// Spearman rank correlation, and the constant-mean regression baseline.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ppgfm/errors.hpp"
#include "ppgfm/heads.hpp"
#include "ppgfm/types.hpp"

namespace ppgfm {

inline double mean_absolute_error(const std::vector<double>& predictions,
                                  const std::vector<double>& labels) {
    if (predictions.size() != labels.size() || predictions.empty()) {
        throw InvalidInput("mae: size mismatch or empty");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        total += std::abs(predictions[i] - labels[i]);
    }
    return total / static_cast<double>(predictions.size());
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw InvalidInput("accuracy: size mismatch or empty");
    }
    std::size_t hits = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
    return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

// F1 of the positive class; std::nullopt when the test set has no positive
// ground truth and no positive prediction (undefined).
inline std::optional<double> f1_positive(const std::vector<int>& predicted,
                                         const std::vector<int>& truth, int positive = 1) {
    if (predicted.size() != truth.size() || predicted.empty()) {
        throw InvalidInput("f1: size mismatch or empty");
    }
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const bool p = predicted[i] == positive;
        const bool t = truth[i] == positive;
        tp += p && t;
        fp += p && !t;
        fn += !p && t;
    }
    if (tp + fp + fn == 0) return std::nullopt;
    return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

namespace detail {

// Average ranks (1-based) with ties sharing the mean rank.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t(0));
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace detail

// Mann-Whitney rank statistic; std::nullopt when only one class is present.
inline std::optional<double> auroc(const std::vector<double>& scores,
                                   const std::vector<int>& truth, int positive = 1) {
    if (scores.size() != truth.size() || scores.empty()) {
        throw InvalidInput("auroc: size mismatch or empty");
    }
    std::size_t n_pos = 0;
    for (int t : truth) n_pos += t == positive;
    const std::size_t n_neg = truth.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    const std::vector<double> ranks = detail::average_ranks(scores);
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == positive) rank_sum += ranks[i];
    }
    const double u = rank_sum - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

// Spearman rank correlation; std::nullopt for fewer than 3 points or when
// either side has zero rank variance (e.g. identical values).
inline std::optional<double> spearman(const std::vector<double>& xs,
                                      const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw InvalidInput("spearman: size mismatch");
    const std::size_t n = xs.size();
    if (n < 3) return std::nullopt;
    const std::vector<double> rx = detail::average_ranks(xs);
    const std::vector<double> ry = detail::average_ranks(ys);
    const double mean = 0.5 * static_cast<double>(n + 1);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = rx[i] - mean;
        const double dy = ry[i] - mean;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// MAE of always predicting the training-label mean; closed-form baseline for
// regression tasks.
inline double mean_baseline_mae(const std::vector<double>& train_labels,
                                const std::vector<double>& test_labels) {
    if (train_labels.empty() || test_labels.empty()) throw InvalidInput("baseline: empty labels");
    const double mean = std::accumulate(train_labels.begin(), train_labels.end(), 0.0) /
                        static_cast<double>(train_labels.size());
    double total = 0.0;
    for (double y : test_labels) total += std::abs(y - mean);
    return total / static_cast<double>(test_labels.size());
}

struct SplitMetrics {
    std::string split_id;
    Index n_test = 0;
    std::optional<double> mae;
    std::optional<double> accuracy;
    std::optional<double> f1;
    std::optional<double> auroc;
    std::optional<double> baseline_mae;  // constant-mean regressor
    std::optional<double> mean_nll;      // base-model signal NLL on the split
};

struct MetricsReport {
    TaskKind task_kind = TaskKind::regression;
    std::vector<SplitMetrics> splits;
    Index n_windows = 0;
    double coverage = 1.0;  // no quality filtering is performed

    // Mean and sample standard deviation of one metric across splits.
    static std::pair<double, double> aggregate(const std::vector<double>& values) {
        const double n = static_cast<double>(values.size());
        const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        var = values.size() > 1 ? var / (n - 1.0) : 0.0;
        return {mean, std::sqrt(var)};
    }

    std::vector<double> collect(std::optional<double> SplitMetrics::*field) const {
        std::vector<double> out;
        for (const auto& s : splits) {
            if (s.*field) out.push_back(*(s.*field));
        }
        return out;
    }
};

}  // namespace ppgfm
