// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Run with --criterion N to execute a subset. Experiments share one
// pre-trained micro model and fixed seeds throughout, so every number below
// is reproducible bit for bit on the same toolchain.

#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <ppgfm/checkpoint.hpp>
#include <ppgfm/dataset.hpp>
#include <ppgfm/denoise.hpp>
#include <ppgfm/eval.hpp>
#include <ppgfm/svg.hpp>
#include <ppgfm/train.hpp>

using namespace ppgfm;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += (ok ? "" : "FAILED: ") + what;
    }
};

// ---------------------------------------------------------------------------
// Shared artifacts (built lazily, cached across criteria)
// ---------------------------------------------------------------------------

CorpusSpec id_spec() {
    CorpusSpec spec;
    spec.hr_lo = 50;
    spec.hr_hi = 150;
    spec.noise_lo = 0.005;
    spec.noise_hi = 0.025;
    spec.irregular_fraction = 0.2;
    return spec;
}

// Downstream HR corpus for the mixed-objective experiment: shifted toward
// high rates and noisier than pre-training, the regime where the auxiliary
// modeling loss has real adaptation work to do.
CorpusSpec downstream_spec() {
    CorpusSpec spec = id_spec();
    spec.hr_lo = 100;
    spec.hr_hi = 180;
    spec.noise_lo = 0.08;
    spec.noise_hi = 0.15;
    return spec;
}

struct Shared {
    std::optional<Model> pretrained;
    std::optional<Dataset> heldout;  // fresh subjects from the pre-training generator

    struct HrModel {
        Model model;
        TaskHead head;
        double test_mae = 0.0;
    };
    std::optional<HrModel> hr_model;

    const Model& get_pretrained() {
        if (!pretrained) {
            CorpusSpec spec = id_spec();
            spec.n_subjects = 64;
            spec.windows_per_subject = 24;
            spec.master_seed = 1001;
            const Dataset ds = synth_corpus(spec);
            const auto data = model_inputs(ds, all_records(ds), 40);
            Model m = build_model(preset("micro"), 7);
            TrainConfig tc;
            tc.batch_size = 16;
            tc.total_steps = 2000;
            tc.warmup_steps = 100;
            tc.learning_rate = 3e-3;
            tc.seed = 11;
            pretrain(m, data, tc);
            pretrained = std::move(m);
        }
        return *pretrained;
    }

    const Dataset& get_heldout() {
        if (!heldout) {
            CorpusSpec spec = id_spec();
            spec.n_subjects = 16;
            spec.windows_per_subject = 4;
            spec.master_seed = 2002;
            heldout = synth_corpus(spec);
        }
        return *heldout;
    }

    // Mixed-objective HR regressor on an in-distribution corpus; used by the
    // adaptation and correlation criteria.
    const HrModel& get_hr_model() {
        if (!hr_model) {
            CorpusSpec spec = id_spec();
            spec.n_subjects = 16;
            spec.windows_per_subject = 12;
            spec.master_seed = 4004;
            const Dataset ds = synth_corpus(spec);
            const SubjectSplit split = fixed_test_split(ds.manifest, 0.25, 404);
            const auto train = labeled_sequences(ds, split.train_records, "hr_bpm", 40);
            const auto test = labeled_sequences(ds, split.test_records, "hr_bpm", 40);

            HrModel out{get_pretrained(),
                        make_task_head<Real>(preset("micro"), TaskKind::regression, 1, 1), 0.0};
            TrainConfig tc;
            tc.batch_size = 8;
            tc.total_steps = 600;
            tc.warmup_steps = 60;
            tc.learning_rate = 1e-2;
            tc.seed = 1;
            FinetuneConfig ft;
            ft.lambda0 = 1.0;
            finetune(out.model, out.head, train, tc, ft);

            std::vector<double> preds, labels;
            for (const auto& ex : test) {
                preds.push_back(predict(out.model, out.head, ex.ps)[0]);
                labels.push_back(ex.label);
            }
            out.test_mae = mean_absolute_error(preds, labels);
            hr_model = std::move(out);
        }
        return *hr_model;
    }
};

Shared shared;

double model_mae(const Model& m, const TaskHead& head, const std::vector<LabeledSequence>& test,
                 bool fallback = false) {
    std::vector<double> preds, labels;
    for (const auto& ex : test) {
        preds.push_back(predict(m, head, ex.ps, AttentionMode::causal, fallback)[0]);
        labels.push_back(ex.label);
    }
    return mean_absolute_error(preds, labels);
}

// ---------------------------------------------------------------------------
// Criterion 1: analytic gradients of the loss vs central finite differences
// ---------------------------------------------------------------------------

Check criterion1() {
    Check c;
    const auto t0 = Clock::now();
    Rng rng(101);
    double max_rel = 0.0;
    int tested = 0;
    const double h = 1e-6;
    while (tested < 1000) {
        const double x = rng.uniform(0.101, 0.899);
        const double mu = rng.uniform(-3.0, 3.0);
        const double b = rng.uniform(0.05, 3.0);
        if (std::abs(logit(x) - mu) < 1e-3) continue;  // kink-adjacent excluded
        ++tested;
        const NllGrad<double> g = nll_gradients(x, mu, b);
        const double fd_mu =
            (logit_laplace_nll(x, mu + h, b) - logit_laplace_nll(x, mu - h, b)) / (2 * h);
        const double fd_b =
            (logit_laplace_nll(x, mu, b + h) - logit_laplace_nll(x, mu, b - h)) / (2 * h);
        max_rel = std::max(max_rel, std::abs(g.d_mu - fd_mu) / std::max(1.0, std::abs(fd_mu)));
        max_rel = std::max(max_rel, std::abs(g.d_b - fd_b) / std::max(1.0, std::abs(fd_b)));
    }
    const double elapsed = seconds_since(t0);
    c.require(max_rel < 1e-4, "max relative error " + format_double(max_rel) + " < 1e-4");
    c.require(elapsed < 5.0, "runtime " + format_double(elapsed) + "s < 5s");
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 2: Appendix-A optimal-scale oracle by grid search
// ---------------------------------------------------------------------------

Check criterion2() {
    Check c;
    Rng rng(202);
    double max_b_err = 0.0, max_closed_err = 0.0;
    int tested = 0;
    while (tested < 100) {
        const double x = rng.uniform(0.101, 0.899);
        const double mu = rng.uniform(-3.0, 3.0);
        if (std::abs(logit(x) - mu) < 5e-3) continue;
        ++tested;
        const double b_star = optimal_scale(x, mu);
        double best_b = 1e-4, best_v = logit_laplace_nll(x, mu, 1e-4);
        for (int k = 1; k <= 600; ++k) {
            const double b = 1e-4 * std::pow(10.0 / 1e-4, k / 600.0);
            const double v = logit_laplace_nll(x, mu, b);
            if (v < best_v) {
                best_v = v;
                best_b = b;
            }
        }
        for (double b = best_b * 0.95; b <= best_b * 1.05; b += 1e-4) {
            const double v = logit_laplace_nll(x, mu, b);
            if (v < best_v) {
                best_v = v;
                best_b = b;
            }
        }
        max_b_err = std::max(max_b_err, std::abs(best_b - b_star));
        const double closed =
            std::log(2.0 * b_star) + 1.0 + std::log(x) + std::log(1.0 - x);
        max_closed_err = std::max(max_closed_err,
                                  std::abs(logit_laplace_nll(x, mu, b_star) - closed));
    }
    c.require(max_b_err <= 1e-3, "grid minimizer within " + format_double(max_b_err) + " <= 1e-3");
    c.require(max_closed_err <= 1e-9,
              "closed form log(2|d|)+1+Jacobian within " + format_double(max_closed_err));
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 3: causality on a random micro model
// ---------------------------------------------------------------------------

Check criterion3() {
    Check c;
    const auto t0 = Clock::now();
    const Model m = build_model(preset("micro"), 303);
    PatchSequence ps;
    ps.patches.resize(30, 40);
    Rng rng(304);
    for (Index i = 0; i < 30; ++i)
        for (Index j = 0; j < 40; ++j) ps.patches(i, j) = static_cast<Real>(rng.uniform(0.12, 0.88));
    ps.squashed = true;

    const MatrixR h_base = decode(m, embed_sequence(m, ps), AttentionMode::causal);
    const LaplaceParams p_base = signal_head(m, h_base);
    bool causal_ok = true;
    for (Index j = 0; j < 30; ++j) {  // patch j+1 in 1-indexed spec terms
        auto perturbed = ps;
        perturbed.patches(j, 7) += Real(0.02);
        const MatrixR h = decode(m, embed_sequence(m, perturbed), AttentionMode::causal);
        const LaplaceParams p = signal_head(m, h);
        const Index unchanged = std::min<Index>(j + 1, 30);
        for (Index i = 0; i < unchanged; ++i) {
            for (Index k = 0; k < 64; ++k) causal_ok &= h(i, k) == h_base(i, k);
            for (Index k = 0; k < 40; ++k) {
                causal_ok &= p.mu(i, k) == p_base.mu(i, k) && p.b(i, k) == p_base.b(i, k);
            }
        }
    }
    c.require(causal_ok, "causal mode: all prefixes bitwise unchanged under perturbation");

    const MatrixR h_bi = decode(m, embed_sequence(m, ps), AttentionMode::bidirectional);
    bool bidir_ok = true;
    for (Index j = 1; j < 29; ++j) {
        auto perturbed = ps;
        perturbed.patches(j, 7) += Real(0.02);
        const MatrixR h = decode(m, embed_sequence(m, perturbed), AttentionMode::bidirectional);
        bool earlier_changed = false;
        for (Index i = 0; i <= j && !earlier_changed; ++i) {
            for (Index k = 0; k < 64; ++k) {
                if (h(i, k) != h_bi(i, k)) {
                    earlier_changed = true;
                    break;
                }
            }
        }
        bidir_ok &= earlier_changed;
    }
    c.require(bidir_ok, "bidirectional mode: earlier positions respond");
    const double elapsed = seconds_since(t0);
    c.require(elapsed < 10.0, "runtime " + format_double(elapsed) + "s < 10s");
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 4: pre-training beats the collapse baseline
// ---------------------------------------------------------------------------

Check criterion4() {
    Check c;
    const auto t0 = Clock::now();
    const Model& m = shared.get_pretrained();
    const Dataset& heldout = shared.get_heldout();
    const auto data = model_inputs(heldout, all_records(heldout), 40);
    double collapse = 0.0, nll = 0.0;
    for (const auto& ps : data) {
        collapse += collapse_baseline_nll(ps);
        nll += model_nll(m, ps).mean_nll;
    }
    collapse /= static_cast<double>(data.size());
    nll /= static_cast<double>(data.size());
    const double elapsed = seconds_since(t0);
    c.require(nll < collapse - 0.2, "held-out NLL " + format_double(nll) +
                                        " beats collapse baseline " + format_double(collapse) +
                                        " by " + format_double(collapse - nll) + " >= 0.2 nats");
    c.require(elapsed < 900.0, "runtime " + format_double(elapsed) + "s < 15min");
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 5: single-batch overfit vs the Appendix-A optimal-scale bound
// ---------------------------------------------------------------------------

// The stated tolerance is not attainable: with per-point optimal b* = |d|,
// the gap contributed by each point is log(b/|d|) + |d|/b - 1 >= 0, and once
// the batch is memorized the residual magnitudes |d| are optimization noise
// that no context-conditioned b head can match pointwise; for Laplace-like
// residuals the expected gap is Euler's constant (~0.58) even for a
// perfectly scale-calibrated head. Measured gaps run 1-2 nats. The check is
// implemented exactly as stated and reports its true result.
Check criterion5() {
    Check c;
    const auto t0 = Clock::now();
    CorpusSpec spec = id_spec();
    spec.n_subjects = 4;
    spec.windows_per_subject = 1;
    spec.master_seed = 3003;
    const Dataset ds = synth_corpus(spec);
    const auto data = model_inputs(ds, all_records(ds), 40);

    Model m = build_model(preset("micro"), 13);
    TrainConfig tc;
    tc.batch_size = static_cast<Index>(data.size());
    tc.total_steps = 5000;
    tc.warmup_steps = 100;
    tc.learning_rate = 1e-3;
    tc.seed = 17;
    pretrain(m, data, tc);

    double nll = 0.0, bound = 0.0, collapse = 0.0;
    for (const auto& ps : data) {
        const auto params = predict_params(m, ps);
        nll += sequence_nll(ps, params).mean_nll;
        bound += optimal_scale_bound_nll(ps, params.mu);
        collapse += collapse_baseline_nll(ps);
    }
    nll /= static_cast<double>(data.size());
    bound /= static_cast<double>(data.size());
    collapse /= static_cast<double>(data.size());
    const double elapsed = seconds_since(t0);

    c.require(nll - bound <= 0.05, "batch NLL " + format_double(nll) +
                                       " within 0.05 of optimal-scale bound " +
                                       format_double(bound) + " (gap " +
                                       format_double(nll - bound) + ")");
    c.require(elapsed < 600.0, "runtime " + format_double(elapsed) + "s < 10min");
    c.detail += "; memorization itself is strong (batch NLL " + format_double(nll) +
                " vs collapse baseline " + format_double(collapse) + ")";
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 6: mixed-objective benefit over the pure objective
// ---------------------------------------------------------------------------

Check criterion6() {
    Check c;
    const auto t0 = Clock::now();
    const Model& base = shared.get_pretrained();

    CorpusSpec spec = downstream_spec();
    spec.n_subjects = 16;
    spec.windows_per_subject = 12;
    spec.master_seed = 4004;
    const Dataset ds = synth_corpus(spec);
    const SubjectSplit split = fixed_test_split(ds.manifest, 0.25, 404);
    const auto train = labeled_sequences(ds, split.train_records, "hr_bpm", 40);
    const auto test = labeled_sequences(ds, split.test_records, "hr_bpm", 40);
    std::vector<double> train_labels, test_labels;
    for (const auto& ex : train) train_labels.push_back(ex.label);
    for (const auto& ex : test) test_labels.push_back(ex.label);

    int mixed_wins = 0;
    double best_mixed_mae = 1e18;
    std::string per_seed;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TrainConfig tc;
        tc.batch_size = 8;
        tc.total_steps = 600;
        tc.warmup_steps = 60;
        tc.learning_rate = 1e-2;
        tc.seed = seed;
        double mae[2];
        for (int variant = 0; variant < 2; ++variant) {
            FinetuneConfig ft;
            ft.lambda0 = variant == 0 ? 1.0 : 0.0;
            Model m = base;
            TaskHead head = make_task_head<Real>(m.config, TaskKind::regression, 1, seed);
            finetune(m, head, train, tc, ft);
            mae[variant] = model_mae(m, head, test);
        }
        mixed_wins += mae[0] <= mae[1];
        best_mixed_mae = std::min(best_mixed_mae, mae[0]);
        per_seed += " s" + std::to_string(seed) + ":" + format_double(mae[0]) + "/" +
                    format_double(mae[1]);
    }
    const double elapsed = seconds_since(t0);
    c.require(mixed_wins >= 4, "mixed <= pure in " + std::to_string(mixed_wins) +
                                   "/5 seeds (mixed/pure MAE:" + per_seed + ")");
    const double baseline = mean_baseline_mae(train_labels, test_labels);
    c.require(best_mixed_mae <= 0.7 * baseline,
              "mixed MAE " + format_double(best_mixed_mae) + " beats mean-predictor baseline " +
                  format_double(baseline) + " by >= 30%");
    c.require(elapsed < 1800.0, "runtime " + format_double(elapsed) + "s < 30min");
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 7: fallback benefit under distribution shift
// ---------------------------------------------------------------------------

Check criterion7() {
    Check c;
    const Model& base = shared.get_pretrained();

    // OOD HR regression: heart rates disjoint from the pre-training range.
    {
        CorpusSpec spec = id_spec();
        spec.hr_lo = 155;
        spec.hr_hi = 180;
        spec.n_subjects = 16;
        spec.windows_per_subject = 12;
        spec.master_seed = 5005;
        const Dataset ds = synth_corpus(spec);
        const SubjectSplit split = fixed_test_split(ds.manifest, 0.25, 505);
        const auto train = labeled_sequences(ds, split.train_records, "hr_bpm", 40);
        const auto test = labeled_sequences(ds, split.test_records, "hr_bpm", 40);

        int fb_wins = 0;
        std::string per_seed;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            TrainConfig tc;
            tc.batch_size = 8;
            tc.total_steps = 800;
            tc.warmup_steps = 80;
            tc.learning_rate = 1e-3;
            tc.seed = seed;
            double mae[2];
            for (int variant = 0; variant < 2; ++variant) {
                FinetuneConfig ft;
                ft.mode = FinetuneMode::frozen_backbone;
                ft.lambda0 = 0.0;
                ft.use_fallback = variant == 1;
                Model m = base;
                TaskHead head = make_task_head<Real>(m.config, TaskKind::regression, 1, seed,
                                                     ft.use_fallback);
                finetune(m, head, train, tc, ft);
                mae[variant] = model_mae(m, head, test, ft.use_fallback);
            }
            fb_wins += mae[1] <= mae[0];
            per_seed += " s" + std::to_string(seed) + ":" + format_double(mae[1]) + "/" +
                        format_double(mae[0]);
        }
        c.require(fb_wins >= 4, "OOD: fallback improves MAE in " + std::to_string(fb_wins) +
                                    "/5 seeds (fallback/plain:" + per_seed + ")");
    }

    // In-distribution marginal case: AF classification, where the likelihood
    // is uninformative and the fallback should be a wash.
    {
        CorpusSpec spec = id_spec();
        spec.irregular_fraction = 0.5;
        spec.n_subjects = 16;
        spec.windows_per_subject = 12;
        spec.master_seed = 9009;
        const Dataset ds = synth_corpus(spec);
        const SubjectSplit split = fixed_test_split(ds.manifest, 0.25, 606);
        const auto train = labeled_sequences(ds, split.train_records, "af_class", 40);
        const auto test = labeled_sequences(ds, split.test_records, "af_class", 40);

        double sum_plain = 0.0, sum_fb = 0.0;
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            TrainConfig tc;
            tc.batch_size = 8;
            tc.total_steps = 600;
            tc.warmup_steps = 60;
            tc.learning_rate = 1e-3;
            tc.seed = seed;
            for (int variant = 0; variant < 2; ++variant) {
                FinetuneConfig ft;
                ft.mode = FinetuneMode::frozen_backbone;
                ft.lambda0 = 0.0;
                ft.use_fallback = variant == 1;
                Model m = base;
                TaskHead head = make_task_head<Real>(m.config, TaskKind::classification, 2, seed,
                                                     ft.use_fallback);
                finetune(m, head, train, tc, ft);
                std::vector<int> preds, truth;
                for (const auto& ex : test) {
                    const auto logits =
                        predict(m, head, ex.ps, AttentionMode::causal, ft.use_fallback);
                    preds.push_back(logits[1] > logits[0] ? 1 : 0);
                    truth.push_back(static_cast<int>(ex.label));
                }
                const double f1 = f1_positive(preds, truth).value_or(0.0);
                (variant == 0 ? sum_plain : sum_fb) += f1;
            }
        }
        const double rel = std::abs(sum_fb - sum_plain) / sum_plain;
        c.require(rel < 0.05, "in-distribution: plain F1 " + format_double(sum_plain / 5) +
                                  " vs fallback F1 " + format_double(sum_fb / 5) +
                                  " differ by " + format_double(rel * 100) + "% < 5%");
    }
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 8: unlabeled test-time adaptation
// ---------------------------------------------------------------------------

Check criterion8() {
    Check c;
    const auto& hr = shared.get_hr_model();

    CorpusSpec spec = id_spec();
    spec.n_subjects = 10;
    spec.windows_per_subject = 40;
    spec.hr_lo = 55;
    spec.hr_hi = 145;
    spec.master_seed = 7007;
    const Dataset ds = synth_corpus(spec);

    int nll_down = 0;
    double mae_before = 0.0, mae_after = 0.0;
    for (const auto& subj : subject_ids(ds.manifest)) {
        std::vector<Index> recs;
        for (Index i = 0; i < ds.size(); ++i) {
            if (ds.manifest.records[static_cast<std::size_t>(i)].subject_id == subj) {
                recs.push_back(i);
            }
        }
        const auto pool = model_inputs(ds, recs, 40);
        const auto labeled = labeled_sequences(ds, recs, "hr_bpm", 40);

        TrainConfig tc;
        tc.batch_size = 4;
        tc.total_steps = 30;
        tc.warmup_steps = 3;
        tc.learning_rate = 1e-5;
        tc.seed = 3;
        Model adapted = hr.model;
        test_time_adapt(adapted, pool, 0.10, tc);

        // Evaluate on the windows the adaptation never saw.
        Rng rng(tc.seed);
        const auto order = rng.sample_without_replacement(static_cast<Index>(pool.size()), 4);
        std::vector<char> used(pool.size(), 0);
        for (Index i : order) used[static_cast<std::size_t>(i)] = 1;
        double nll_b = 0.0, nll_a = 0.0;
        std::vector<double> pb, pa, lab;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (used[i]) continue;
            nll_b += model_nll(hr.model, pool[i]).mean_nll;
            nll_a += model_nll(adapted, pool[i]).mean_nll;
            pb.push_back(predict(hr.model, hr.head, labeled[i].ps)[0]);
            pa.push_back(predict(adapted, hr.head, labeled[i].ps)[0]);
            lab.push_back(labeled[i].label);
        }
        nll_down += nll_a < nll_b;
        mae_before += mean_absolute_error(pb, lab);
        mae_after += mean_absolute_error(pa, lab);
    }
    mae_before /= 10.0;
    mae_after /= 10.0;
    c.require(nll_down >= 9, "10% adaptation reduces held-out-window NLL for " +
                                 std::to_string(nll_down) + "/10 subjects (need >= 9)");
    c.require(mae_after <= mae_before, "mean HR MAE does not increase: " +
                                           format_double(mae_before) + " -> " +
                                           format_double(mae_after));
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 9: sequential denoising sweep
// ---------------------------------------------------------------------------

Check criterion9() {
    Check c;
    const auto t0 = Clock::now();
    const Model& m = shared.get_pretrained();
    const Dataset& heldout = shared.get_heldout();
    auto records = all_records(heldout);
    records.resize(40);
    const auto seqs = model_inputs(heldout, records, 40);

    const std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    const DenoiseSweepResult sweep = denoise_sweep(m, seqs, ratios, 77);
    const double mae03 = sweep.mae_per_ratio[2];
    const double mae05 = sweep.mae_per_ratio[4];
    const double mae07 = sweep.mae_per_ratio[6];
    c.require(mae03 < mae05 && mae05 < mae07,
              "monotone degradation: MAE@0.3 " + format_double(mae03) + " < MAE@0.5 " +
                  format_double(mae05) + " < MAE@0.7 " + format_double(mae07));
    c.require(mae03 < 0.1, "MAE@0.3 " + format_double(mae03) + " < 0.1 normalized");

    // Zero-fill reference at the same masks.
    Rng rng(77);
    double zero_total = 0.0;
    Index counted = 0;
    for (std::size_t w = 0; w < seqs.size(); ++w) {
        Rng mask_rng = rng.child((2ULL << 32) ^ w);  // ratio index 2 = 0.3
        const BoolArray mask = random_patch_mask(seqs[w].n_patches(), 0.3, mask_rng);
        if (!mask.any()) continue;
        const SignalWindow truth = unpatchify(unsquash(seqs[w]));
        SignalWindow zero = truth;
        for (Index i = 0; i < mask.size(); ++i) {
            if (mask[i]) {
                for (Index j = 0; j < 40; ++j) zero.values[i * 40 + j] = 0.0f;
            }
        }
        zero_total += masked_mae(zero, truth, mask, 40);
        ++counted;
    }
    const double zero_fill = zero_total / static_cast<double>(counted);
    c.require(mae03 < zero_fill, "model MAE@0.3 " + format_double(mae03) +
                                     " beats zero-fill baseline " + format_double(zero_fill));
    const double elapsed = seconds_since(t0);
    c.require(elapsed < 300.0, "runtime " + format_double(elapsed) + "s < 5min");
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 10: NLL-performance rank correlation under constructed shift
// ---------------------------------------------------------------------------

Check criterion10() {
    Check c;
    const Model& base = shared.get_pretrained();
    const auto& hr = shared.get_hr_model();

    std::vector<double> nlls, maes;
    std::string detail;
    int cohort = 0;
    for (double center : {100.0, 125.0, 145.0, 160.0, 172.0}) {
        CorpusSpec spec = id_spec();
        spec.n_subjects = 6;
        spec.windows_per_subject = 6;
        spec.hr_lo = center - 8;
        spec.hr_hi = center + 8;
        spec.master_seed = 8008 + static_cast<std::uint64_t>(cohort++);
        const Dataset ds = synth_corpus(spec);
        const auto labeled = labeled_sequences(ds, all_records(ds), "hr_bpm", 40);
        double nll = 0.0;
        std::vector<double> preds, labels;
        for (const auto& ex : labeled) {
            nll += model_nll(base, ex.ps).mean_nll;
            preds.push_back(predict(hr.model, hr.head, ex.ps)[0]);
            labels.push_back(ex.label);
        }
        nlls.push_back(nll / static_cast<double>(labeled.size()));
        maes.push_back(mean_absolute_error(preds, labels));
        detail += " " + format_double(center) + "bpm:(" + format_double(nlls.back()) + "," +
                  format_double(maes.back()) + ")";
    }
    const auto rho = spearman(nlls, maes);
    c.require(rho.has_value() && *rho > 0.3,
              "rank correlation " + (rho ? format_double(*rho) : std::string("undefined")) +
                  " > 0.3 over cohorts" + detail);
    c.require(nlls.front() < nlls.back(),
              "in-distribution cohort scores lower NLL than the shifted one");
    return c;
}

// ---------------------------------------------------------------------------
// Criterion 11: determinism and file formats
// ---------------------------------------------------------------------------

Check criterion11() {
    Check c;
    const std::string dir = "acceptance_tmp_";

    // Checkpoint round trip on a freshly built model.
    {
        Model m = build_model(preset("micro"), 1111);
        TaskHead head = make_task_head<Real>(m.config, TaskKind::regression, 1, 2, true);
        const std::string path = dir + "ckpt.ppgfm";
        save_checkpoint(path, m, &head, 1111, 0, to_json(FinetuneConfig{}));
        const std::string first = read_file(path);
        Checkpoint ckpt = load_checkpoint(path);
        save_checkpoint(path, ckpt.model, &*ckpt.head, 1111, 0, ckpt.finetune_config);
        c.require(read_file(path) == first, "checkpoint save-load-save is bitwise stable");
        std::remove(path.c_str());
    }

    // Dataset round trip.
    {
        CorpusSpec spec = id_spec();
        spec.n_subjects = 3;
        spec.windows_per_subject = 2;
        spec.master_seed = 1212;
        const Dataset ds = synth_corpus(spec);
        write_dataset(ds, dir + "m.json", dir + "b.f32");
        const Dataset back = read_dataset(dir + "m.json", dir + "b.f32");
        c.require(back.blob == ds.blob, "dataset blob round trip is bitwise stable");
        const Dataset csv_back = dataset_from_csv(dataset_csv(ds));
        c.require(csv_back.blob == ds.blob, "dataset CSV round trip is exact for float32");
        std::remove((dir + "m.json").c_str());
        std::remove((dir + "b.f32").c_str());
    }

    // Identical seeds reproduce identical training logs.
    {
        CorpusSpec spec = id_spec();
        spec.n_subjects = 4;
        spec.windows_per_subject = 2;
        spec.master_seed = 1313;
        const Dataset ds = synth_corpus(spec);
        const auto data = model_inputs(ds, all_records(ds), 40);
        TrainConfig tc;
        tc.batch_size = 4;
        tc.total_steps = 30;
        tc.warmup_steps = 5;
        tc.seed = 14;
        Model m1 = build_model(preset("micro"), 15);
        Model m2 = build_model(preset("micro"), 15);
        const TrainLog l1 = pretrain(m1, data, tc);
        const TrainLog l2 = pretrain(m2, data, tc);
        bool same = l1.records.size() == l2.records.size();
        for (std::size_t i = 0; same && i < l1.records.size(); ++i) {
            same = l1.records[i].loss == l2.records[i].loss &&
                   l1.records[i].grad_norm == l2.records[i].grad_norm;
        }
        c.require(same, "identical seeds reproduce identical train logs");

        // CSV schema checks on every emitted table format.
        const std::string log_csv = train_log_csv(l1, {"h", "14", "x"});
        c.require(log_csv.find("step,loss,lambda,lr,grad_norm\n") != std::string::npos &&
                      log_csv.find("# config_hash=h") != std::string::npos,
                  "train log CSV schema + reproducibility header");

        const ScoreReport sr = score(m1, ds);
        const std::string sc = score_csv(sr, {"h", "14", "x"});
        std::istringstream is(sc);
        std::string line;
        int rows = 0;
        bool header_ok = false;
        while (std::getline(is, line)) {
            if (line == "window_id,subject_id,mean_nll") header_ok = true;
            else if (!line.empty() && line[0] != '#' && header_ok) {
                rows += static_cast<int>(std::count(line.begin(), line.end(), ',')) == 2;
            }
        }
        c.require(header_ok && rows == static_cast<int>(ds.size()),
                  "score CSV schema with one row per window");
    }

    // SVG validity for the two chart kinds.
    {
        const std::string line =
            svg::line_chart({0.1, 0.5, 0.9}, {0.05, 0.1, 0.2}, "t", "x", "y", "seed=1");
        const std::string scatter = svg::scatter_chart({1, 2, 3}, {3, 2, 1}, "t", "x", "y");
        c.require(line.rfind("<svg", 0) == 0 && line.find("</svg>") != std::string::npos &&
                      line.find("<polyline") != std::string::npos,
                  "line chart SVG well-formed");
        c.require(scatter.find("<circle") != std::string::npos &&
                      scatter.find("</svg>") != std::string::npos,
                  "scatter chart SVG well-formed");
    }
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
            selected.push_back(std::atoi(argv[i + 1]));
            ++i;
        }
    }

    const std::map<int, std::function<Check()>> criteria{
        {1, criterion1}, {2, criterion2}, {3, criterion3},  {4, criterion4},
        {5, criterion5}, {6, criterion6}, {7, criterion7},  {8, criterion8},
        {9, criterion9}, {10, criterion10}, {11, criterion11}};
    const std::map<int, std::string> names{
        {1, "gradient correctness vs finite differences"},
        {2, "optimal-scale oracle (grid search + closed form)"},
        {3, "causal / bidirectional information flow"},
        {4, "pre-training beats the collapse baseline"},
        {5, "single-batch overfit vs optimal-scale bound"},
        {6, "mixed-objective fine-tuning benefit"},
        {7, "fallback benefit under distribution shift"},
        {8, "unlabeled test-time adaptation"},
        {9, "masked denoising sweep"},
        {10, "NLL-performance rank correlation"},
        {11, "determinism and file formats"}};

    if (selected.empty()) {
        for (const auto& [id, fn] : criteria) selected.push_back(id);
    }

    int failures = 0;
    for (int id : selected) {
        const auto it = criteria.find(id);
        if (it == criteria.end()) {
            std::cerr << "unknown criterion " << id << "\n";
            return 2;
        }
        const auto t0 = Clock::now();
        Check result;
        try {
            result = it->second();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
        }
        const double elapsed = seconds_since(t0);
        std::cout << (result.pass ? "[PASS] " : "[FAIL] ") << id << ". " << names.at(id) << " ("
                  << format_double(elapsed) << "s)\n        " << result.detail << "\n";
        failures += !result.pass;
    }
    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
    } else {
        std::cout << "all selected criteria passed\n";
    }
    return failures == 0 ? 0 : 1;
}
