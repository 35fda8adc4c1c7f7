// Command-line interface: synth, pretrain, finetune, adapt, score, denoise,
// sweep, and eval subcommands. All configuration comes from a JSON file;
// --seed and --out-dir are the only flag-level overrides. Every output file
// starts with a reproducibility header (config hash, seed, checkpoint hash).

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <ppgfm/checkpoint.hpp>
#include <ppgfm/dataset.hpp>
#include <ppgfm/denoise.hpp>
#include <ppgfm/eval.hpp>
#include <ppgfm/serialize.hpp>
#include <ppgfm/svg.hpp>
#include <ppgfm/train.hpp>
#include <ppgfm/util.hpp>

namespace fs = std::filesystem;
using namespace ppgfm;

namespace {

struct Common {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;

    Json config;
    std::string config_hash;

    void load() {
        const std::string raw = read_file(config_path);
        config = Json::parse(raw);
        config_hash = to_hex(fnv1a64(raw));
        fs::create_directories(out_dir);
    }

    std::string out(const std::string& name) const { return (fs::path(out_dir) / name).string(); }
};

void add_common(CLI::App* cmd, Common& common) {
    cmd->add_option("--config", common.config_path, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out-dir", common.out_dir, "output directory (created if missing)");
    cmd->add_option("--seed", common.seed_override, "override the run seed from the config");
}

Dataset load_dataset(const Json& cfg) {
    return read_dataset(cfg.at("manifest").get<std::string>(), cfg.at("blob").get<std::string>());
}

CorpusSpec corpus_spec_from_json(const Json& j) {
    CorpusSpec spec;
    spec.n_subjects = j.value("n_subjects", spec.n_subjects);
    spec.windows_per_subject = j.value("windows_per_subject", spec.windows_per_subject);
    spec.label_task = j.value("label_task", spec.label_task);
    spec.master_seed = j.value("master_seed", spec.master_seed);
    auto range = [&](const char* key, double& lo, double& hi) {
        if (j.contains(key)) {
            lo = j.at(key).at(0).get<double>();
            hi = j.at(key).at(1).get<double>();
        }
    };
    range("hr_range", spec.hr_lo, spec.hr_hi);
    range("hr_wander_range", spec.hr_wander_lo, spec.hr_wander_hi);
    range("dicrotic_range", spec.dicrotic_lo, spec.dicrotic_hi);
    range("noise_range", spec.noise_lo, spec.noise_hi);
    range("baseline_wander_range", spec.baseline_wander_lo, spec.baseline_wander_hi);
    spec.irregular_fraction = j.value("irregular_fraction", spec.irregular_fraction);
    spec.window_s = j.value("window_s", spec.window_s);
    spec.fs_hz = j.value("fs_hz", spec.fs_hz);
    return spec;
}

struct TaskSpec {
    TaskKind kind = TaskKind::regression;
    std::string label_key = "hr_bpm";
    Index n_classes = 2;
    Index hidden_dim = 0;
};

TaskSpec task_spec_from_json(const Json& j) {
    TaskSpec t;
    if (j.contains("kind")) t.kind = task_kind_from_string(j.at("kind").get<std::string>());
    t.label_key = j.value("label", t.label_key);
    t.n_classes = j.value("n_classes", t.n_classes);
    t.hidden_dim = j.value("hidden_dim", t.hidden_dim);
    return t;
}

int run_synth(Common& common) {
    common.load();
    CorpusSpec spec = corpus_spec_from_json(common.config);
    if (common.seed_override) spec.master_seed = *common.seed_override;
    const Dataset ds = synth_corpus(spec);
    write_dataset(ds, common.out("dataset.json"), common.out("dataset.f32"));
    if (common.config.value("csv", false)) {
        write_file(common.out("dataset.csv"),
                   dataset_csv(ds, {common.config_hash, std::to_string(spec.master_seed), ""}));
    }
    std::cout << "wrote " << ds.size() << " windows from " << spec.n_subjects << " subjects to "
              << common.out_dir << "\n";
    return 0;
}

int run_pretrain(Common& common) {
    common.load();
    const ModelConfig mcfg = model_config_from_json(common.config.at("model"));
    TrainConfig tcfg = train_config_from_json(common.config.value("train", Json::object()));
    if (common.seed_override) tcfg.seed = *common.seed_override;
    const Dataset ds = load_dataset(common.config.at("dataset"));

    Model model = build_model(mcfg, tcfg.seed);
    const auto data = model_inputs(ds, all_records(ds), mcfg.patch_size);
    const TrainLog log = pretrain(model, data, tcfg);

    const std::string ckpt_path = common.out("checkpoint.ppgfm");
    save_checkpoint(ckpt_path, model, nullptr, tcfg.seed, tcfg.total_steps);
    write_file(common.out("trainlog.csv"),
               train_log_csv(log, {common.config_hash, std::to_string(tcfg.seed),
                                   to_hex(fnv1a64_file(ckpt_path))}));
    if (!log.records.empty()) {
        std::cout << "pretrained " << param_count(mcfg) << " params for " << tcfg.total_steps
                  << " steps; final loss " << log.records.back().loss << "\n";
    }
    return 0;
}

int run_finetune(Common& common) {
    common.load();
    TrainConfig tcfg = train_config_from_json(common.config.value("train", Json::object()));
    if (common.seed_override) tcfg.seed = *common.seed_override;
    const FinetuneConfig ft =
        finetune_config_from_json(common.config.value("finetune", Json::object()));
    const TaskSpec task = task_spec_from_json(common.config.value("task", Json::object()));

    Checkpoint ckpt = load_checkpoint(common.config.at("checkpoint").get<std::string>());
    const Dataset ds = load_dataset(common.config.at("dataset"));
    const auto data =
        labeled_sequences(ds, all_records(ds), task.label_key, ckpt.model.config.patch_size);

    TaskHead head = make_task_head<Real>(
        ckpt.model.config, task.kind, task.kind == TaskKind::regression ? 1 : task.n_classes,
        common.config.value("head_seed", tcfg.seed), ft.use_fallback, task.hidden_dim);
    const TrainLog log = finetune(ckpt.model, head, data, tcfg, ft);

    const std::string out_path = common.out("finetuned.ppgfm");
    save_checkpoint(out_path, ckpt.model, &head, tcfg.seed, tcfg.total_steps, to_json(ft));
    write_file(common.out("trainlog.csv"),
               train_log_csv(log, {common.config_hash, std::to_string(tcfg.seed),
                                   to_hex(fnv1a64_file(out_path))}));
    if (!log.records.empty()) {
        std::cout << "fine-tuned for " << tcfg.total_steps << " steps; final loss "
                  << log.records.back().loss << "\n";
    }
    return 0;
}

int run_adapt(Common& common, const std::string& preset_choice) {
    common.load();
    TrainConfig tcfg = train_config_from_json(common.config.value("train", Json::object()));
    if (common.seed_override) tcfg.seed = *common.seed_override;
    double fraction = common.config.value("fraction", 0.10);
    if (preset_choice == "5pct") fraction = 0.05;
    if (preset_choice == "10pct") fraction = 0.10;

    Checkpoint ckpt = load_checkpoint(common.config.at("checkpoint").get<std::string>());
    const Dataset ds = load_dataset(common.config.at("dataset"));
    const auto pool = model_inputs(ds, all_records(ds), ckpt.model.config.patch_size);

    const TrainLog log = test_time_adapt(ckpt.model, pool, fraction, tcfg);
    const std::string out_path = common.out("adapted.ppgfm");
    TaskHead* head = ckpt.head ? &*ckpt.head : nullptr;
    save_checkpoint(out_path, ckpt.model, head, tcfg.seed, ckpt.training_step + tcfg.total_steps,
                    ckpt.finetune_config);
    write_file(common.out("trainlog.csv"),
               train_log_csv(log, {common.config_hash, std::to_string(tcfg.seed),
                                   to_hex(fnv1a64_file(out_path))}));
    std::cout << "adapted on " << static_cast<Index>(std::ceil(fraction * ds.size())) << " of "
              << ds.size() << " windows (fraction " << fraction << ")\n";
    return 0;
}

int run_score(Common& common) {
    common.load();
    const std::string ckpt_path = common.config.at("checkpoint").get<std::string>();
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset ds = load_dataset(common.config.at("dataset"));
    const ScoreReport report = score(ckpt.model, ds);
    write_file(common.out("scores.csv"),
               score_csv(report, {common.config_hash, std::to_string(ckpt.seed),
                                  to_hex(fnv1a64_file(ckpt_path))}));
    std::cout << "dataset mean NLL: " << report.dataset_mean_nll << " over " << ds.size()
              << " windows\n";
    return 0;
}

int run_denoise(Common& common) {
    common.load();
    const std::string ckpt_path = common.config.at("checkpoint").get<std::string>();
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset ds = load_dataset(common.config.at("dataset"));
    const Index window = common.config.value("window", Index(0));
    if (window < 0 || window >= ds.size()) throw InvalidInput("denoise: window index out of range");
    const double ratio = common.config.value("mask_ratio", 0.3);
    std::uint64_t mask_seed = common.config.value("mask_seed", std::uint64_t(0));
    if (common.seed_override) mask_seed = *common.seed_override;

    const SignalWindow original = window_at(ds, window);
    const PatchSequence ps = to_model_input(original, ckpt.model.config.patch_size);
    Rng rng(mask_seed);
    const BoolArray mask = random_patch_mask(ps.n_patches(), ratio, rng);
    const SignalWindow recon = denoise(ckpt.model, ps, mask);

    const ReproHeader header{common.config_hash, std::to_string(mask_seed),
                             to_hex(fnv1a64_file(ckpt_path))};
    std::string csv = header.render();
    csv += "index,original,reconstructed,masked\n";
    std::vector<double> xs, orig_y, recon_y;
    for (Index i = 0; i < original.values.size(); ++i) {
        const Index patch = i / ckpt.model.config.patch_size;
        csv += std::to_string(i) + "," + format_float(original.values[i]) + "," +
               format_float(recon.values[i]) + "," + (mask[patch] ? "1" : "0") + "\n";
        xs.push_back(static_cast<double>(i));
        orig_y.push_back(static_cast<double>(original.values[i]));
        recon_y.push_back(static_cast<double>(recon.values[i]));
    }
    write_file(common.out("denoise.csv"), csv);
    write_file(common.out("denoise.svg"),
               svg::multi_line_chart(xs, {{"original", orig_y}, {"reconstructed", recon_y}},
                                     "masked-patch reconstruction", "sample", "normalized value",
                                     "mask_ratio=" + format_double(ratio)));
    std::cout << "masked-region MAE: "
              << masked_mae(recon, original, mask, ckpt.model.config.patch_size) << "\n";
    return 0;
}

int run_sweep(Common& common) {
    common.load();
    const std::string ckpt_path = common.config.at("checkpoint").get<std::string>();
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset ds = load_dataset(common.config.at("dataset"));
    std::vector<double> ratios;
    if (common.config.contains("ratios")) {
        for (const auto& r : common.config.at("ratios")) ratios.push_back(r.get<double>());
    } else {
        for (int i = 1; i <= 9; ++i) ratios.push_back(0.1 * i);
    }
    std::uint64_t seed = common.config.value("seed", std::uint64_t(0));
    if (common.seed_override) seed = *common.seed_override;
    const Index max_windows = common.config.value("max_windows", ds.size());

    auto records = all_records(ds);
    if (static_cast<Index>(records.size()) > max_windows) {
        records.resize(static_cast<std::size_t>(max_windows));
    }
    const auto seqs = model_inputs(ds, records, ckpt.model.config.patch_size);
    const DenoiseSweepResult result = denoise_sweep(ckpt.model, seqs, ratios, seed);

    const ReproHeader header{common.config_hash, std::to_string(seed),
                             to_hex(fnv1a64_file(ckpt_path))};
    std::string csv = header.render();
    csv += "# n_samples=" + std::to_string(result.n_samples) + "\n";
    csv += "mask_ratio,mae\n";
    for (std::size_t i = 0; i < result.mask_ratios.size(); ++i) {
        csv += format_double(result.mask_ratios[i]) + "," + format_double(result.mae_per_ratio[i]) +
               "\n";
    }
    write_file(common.out("sweep.csv"), csv);
    write_file(common.out("sweep.svg"),
               svg::line_chart(result.mask_ratios, result.mae_per_ratio,
                               "reconstruction error vs mask ratio", "mask ratio",
                               "masked-region MAE", "seed=" + std::to_string(seed)));
    std::cout << "sweep over " << result.mask_ratios.size() << " ratios on " << result.n_samples
              << " windows\n";
    return 0;
}

int run_eval(Common& common) {
    common.load();
    const std::string ckpt_path = common.config.at("checkpoint").get<std::string>();
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    const Dataset ds = load_dataset(common.config.at("dataset"));
    const TaskSpec task = task_spec_from_json(common.config.value("task", Json::object()));

    EvalOptions options;
    options.task = task.kind;
    options.label_key = task.label_key;
    options.n_classes = task.n_classes;
    options.finetune = finetune_config_from_json(common.config.value("finetune", Json::object()));
    options.train = train_config_from_json(common.config.value("train", Json::object()));
    if (common.seed_override) options.train.seed = *common.seed_override;
    options.with_nll = common.config.value("nll_report", false);

    EvalProtocol protocol;
    const Json pj = common.config.value("protocol", Json::object());
    const std::string kind = pj.value("kind", std::string("loso"));
    if (kind == "loso") {
        protocol.kind = EvalProtocol::Kind::loso;
    } else if (kind == "kfold") {
        protocol.kind = EvalProtocol::Kind::kfold;
    } else if (kind == "fixed_test") {
        protocol.kind = EvalProtocol::Kind::fixed_test;
    } else {
        throw InvalidConfig("eval: unknown protocol kind " + kind);
    }
    protocol.k = pj.value("k", protocol.k);
    protocol.test_fraction = pj.value("test_fraction", protocol.test_fraction);
    protocol.split_seed = pj.value("seed", protocol.split_seed);

    const MetricsReport report = evaluate(ckpt.model, ds, protocol, options);
    const ReproHeader header{common.config_hash, std::to_string(options.train.seed),
                             to_hex(fnv1a64_file(ckpt_path))};
    write_file(common.out("metrics.csv"), metrics_csv(report, header));

    Json summary{{"task", to_string(report.task_kind)},
                 {"n_windows", report.n_windows},
                 {"coverage", report.coverage},
                 {"n_splits", report.splits.size()}};
    auto put = [&](const char* name, std::optional<double> SplitMetrics::*field) {
        const auto values = report.collect(field);
        if (values.empty()) return;
        const auto [mean, stddev] = MetricsReport::aggregate(values);
        summary[name] = Json{{"mean", mean}, {"std", stddev}};
    };
    put("mae", &SplitMetrics::mae);
    put("baseline_mae", &SplitMetrics::baseline_mae);
    put("accuracy", &SplitMetrics::accuracy);
    put("f1", &SplitMetrics::f1);
    put("auroc", &SplitMetrics::auroc);
    put("mean_nll", &SplitMetrics::mean_nll);
    write_file(common.out("metrics.json"), summary.dump(2) + "\n");

    if (options.with_nll) {
        const NllPerfReport nll_report = nll_vs_performance(report);
        write_file(common.out("nll_vs_perf.csv"), nll_perf_csv(nll_report, header));
        if (!nll_report.points.empty()) {
            std::vector<double> xs, ys;
            for (const auto& p : nll_report.points) {
                xs.push_back(p.mean_nll);
                ys.push_back(p.metric_value);
            }
            write_file(common.out("nll_vs_perf.svg"),
                       svg::scatter_chart(xs, ys, "NLL vs performance", "mean NLL",
                                          report.task_kind == TaskKind::regression ? "MAE" : "F1",
                                          "splits=" + std::to_string(xs.size())));
        }
    }
    std::cout << summary.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generative pre-trained transformer for PPG-like signals"};
    app.require_subcommand(1);

    Common common;
    std::string adapt_preset;

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
    CLI::App* pretrain = app.add_subcommand("pretrain", "pre-train on the generative objective");
    CLI::App* finetune = app.add_subcommand("finetune", "mixed-objective fine-tuning");
    CLI::App* adapt = app.add_subcommand("adapt", "unlabeled test-time adaptation");
    CLI::App* score_cmd = app.add_subcommand("score", "per-window signal modeling NLL");
    CLI::App* denoise_cmd = app.add_subcommand("denoise", "reconstruct masked patches of one window");
    CLI::App* sweep = app.add_subcommand("sweep", "masked-reconstruction MAE across mask ratios");
    CLI::App* eval = app.add_subcommand("eval", "split-protocol evaluation with metrics");

    for (CLI::App* cmd : {synth, pretrain, finetune, adapt, score_cmd, denoise_cmd, sweep, eval}) {
        add_common(cmd, common);
    }
    adapt->add_option("--personalization", adapt_preset,
                      "named adaptation preset (5pct or 10pct of the unlabeled pool)")
        ->check(CLI::IsMember({"5pct", "10pct"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) return run_synth(common);
        if (pretrain->parsed()) return run_pretrain(common);
        if (finetune->parsed()) return run_finetune(common);
        if (adapt->parsed()) return run_adapt(common, adapt_preset);
        if (score_cmd->parsed()) return run_score(common);
        if (denoise_cmd->parsed()) return run_denoise(common);
        if (sweep->parsed()) return run_sweep(common);
        if (eval->parsed()) return run_eval(common);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "unexpected error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
