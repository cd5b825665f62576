#include "dpcn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dpcn/dataset.hpp"
#include "dpcn/gradcam.hpp"
#include "dpcn/hyperopt.hpp"
#include "dpcn/metrics.hpp"
#include "dpcn/netbuilder.hpp"
#include "dpcn/train.hpp"

namespace fs = std::filesystem;

namespace dpcn {

namespace {

struct RunConfig {
    std::string data, out = ".", scenario = "sc1", arch_path, checkpoint, config_path;
    double epsilon = 0.99;
    int side = 0;  // 0 keeps the dataset's native size
    std::uint64_t seed = 0;
    int threads = 1;
    int epochs = 30;
    int trials = 0;
    int classes = 0;  // 0 infers max grade + 1 from labels.csv
    int target_class = -1;
    int per_class = 40;
    int toy_classes = 3;
    int toy_side = 32;
    int tune_trials = 20;
    double dropout = 0.4;
    int count = 8;
    std::string split = "all";
};

// Child-stream tags; every stage draws from its own stream so partial
// pipelines and the full pipeline agree bit for bit.
enum StreamTag : std::uint64_t {
    kSplitStream = 1,
    kAugmentStream = 2,
    kRepresentStream = 3,
    kHeadStream = 4,
    kTuneStream = 5,
    kTrainStream = 6,
};

int infer_classes(const std::string& root) {
    std::ifstream in(fs::path(root) / "labels.csv");
    if (!in) throw DpcnError("cannot open '" + (fs::path(root) / "labels.csv").string() + "'");
    std::string line;
    std::getline(in, line); // header
    int max_grade = -1;
    while (std::getline(in, line)) {
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) continue;
        try {
            max_grade = std::max(max_grade, std::stoi(line.substr(comma + 1)));
        } catch (const std::exception&) {
            // load_dataset reports malformed rows properly
        }
    }
    return std::max(max_grade + 1, 2);
}

LabeledImageSet load_and_prepare(const RunConfig& cfg) {
    const int classes = cfg.classes > 0 ? cfg.classes : infer_classes(cfg.data);
    LabeledImageSet set = load_dataset(cfg.data, classes);
    set = remap_scenario(set, parse_scenario(cfg.scenario));

    int side = cfg.side;
    if (side == 0) {
        const Tensor& first = set.items[0].pixels;
        if (first.h != first.w || first.h % 4 != 0)
            throw DpcnError("dataset images are not square with side a multiple of 4; pass --side");
        side = first.h;
    }
    PreprocessConfig pp;
    pp.target_side = side;
    for (auto& item : set.items) item = preprocess_image(item, pp);
    return set;
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DpcnError("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw DpcnError("failed writing '" + path.string() + "'");
}

struct Splits {
    LabeledImageSet train, val, test;
};

Splits split_and_augment(const LabeledImageSet& set, const RunConfig& cfg) {
    Rng master(cfg.seed);
    Rng split_rng = master.child(kSplitStream);
    Splits s;
    std::tie(s.train, s.val, s.test) = split_dataset(set, 0.8, 0.1, 0.1, split_rng);
    // oversampling applies to the training portion only; evaluation data
    // stays untouched
    Rng aug_rng = master.child(kAugmentStream);
    PreprocessConfig pp;
    s.train = augment_balance(s.train, aug_rng, pp);
    return s;
}

ModelState build_model(const Splits& splits, const RunConfig& cfg, const fs::path& out_dir) {
    if (!(cfg.epsilon > 0.0 && cfg.epsilon <= 1.0)) throw DpcnError("epsilon out of range (0,1]");
    Rng master(cfg.seed);
    Rng rep_rng = master.child(kRepresentStream);
    const RepresentativeSet reps = select_representatives(splits.train, rep_rng, cfg.threads);
    log::info("selected ", reps.images.size(), " representatives across ",
              reps.per_class_counts.size(), " classes");
    write_representatives((out_dir / "representatives").string(), reps);

    {
        std::vector<Tensor> maps;
        for (const auto& img : reps.images) maps.push_back(img.pixels);
        export_energy_csv(energy_profile(extract_blocks(maps, 7, 7)),
                          (out_dir / "energy_conv1.csv").string());
    }

    GrowOptions opts;
    opts.epsilon = cfg.epsilon;
    ModelState model = grow_architecture(reps, opts);
    Rng head_rng = master.child(kHeadStream);
    finalize_head(model, splits.train.num_classes, cfg.dropout, head_rng);
    log::info("built depth-", model.arch.depth(), " network");

    save_arch_file(model.arch, (out_dir / "arch.json").string());
    checkpoint_save_file(model, (out_dir / "model_initial.dpcn").string());
    write_text(out_dir / "complexity.json", complexity_json(count_complexity(model.arch)));
    return model;
}

OptimizerConfig tune_model(const ModelState& base, const Splits& splits, const RunConfig& cfg,
                           const fs::path& out_dir) {
    SearchSpace space;
    space.n_trials = cfg.trials;
    Rng master(cfg.seed);
    Rng tune_rng = master.child(kTuneStream);
    std::ofstream log_file(out_dir / "trials.jsonl", std::ios::binary);
    if (!log_file) throw DpcnError("cannot write trials.jsonl");
    const SearchResult result =
        run_search(space, base, splits.train, splits.val, tune_rng, cfg.threads,
                   [&](const Trial& t) { log_file << trial_json_line(t); });
    log_file.close();
    write_text(out_dir / "best_config.json", optimizer_config_json(result.best));
    log::info("best trial ", result.best_index, " val_acc ",
              result.trials[result.best_index].val_accuracy);
    return result.best;
}

ModelState train_model(const ModelState& base, const Splits& splits, OptimizerConfig tcfg,
                       const RunConfig& cfg, const fs::path& out_dir) {
    tcfg.epochs = cfg.epochs;
    Rng master(cfg.seed);
    tcfg.seed = master.child(kTrainStream).seed();
    auto [model, report] = train(base, splits.train, splits.val, tcfg);
    write_text(out_dir / "train_report.json", train_report_json(report));
    checkpoint_save_file(model, (out_dir / "model.dpcn").string());
    log::info("trained ", cfg.epochs, " epochs; best epoch ", report.best_epoch, " val_acc ",
              report.best_epoch >= 0 ? report.val_accuracy[report.best_epoch] : 0.0);
    return model;
}

void evaluate_model(const ModelState& model, const LabeledImageSet& set,
                    const fs::path& out_dir) {
    if (set.items.empty()) throw DpcnError("eval: empty evaluation set");
    std::vector<int> truth, predicted;
    std::vector<double> scores; // probability of class 1, binary only
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < set.items.size(); start += 32) {
        idx.clear();
        for (std::size_t i = start; i < std::min(set.items.size(), start + 32); ++i)
            idx.push_back(i);
        const Tensor probs = model_forward(model, make_batch(set, idx), Mode::eval);
        for (int n = 0; n < probs.n; ++n) {
            truth.push_back(set.items[idx[n]].grade);
            int arg = 0;
            for (int c = 1; c < probs.c; ++c)
                if (probs.at(n, 0, 0, c) > probs.at(n, 0, 0, arg)) arg = c;
            predicted.push_back(arg);
            if (probs.c == 2) scores.push_back(probs.at(n, 0, 0, 1));
        }
    }
    const ConfusionMatrix cm = confusion_matrix(truth, predicted, set.num_classes);
    const MetricsReport metrics = classification_metrics(cm);
    double auc = -1.0;
    if (set.num_classes == 2) {
        bool both = false;
        for (int t : truth)
            if (t != truth[0]) both = true;
        if (both) {
            const RocCurve roc = roc_auc(scores, truth);
            auc = roc.auc;
            export_roc_csv(roc, (out_dir / "roc.csv").string());
        }
    }
    write_text(out_dir / "metrics.json", metrics_json(cm, metrics, auc));
    log::info("accuracy ", metrics.accuracy, " kappa ", metrics.kappa_unweighted);
}

void gradcam_outputs(const ModelState& model, const LabeledImageSet& set, const RunConfig& cfg,
                     const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const int count = std::min<std::size_t>(cfg.count, set.items.size());
    for (int i = 0; i < count; ++i) {
        const LabeledImage& img = set.items[i];
        int target = cfg.target_class;
        if (target < 0) {
            Tensor batch(1, img.pixels.h, img.pixels.w, img.pixels.c);
            batch.v = img.pixels.v;
            const Tensor probs = model_forward(model, batch, Mode::eval);
            target = 0;
            for (int c = 1; c < probs.c; ++c)
                if (probs.at(0, 0, 0, c) > probs.at(0, 0, 0, target)) target = c;
        }
        const Heatmap heat = grad_cam(model, img, target);
        std::string base = img.id;
        std::replace(base.begin(), base.end(), '/', '_');
        const std::size_t dot = base.find_last_of('.');
        if (dot != std::string::npos) base = base.substr(0, dot);
        write_pnm((out_dir / (base + "_cam.pgm")).string(), heat.values);
        write_pnm((out_dir / (base + "_overlay.ppm")).string(),
                  heatmap_overlay(img.pixels, heat));
    }
}

void add_common(CLI::App* cmd, RunConfig& cfg, bool needs_data) {
    auto* data = cmd->add_option("--data", cfg.data, "Dataset root (images/ + labels.csv)");
    if (needs_data) data->required();
    cmd->add_option("--out", cfg.out, "Output directory")->capture_default_str();
    cmd->add_option("--seed", cfg.seed, "Master random seed")->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "Worker threads (1 = fully sequential)")
        ->capture_default_str();
    cmd->add_option("--side", cfg.side, "Preprocess target side (0 = native size)")
        ->capture_default_str();
    cmd->add_option("--scenario", cfg.scenario, "Grading scenario (sc1|sc2|sc3)")
        ->check(CLI::IsMember({"sc1", "sc2", "sc3"}))
        ->capture_default_str();
    cmd->add_option("--classes", cfg.classes, "Class count (0 = infer from labels)")
        ->capture_default_str();
}

} // namespace

int execute_command(const std::vector<std::string>& argv) {
    CLI::App app{"DeepPCANet: data-dependent CNN construction, training and evaluation"};
    app.require_subcommand(1);
    RunConfig cfg;

    auto* toygen = app.add_subcommand("toygen", "Generate a synthetic grating dataset");
    toygen->add_option("--classes", cfg.toy_classes, "Number of texture classes")
        ->capture_default_str();
    toygen->add_option("--per-class", cfg.per_class, "Images per class")->capture_default_str();
    toygen->add_option("--side", cfg.toy_side, "Image side in pixels")->capture_default_str();
    toygen->add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
    toygen->add_option("--out", cfg.out, "Output dataset directory")->required();

    auto* represent = app.add_subcommand("represent", "Select representative images per class");
    add_common(represent, cfg, true);

    auto* build = app.add_subcommand("build", "Construct the architecture from the data");
    add_common(build, cfg, true);
    build->add_option("--epsilon", cfg.epsilon, "Eigenvalue-mass threshold")->capture_default_str();
    build->add_option("--dropout", cfg.dropout, "Head dropout probability")->capture_default_str();

    auto* tune = app.add_subcommand("tune", "Random search over training hyperparameters");
    add_common(tune, cfg, true);
    tune->add_option("--checkpoint", cfg.checkpoint, "Initial model checkpoint")->required();
    tune->add_option("--trials", cfg.tune_trials, "Number of trials")->capture_default_str();

    auto* train_cmd = app.add_subcommand("train", "Train a model checkpoint");
    add_common(train_cmd, cfg, true);
    train_cmd->add_option("--checkpoint", cfg.checkpoint, "Initial model checkpoint")->required();
    train_cmd->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    train_cmd->add_option("--config", cfg.config_path, "Optimizer config JSON (tune output)");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    add_common(eval_cmd, cfg, true);
    eval_cmd->add_option("--checkpoint", cfg.checkpoint, "Trained model checkpoint")->required();
    eval_cmd->add_option("--split", cfg.split, "Portion to evaluate (all|train|val|test)")
        ->check(CLI::IsMember({"all", "train", "val", "test"}))
        ->capture_default_str();

    auto* gradcam_cmd = app.add_subcommand("gradcam", "Write class-activation heatmaps");
    add_common(gradcam_cmd, cfg, true);
    gradcam_cmd->add_option("--checkpoint", cfg.checkpoint, "Trained model checkpoint")->required();
    gradcam_cmd->add_option("--class", cfg.target_class, "Target class (-1 = predicted)")
        ->capture_default_str();
    gradcam_cmd->add_option("--count", cfg.count, "Number of images to render")
        ->capture_default_str();

    auto* pipeline = app.add_subcommand("pipeline", "Run build, tune, train and eval in one go");
    add_common(pipeline, cfg, true);
    pipeline->add_option("--epsilon", cfg.epsilon, "Eigenvalue-mass threshold")
        ->capture_default_str();
    pipeline->add_option("--dropout", cfg.dropout, "Head dropout probability")
        ->capture_default_str();
    pipeline->add_option("--epochs", cfg.epochs, "Training epochs")->capture_default_str();
    pipeline->add_option("--trials", cfg.trials, "Tuning trials (0 = default config)")
        ->capture_default_str();

    std::vector<const char*> cargs;
    cargs.reserve(argv.size());
    for (const auto& a : argv) cargs.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(cargs.size()), cargs.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (cfg.data.size()) cfg.data = fs::absolute(cfg.data).string();
        cfg.out = fs::absolute(cfg.out).string();
        const fs::path out_dir(cfg.out);

        if (toygen->parsed()) {
            Rng rng(cfg.seed);
            const LabeledImageSet set =
                generate_toy_dataset(cfg.per_class, cfg.toy_classes, cfg.toy_side, rng);
            save_dataset(cfg.out, set);
            log::info("wrote ", set.items.size(), " images to ", cfg.out);
            return 0;
        }

        if (represent->parsed()) {
            const LabeledImageSet set = load_and_prepare(cfg);
            Rng master(cfg.seed);
            Rng rep_rng = master.child(kRepresentStream);
            const RepresentativeSet reps = select_representatives(set, rep_rng, cfg.threads);
            write_representatives(cfg.out, reps);
            log::info("wrote ", reps.images.size(), " representatives to ", cfg.out);
            return 0;
        }

        if (build->parsed()) {
            const LabeledImageSet set = load_and_prepare(cfg);
            const Splits splits = split_and_augment(set, cfg);
            fs::create_directories(out_dir);
            build_model(splits, cfg, out_dir);
            return 0;
        }

        if (tune->parsed()) {
            cfg.trials = cfg.tune_trials;
            const LabeledImageSet set = load_and_prepare(cfg);
            const Splits splits = split_and_augment(set, cfg);
            const ModelState base = checkpoint_load_file(cfg.checkpoint);
            fs::create_directories(out_dir);
            tune_model(base, splits, cfg, out_dir);
            return 0;
        }

        if (train_cmd->parsed()) {
            const LabeledImageSet set = load_and_prepare(cfg);
            const Splits splits = split_and_augment(set, cfg);
            const ModelState base = checkpoint_load_file(cfg.checkpoint);
            OptimizerConfig tcfg;
            if (!cfg.config_path.empty()) {
                std::ifstream in(cfg.config_path, std::ios::binary);
                if (!in) throw DpcnError("cannot open config '" + cfg.config_path + "'");
                std::ostringstream ss;
                ss << in.rdbuf();
                tcfg = optimizer_config_from_json(ss.str());
            }
            fs::create_directories(out_dir);
            train_model(base, splits, tcfg, cfg, out_dir);
            return 0;
        }

        if (eval_cmd->parsed()) {
            const LabeledImageSet set = load_and_prepare(cfg);
            const ModelState model = checkpoint_load_file(cfg.checkpoint);
            fs::create_directories(out_dir);
            if (cfg.split == "all") {
                evaluate_model(model, set, out_dir);
            } else {
                const Splits splits = split_and_augment(set, cfg);
                const LabeledImageSet& part = cfg.split == "train"
                                                  ? splits.train
                                                  : (cfg.split == "val" ? splits.val : splits.test);
                evaluate_model(model, part, out_dir);
            }
            return 0;
        }

        if (gradcam_cmd->parsed()) {
            const LabeledImageSet set = load_and_prepare(cfg);
            const ModelState model = checkpoint_load_file(cfg.checkpoint);
            gradcam_outputs(model, set, cfg, out_dir);
            return 0;
        }

        if (pipeline->parsed()) {
            const LabeledImageSet set = load_and_prepare(cfg);
            const Splits splits = split_and_augment(set, cfg);
            fs::create_directories(out_dir);
            const ModelState base = build_model(splits, cfg, out_dir);
            OptimizerConfig tcfg;
            if (cfg.trials > 0) tcfg = tune_model(base, splits, cfg, out_dir);
            const ModelState model = train_model(base, splits, tcfg, cfg, out_dir);
            evaluate_model(model, splits.test, out_dir);
            return 0;
        }
    } catch (const DpcnError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace dpcn
