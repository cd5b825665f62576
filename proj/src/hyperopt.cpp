#include "dpcn/hyperopt.hpp"

#include <atomic>
#include <thread>

#include <nlohmann/json.hpp>

namespace dpcn {

void SearchSpace::validate() const {
    if (optimizers.empty() || batch_sizes.empty() || activations.empty())
        throw DpcnError("search space: empty categorical dimension");
    if (!(lr_lo > 0.0 && lr_hi >= lr_lo)) throw DpcnError("search space: bad learning-rate range");
    if (!(dropout_lo >= 0.0 && dropout_hi < 1.0 && dropout_hi >= dropout_lo))
        throw DpcnError("search space: bad dropout range");
    if (trial_epochs < 1 || n_trials < 1)
        throw DpcnError("search space: trial_epochs and n_trials must be positive");
}

OptimizerConfig sample_trial(const SearchSpace& space, Rng& rng) {
    space.validate();
    OptimizerConfig cfg;
    cfg.algorithm = space.optimizers[rng.uniform_index(space.optimizers.size())];
    cfg.learning_rate = rng.log_uniform(space.lr_lo, space.lr_hi);
    cfg.batch_size = space.batch_sizes[rng.uniform_index(space.batch_sizes.size())];
    cfg.activation = space.activations[rng.uniform_index(space.activations.size())];
    cfg.dropout_p = rng.uniform(space.dropout_lo, space.dropout_hi);
    cfg.epochs = space.trial_epochs;
    return cfg;
}

std::string optimizer_config_json(const OptimizerConfig& cfg) {
    nlohmann::json j;
    j["optimizer"] = optimizer_name(cfg.algorithm);
    j["learning_rate"] = cfg.learning_rate;
    j["batch_size"] = cfg.batch_size;
    j["activation"] = cfg.activation;
    j["dropout"] = cfg.dropout_p;
    j["epochs"] = cfg.epochs;
    j["seed"] = cfg.seed;
    return j.dump(2) + "\n";
}

OptimizerConfig optimizer_config_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw DpcnError(std::string("config: ") + e.what());
    }
    OptimizerConfig cfg;
    if (j.contains("optimizer")) cfg.algorithm = parse_optimizer(j.at("optimizer").get<std::string>());
    if (j.contains("learning_rate")) cfg.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
    if (j.contains("activation")) cfg.activation = j.at("activation").get<std::string>();
    if (j.contains("dropout")) cfg.dropout_p = j.at("dropout").get<double>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

std::string trial_json_line(const Trial& trial) {
    nlohmann::json j;
    j["trial"] = trial.index;
    j["optimizer"] = optimizer_name(trial.config.algorithm);
    j["learning_rate"] = trial.config.learning_rate;
    j["batch_size"] = trial.config.batch_size;
    j["activation"] = trial.config.activation;
    j["dropout"] = trial.config.dropout_p;
    j["val_accuracy"] = trial.val_accuracy;
    j["diverged"] = trial.diverged;
    return j.dump() + "\n";
}

SearchResult run_search(const SearchSpace& space, const ModelState& base,
                        const LabeledImageSet& train_set, const LabeledImageSet& val_set,
                        Rng& rng, int threads,
                        const std::function<void(const Trial&)>& on_trial) {
    space.validate();
    SearchResult result;
    result.trials.resize(space.n_trials);

    const auto run_trial = [&](int t) {
        Rng trial_rng = rng.child(1000 + t);
        Trial& trial = result.trials[t];
        trial.index = t;
        trial.config = sample_trial(space, trial_rng);
        trial.config.seed = trial_rng.child(1).seed();
        try {
            const auto [model, report] = train(base, train_set, val_set, trial.config);
            trial.val_accuracy =
                report.best_epoch >= 0 ? report.val_accuracy[report.best_epoch] : 0.0;
        } catch (const TrainDivergence&) {
            trial.diverged = true;
            trial.val_accuracy = -1.0;
        }
        log::info("trial ", t, ": ", optimizer_name(trial.config.algorithm),
                  " lr=", trial.config.learning_rate, " batch=", trial.config.batch_size, " ",
                  trial.config.activation, " dropout=", trial.config.dropout_p,
                  trial.diverged ? " diverged" : "", " val_acc=", trial.val_accuracy);
    };

    if (threads <= 1) {
        for (int t = 0; t < space.n_trials; ++t) run_trial(t);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min(threads, space.n_trials); ++w) {
            pool.emplace_back([&] {
                for (int t = next.fetch_add(1); t < space.n_trials; t = next.fetch_add(1))
                    run_trial(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    for (const Trial& t : result.trials) {
        if (on_trial) on_trial(t);
        if (!t.diverged &&
            (result.best_index < 0 || t.val_accuracy > result.trials[result.best_index].val_accuracy))
            result.best_index = t.index;
    }
    if (result.best_index < 0) throw DpcnError("run_search: every trial diverged");
    result.best = result.trials[result.best_index].config;
    return result;
}

} // namespace dpcn
