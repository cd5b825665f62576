#pragma once

#include <functional>

#include "dpcn/train.hpp"

namespace dpcn {

// The tuned dimensions and their ranges. Defaults cover three optimizers,
// log-uniform learning rate over [1e-5, 1e-1], batch sizes {5,10,15,20},
// three activations and dropout in [0.25, 0.5].
struct SearchSpace {
    std::vector<OptAlgorithm> optimizers = {OptAlgorithm::sgd, OptAlgorithm::adam,
                                            OptAlgorithm::rmsprop};
    double lr_lo = 1e-5, lr_hi = 1e-1;
    std::vector<int> batch_sizes = {5, 10, 15, 20};
    std::vector<std::string> activations = {"relu", "lrelu", "sigmoid"};
    double dropout_lo = 0.25, dropout_hi = 0.5;
    int trial_epochs = 10;
    int n_trials = 20;

    void validate() const;
};

// One independent draw per dimension; deterministic given the stream.
OptimizerConfig sample_trial(const SearchSpace& space, Rng& rng);

struct Trial {
    int index = 0;
    OptimizerConfig config;
    double val_accuracy = -1.0;
    bool diverged = false;
};

struct SearchResult {
    OptimizerConfig best;
    int best_index = -1;
    std::vector<Trial> trials;
};

std::string trial_json_line(const Trial& trial);
std::string optimizer_config_json(const OptimizerConfig& cfg);
OptimizerConfig optimizer_config_from_json(const std::string& text);

// Seeded random search: every trial trains a fresh copy of the initialized
// model for trial_epochs and reports its best validation accuracy. Ties go
// to the earliest trial; trials whose loss diverges are recorded and
// skipped. Trials use independent child streams, so any thread count gives
// the same log.
SearchResult run_search(const SearchSpace& space, const ModelState& base,
                        const LabeledImageSet& train_set, const LabeledImageSet& val_set,
                        Rng& rng, int threads = 1,
                        const std::function<void(const Trial&)>& on_trial = nullptr);

} // namespace dpcn
