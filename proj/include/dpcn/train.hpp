#pragma once

#include <utility>

#include "dpcn/optim.hpp"

namespace dpcn {

// Thrown when the loss stops being finite; carries the epoch and batch.
struct TrainDivergence : DpcnError {
    using DpcnError::DpcnError;
};

struct TrainReport {
    std::vector<double> train_loss;  // one entry per epoch
    std::vector<double> val_loss;
    std::vector<double> val_accuracy;
    int best_epoch = -1;             // index of the max validation accuracy
    double wall_seconds = 0.0;
};

std::string train_report_json(const TrainReport& report);

// Mean cross-entropy and accuracy of a model over a set (eval mode).
std::pair<double, double> evaluate_loss_accuracy(const ModelState& model,
                                                 const LabeledImageSet& set,
                                                 int batch_size = 32);

// Minibatch training with seeded per-epoch shuffling; the parameters from
// the best-validation-accuracy epoch are returned. A non-finite loss aborts
// with the offending epoch and batch in the message.
std::pair<ModelState, TrainReport> train(const ModelState& initial,
                                         const LabeledImageSet& train_set,
                                         const LabeledImageSet& val_set,
                                         const OptimizerConfig& cfg);

// Maximum relative finite-difference error over `samples_per_tensor`
// seeded parameter draws from every learnable tensor. Central differences
// at step h, dropout disabled, BN on fixed-batch statistics. Samples whose
// two perturbed passes straddle a relu kink or flip a pooling argmax are
// skipped. Relative error uses denominator max(|fd|, |analytic|, 1e-6).
double finite_diff_check(const ModelState& model, const Tensor& batch,
                         const std::vector<int>& labels, int samples_per_tensor,
                         double h, Rng& rng);

} // namespace dpcn
