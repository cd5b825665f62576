#include "dpcn/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <tuple>

#include <nlohmann/json.hpp>

namespace dpcn {

std::string train_report_json(const TrainReport& report) {
    nlohmann::json j;
    j["train_loss"] = report.train_loss;
    j["val_loss"] = report.val_loss;
    j["val_accuracy"] = report.val_accuracy;
    j["best_epoch"] = report.best_epoch;
    j["wall_seconds"] = report.wall_seconds;
    return j.dump(2) + "\n";
}

std::pair<double, double> evaluate_loss_accuracy(const ModelState& model,
                                                 const LabeledImageSet& set,
                                                 int batch_size) {
    if (set.items.empty()) throw DpcnError("evaluate: empty set");
    double loss_sum = 0.0;
    long long correct = 0;
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < set.items.size(); start += batch_size) {
        idx.clear();
        for (std::size_t i = start; i < std::min(set.items.size(), start + batch_size); ++i)
            idx.push_back(i);
        const Tensor batch = make_batch(set, idx);
        const std::vector<int> labels = batch_labels(set, idx);
        const Tensor probs = model_forward(model, batch, Mode::eval);
        for (int n = 0; n < probs.n; ++n) {
            loss_sum -= std::log(std::max(probs.at(n, 0, 0, labels[n]), 1e-300));
            int arg = 0;
            for (int c = 1; c < probs.c; ++c)
                if (probs.at(n, 0, 0, c) > probs.at(n, 0, 0, arg)) arg = c;
            if (arg == labels[n]) ++correct;
        }
    }
    const double n = static_cast<double>(set.items.size());
    return {loss_sum / n, static_cast<double>(correct) / n};
}

std::pair<ModelState, TrainReport> train(const ModelState& initial,
                                         const LabeledImageSet& train_set,
                                         const LabeledImageSet& val_set,
                                         const OptimizerConfig& cfg) {
    if (train_set.items.empty() || val_set.items.empty())
        throw DpcnError("train: training and validation sets must be nonempty");
    if (train_set.num_classes != val_set.num_classes)
        throw DpcnError("train: class count mismatch between train and val");
    if (cfg.batch_size < 1) throw DpcnError("train: batch_size must be positive");
    if (!(cfg.learning_rate > 0.0)) throw DpcnError("train: learning rate must be positive");

    const auto t0 = std::chrono::steady_clock::now();
    ModelState model = initial;
    apply_overrides(model, cfg.activation, cfg.dropout_p);
    model.validate_shapes();
    model.train_mode = true;

    TrainReport report;
    if (cfg.epochs == 0) {
        model.train_mode = false;
        return {std::move(model), std::move(report)};
    }

    Rng rng(cfg.seed);
    OptState opt = OptState::for_model(model);
    ModelState best = model;
    double best_acc = -1.0;

    std::vector<std::size_t> order(train_set.items.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        int batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
            std::vector<std::size_t> idx(
                order.begin() + start,
                order.begin() + std::min(order.size(), start + cfg.batch_size));
            const Tensor batch = make_batch(train_set, idx);
            const std::vector<int> labels = batch_labels(train_set, idx);

            Gradients grads;
            ForwardCache cache;
            const double loss =
                loss_and_grad(model, batch, labels, Mode::train, &rng, &grads, &cache);
            if (!std::isfinite(loss))
                throw TrainDivergence("train: loss is not finite at epoch " +
                                      std::to_string(epoch) + " batch " +
                                      std::to_string(batch_no));
            update_bn_running(model, cache);
            optimizer_step(opt, learnable_tensors(model), gradient_tensors(grads, model), cfg);
            epoch_loss += loss * static_cast<double>(idx.size());
        }
        report.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));

        double vloss = 0.0, vacc = 0.0;
        try {
            std::tie(vloss, vacc) = evaluate_loss_accuracy(model, val_set);
        } catch (const DpcnError& e) {
            // non-finite activations during validation mean the run blew up
            throw TrainDivergence("train: validation failed at epoch " + std::to_string(epoch) +
                                  " (" + e.what() + ")");
        }
        report.val_loss.push_back(vloss);
        report.val_accuracy.push_back(vacc);
        if (vacc > best_acc) {
            best_acc = vacc;
            best = model;
            report.best_epoch = epoch;
        }
        log::debug("epoch ", epoch, " train_loss=", report.train_loss.back(),
                   " val_loss=", vloss, " val_acc=", vacc);
    }
    best.train_mode = false;
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(best), std::move(report)};
}

double finite_diff_check(const ModelState& model, const Tensor& batch,
                         const std::vector<int>& labels, int samples_per_tensor,
                         double h, Rng& rng) {
    ModelState probe = model;
    Gradients grads;
    loss_and_grad(probe, batch, labels, Mode::grad_check, nullptr, &grads);

    const auto params = learnable_tensors(probe);
    const auto gviews = gradient_tensors(grads, probe);

    double max_rel = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        std::vector<double>& tensor = *params[t];
        if (tensor.empty()) continue;
        const int want = std::min<std::size_t>(samples_per_tensor, tensor.size());
        int taken = 0;
        int attempts = 0;
        const int max_attempts = want * 4;
        while (taken < want && attempts < max_attempts) {
            ++attempts;
            const std::size_t i = rng.uniform_index(tensor.size());
            const double saved = tensor[i];
            std::uint64_t tok_plus = 0, tok_minus = 0;
            tensor[i] = saved + h;
            const double f_plus = loss_only(probe, batch, labels, Mode::grad_check, &tok_plus);
            tensor[i] = saved - h;
            const double f_minus = loss_only(probe, batch, labels, Mode::grad_check, &tok_minus);
            tensor[i] = saved;
            if (tok_plus != tok_minus) continue; // kink between the two evaluations
            ++taken;
            const double fd = (f_plus - f_minus) / (2.0 * h);
            const double g = (*gviews[t])[i];
            const double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
            max_rel = std::max(max_rel, std::abs(fd - g) / denom);
        }
    }
    return max_rel;
}

} // namespace dpcn
