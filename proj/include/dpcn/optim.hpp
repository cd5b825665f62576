#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dpcn/model.hpp"

namespace dpcn {

enum class OptAlgorithm { sgd, adam, rmsprop };

OptAlgorithm parse_optimizer(const std::string& name);
const char* optimizer_name(OptAlgorithm a);

struct OptimizerConfig {
    OptAlgorithm algorithm = OptAlgorithm::adam;
    double learning_rate = 1e-3;
    int batch_size = 10;
    std::string activation;   // empty keeps the architecture's activation
    double dropout_p = -1.0;  // negative keeps the architecture's value
    int epochs = 30;
    std::uint64_t seed = 0;
};

// Flat views over every learnable parameter of a model (BN running
// statistics are not learnable and are excluded).
std::vector<std::vector<double>*> learnable_tensors(ModelState& model);
std::vector<std::vector<double>*> gradient_tensors(Gradients& grads, const ModelState& model);

// First/second-moment state for adam and rmsprop, laid out like the
// learnable tensors.
struct OptState {
    std::vector<std::vector<double>> m, v;
    long long step = 0;

    static OptState for_model(ModelState& model);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;
inline constexpr double kRmsDecay = 0.9;
inline constexpr double kRmsEps = 1e-8;

// One update: sgd p -= lr*g; adam with bias correction; rmsprop with decay
// 0.9. Shapes must agree with the state.
void optimizer_step(OptState& state, const std::vector<std::vector<double>*>& params,
                    const std::vector<std::vector<double>*>& grads, const OptimizerConfig& cfg);

} // namespace dpcn
