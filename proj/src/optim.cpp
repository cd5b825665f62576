#include "dpcn/optim.hpp"

#include <cmath>

namespace dpcn {

OptAlgorithm parse_optimizer(const std::string& name) {
    if (name == "sgd") return OptAlgorithm::sgd;
    if (name == "adam") return OptAlgorithm::adam;
    if (name == "rmsprop") return OptAlgorithm::rmsprop;
    throw DpcnError("unknown optimizer '" + name + "'");
}

const char* optimizer_name(OptAlgorithm a) {
    switch (a) {
        case OptAlgorithm::sgd: return "sgd";
        case OptAlgorithm::adam: return "adam";
        default: return "rmsprop";
    }
}

std::vector<std::vector<double>*> learnable_tensors(ModelState& model) {
    std::vector<std::vector<double>*> out;
    for (std::size_t i = 0; i < model.arch.layers.size(); ++i) {
        LayerParams& p = model.params[i];
        switch (model.arch.layers[i].kind) {
            case LayerSpec::Kind::conv_block:
                out.push_back(&p.bn.gamma);
                out.push_back(&p.bn.beta);
                out.push_back(&p.conv.w);
                break;
            case LayerSpec::Kind::softmax:
                out.push_back(&p.dense.w);
                out.push_back(&p.dense.b);
                break;
            default:
                break;
        }
    }
    return out;
}

std::vector<std::vector<double>*> gradient_tensors(Gradients& grads, const ModelState& model) {
    if (grads.layers.size() != model.arch.layers.size())
        grads.layers.resize(model.arch.layers.size());
    std::vector<std::vector<double>*> out;
    for (std::size_t i = 0; i < model.arch.layers.size(); ++i) {
        LayerParams& g = grads.layers[i];
        switch (model.arch.layers[i].kind) {
            case LayerSpec::Kind::conv_block:
                out.push_back(&g.bn.gamma);
                out.push_back(&g.bn.beta);
                out.push_back(&g.conv.w);
                break;
            case LayerSpec::Kind::softmax:
                out.push_back(&g.dense.w);
                out.push_back(&g.dense.b);
                break;
            default:
                break;
        }
    }
    return out;
}

OptState OptState::for_model(ModelState& model) {
    OptState s;
    for (auto* t : learnable_tensors(model)) {
        s.m.emplace_back(t->size(), 0.0);
        s.v.emplace_back(t->size(), 0.0);
    }
    return s;
}

void optimizer_step(OptState& state, const std::vector<std::vector<double>*>& params,
                    const std::vector<std::vector<double>*>& grads, const OptimizerConfig& cfg) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw DpcnError("optimizer_step: parameter/gradient layout mismatch");
    state.step++;
    const double lr = cfg.learning_rate;
    for (std::size_t t = 0; t < params.size(); ++t) {
        std::vector<double>& p = *params[t];
        const std::vector<double>& g = *grads[t];
        if (p.size() != g.size()) throw DpcnError("optimizer_step: tensor shape mismatch");
        switch (cfg.algorithm) {
            case OptAlgorithm::sgd:
                for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
                break;
            case OptAlgorithm::adam: {
                const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step));
                const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step));
                for (std::size_t i = 0; i < p.size(); ++i) {
                    state.m[t][i] = kAdamBeta1 * state.m[t][i] + (1.0 - kAdamBeta1) * g[i];
                    state.v[t][i] = kAdamBeta2 * state.v[t][i] + (1.0 - kAdamBeta2) * g[i] * g[i];
                    const double mhat = state.m[t][i] / bc1;
                    const double vhat = state.v[t][i] / bc2;
                    p[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
                }
                break;
            }
            case OptAlgorithm::rmsprop:
                for (std::size_t i = 0; i < p.size(); ++i) {
                    state.v[t][i] = kRmsDecay * state.v[t][i] + (1.0 - kRmsDecay) * g[i] * g[i];
                    p[i] -= lr * g[i] / (std::sqrt(state.v[t][i]) + kRmsEps);
                }
                break;
        }
    }
}

} // namespace dpcn
