#include <doctest.h>

#include <cmath>

#include "dpcn/optim.hpp"

using namespace dpcn;

namespace {

// one scalar parameter, standalone views
struct Scalar {
    std::vector<double> p{1.0};
    std::vector<double> g{1.0};
    OptState state;

    Scalar() {
        state.m.assign(1, std::vector<double>(1, 0.0));
        state.v.assign(1, std::vector<double>(1, 0.0));
    }
    void step(const OptimizerConfig& cfg) {
        std::vector<std::vector<double>*> pv{&p}, gv{&g};
        optimizer_step(state, pv, gv, cfg);
    }
};

} // namespace

TEST_CASE("sgd arithmetic") {
    Scalar s;
    OptimizerConfig cfg;
    cfg.algorithm = OptAlgorithm::sgd;
    cfg.learning_rate = 0.1;
    s.step(cfg);
    CHECK(s.p[0] == doctest::Approx(0.9).epsilon(1e-15));
}

TEST_CASE("adam first step moves by about the learning rate for any gradient scale") {
    // bias-corrected first step: lr * g/(|g| + eps') with eps scaled away
    for (double g0 : {1.0, 1e-3, 42.0}) {
        Scalar s;
        s.g[0] = g0;
        OptimizerConfig cfg;
        cfg.algorithm = OptAlgorithm::adam;
        cfg.learning_rate = 0.01;
        s.step(cfg);
        // by hand: m_hat = g, v_hat = g^2, update = lr * g / (|g| + eps)
        const double expect = 1.0 - 0.01 * g0 / (std::abs(g0) + kAdamEps);
        CHECK(s.p[0] == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::abs(1.0 - s.p[0]) == doctest::Approx(0.01).epsilon(1e-6));
    }
}

TEST_CASE("rmsprop first step") {
    Scalar s;
    OptimizerConfig cfg;
    cfg.algorithm = OptAlgorithm::rmsprop;
    cfg.learning_rate = 0.01;
    s.step(cfg);
    // v = 0.1 * 1, update = lr / (sqrt(0.1) + eps)
    const double expect = 1.0 - 0.01 / (std::sqrt(0.1) + kRmsEps);
    CHECK(s.p[0] == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("zero gradient is a fixed point for all three algorithms") {
    for (OptAlgorithm alg : {OptAlgorithm::sgd, OptAlgorithm::adam, OptAlgorithm::rmsprop}) {
        Scalar s;
        s.g[0] = 0.0;
        OptimizerConfig cfg;
        cfg.algorithm = alg;
        cfg.learning_rate = 0.5;
        for (int i = 0; i < 5; ++i) s.step(cfg);
        CHECK(s.p[0] == 1.0);
    }
}

TEST_CASE("optimizer parsing") {
    CHECK(parse_optimizer("sgd") == OptAlgorithm::sgd);
    CHECK(parse_optimizer("adam") == OptAlgorithm::adam);
    CHECK(parse_optimizer("rmsprop") == OptAlgorithm::rmsprop);
    CHECK_THROWS_AS(parse_optimizer("adamw"), DpcnError);
    CHECK(std::string(optimizer_name(OptAlgorithm::rmsprop)) == "rmsprop");
}

TEST_CASE("layout mismatch is rejected") {
    Scalar s;
    std::vector<double> short_grad;
    std::vector<std::vector<double>*> pv{&s.p}, gv{&short_grad};
    OptimizerConfig cfg;
    CHECK_THROWS_AS(optimizer_step(s.state, pv, gv, cfg), DpcnError);
}
