#include <doctest.h>

#include "dpcn/arch.hpp"
#include "helpers.hpp"

using namespace dpcn;

namespace {

ArchSpec sample_arch() {
    ArchSpec a;
    a.side = 32;
    a.channels = 1;
    a.num_classes = 3;
    LayerSpec l;
    l.kind = LayerSpec::Kind::conv_block;
    l.kernel_size = 7;
    l.out_channels = 5;
    l.activation = "relu";
    a.layers.push_back(l);
    a.layers.push_back({LayerSpec::Kind::maxpool, 0, 0, "", 0.0});
    l.kernel_size = 3;
    l.out_channels = 4;
    a.layers.push_back(l);
    a.layers.push_back({LayerSpec::Kind::maxpool, 0, 0, "", 0.0});
    a.layers.push_back({LayerSpec::Kind::gap, 0, 0, "", 0.0});
    a.layers.push_back({LayerSpec::Kind::gmp, 0, 0, "", 0.0});
    a.layers.push_back({LayerSpec::Kind::concat, 0, 0, "", 0.0});
    a.layers.push_back({LayerSpec::Kind::dropout, 0, 0, "", 0.4});
    a.layers.push_back({LayerSpec::Kind::softmax, 0, 0, "", 0.0});
    a.trace_history = {{1, 0.5}, {2, 0.9}, {3, 0.7}};
    return a;
}

} // namespace

TEST_CASE("save-load-save is byte identical") {
    const ArchSpec a = sample_arch();
    const std::string first = save_arch(a);
    const ArchSpec back = load_arch(first);
    const std::string second = save_arch(back);
    CHECK(first == second);
    CHECK(back.depth() == 2);
    CHECK(back.num_classes == 3);
    REQUIRE(back.trace_history.size() == 3);
    CHECK(back.trace_history[1].second == 0.9);
}

TEST_CASE("truncated json reports a parse error with position") {
    const std::string good = save_arch(sample_arch());
    const std::string bad = good.substr(0, good.size() / 2);
    CHECK_THROWS_AS(load_arch(bad), DpcnError);
    try {
        load_arch(bad);
    } catch (const DpcnError& e) {
        CHECK(std::string(e.what()).find("parse") != std::string::npos);
    }
}

TEST_CASE("unknown fields are rejected") {
    std::string text = save_arch(sample_arch());
    text.insert(text.find("\"input\""), "\"extra\": 1,\n  ");
    CHECK_THROWS_WITH_AS(load_arch(text), doctest::Contains("unknown field"), DpcnError);
}

TEST_CASE("hand-written minimal arch loads and validates") {
    const std::string text = R"({
      "input": [16, 16, 1],
      "num_classes": 2,
      "layers": [
        {"kind": "conv_block", "kernel_size": 7, "out_channels": 3, "activation": "relu"},
        {"kind": "maxpool"},
        {"kind": "gap"}, {"kind": "gmp"}, {"kind": "concat"},
        {"kind": "dropout", "p": 0.25},
        {"kind": "softmax"}
      ],
      "trace_history": [[1, 0.25]]
    })";
    const ArchSpec a = load_arch(text);
    CHECK(a.depth() == 1);
    CHECK(a.has_head());
    CHECK(a.layers[5].p == 0.25);
}

TEST_CASE("structural invariants are enforced") {
    ArchSpec a = sample_arch();
    a.layers[0].kernel_size = 3; // first block must be 7x7
    CHECK_THROWS_AS(a.validate(), DpcnError);

    ArchSpec b = sample_arch();
    b.layers[2].kernel_size = 7; // later blocks must be 3x3
    CHECK_THROWS_AS(b.validate(), DpcnError);

    ArchSpec c = sample_arch();
    c.layers.erase(c.layers.begin() + 1); // missing pool after block 1
    CHECK_THROWS_AS(c.validate(), DpcnError);

    ArchSpec d = sample_arch();
    std::swap(d.layers[4], d.layers[5]); // head order fixed
    CHECK_THROWS_AS(d.validate(), DpcnError);

    ArchSpec e = sample_arch();
    e.trace_history = {{1, 0.9}, {2, 0.5}, {3, 0.7}}; // decreasing over retained layers
    CHECK_THROWS_AS(e.validate(), DpcnError);

    ArchSpec f = sample_arch();
    f.trace_history = {{1, 0.5}, {2, 0.9}}; // no rejected probe is fine
    CHECK_NOTHROW(f.validate());
}

TEST_CASE("arch file round-trip") {
    TempDir dir("arch");
    const ArchSpec a = sample_arch();
    save_arch_file(a, dir.file("arch.json"));
    const ArchSpec b = load_arch_file(dir.file("arch.json"));
    CHECK(save_arch(a) == save_arch(b));
}
