#include <doctest.h>

#include <cmath>

#include "dpcn/dataset.hpp"
#include "dpcn/netbuilder.hpp"

using namespace dpcn;

namespace {

RepresentativeSet reps_from_toy(int per_class, int classes, int side, std::uint64_t seed) {
    Rng rng(seed);
    const LabeledImageSet set = generate_toy_dataset(per_class, classes, side, rng);
    RepresentativeSet reps;
    reps.num_classes = classes;
    for (const auto& img : set.items) {
        reps.images.push_back(img);
        reps.per_class_counts[img.grade]++;
    }
    return reps;
}

} // namespace

TEST_CASE("growth keeps the trace ratio non-decreasing and prunes the losing probe") {
    const RepresentativeSet reps = reps_from_toy(4, 3, 16, 101);
    const ModelState model = grow_architecture(reps, 0.99);
    const ArchSpec& arch = model.arch;
    const int depth = arch.depth();
    CHECK(depth >= 1);
    REQUIRE(static_cast<int>(arch.trace_history.size()) >= depth);
    for (int m = 1; m < depth; ++m)
        CHECK(arch.trace_history[m].second >= arch.trace_history[m - 1].second);
    if (static_cast<int>(arch.trace_history.size()) == depth + 1)
        CHECK(arch.trace_history[depth].second < arch.trace_history[depth - 1].second);
    CHECK_NOTHROW(arch.validate());
}

TEST_CASE("first block width equals the kernel bank derived from the raw inputs") {
    const RepresentativeSet reps = reps_from_toy(4, 2, 16, 102);
    const ModelState model = grow_architecture(reps, 0.95);
    std::vector<Tensor> maps;
    for (const auto& img : reps.images) maps.push_back(img.pixels);
    const KernelBank bank = derive_kernel_bank(extract_blocks(maps, 7, 7), 0.95);
    CHECK(model.arch.layers[0].out_channels == static_cast<int>(bank.kernels.size()));
    // kernels carried over verbatim
    const ConvParams& conv = model.params[0].conv;
    for (std::size_t oc = 0; oc < bank.kernels.size(); ++oc)
        for (int ky = 0; ky < 7; ++ky)
            for (int kx = 0; kx < 7; ++kx)
                CHECK(conv.w[conv.windex(ky, kx, 0, static_cast<int>(oc))] ==
                      bank.kernels[oc].at(0, ky, kx, 0));
}

TEST_CASE("identical classes stop growth at depth one with zero trace ratio") {
    Rng rng(103);
    LabeledImageSet base = generate_toy_dataset(3, 2, 16, rng);
    RepresentativeSet reps;
    reps.num_classes = 2;
    // class 1 duplicates class 0 image for image: no between-class signal
    for (const auto& img : base.items) {
        if (img.grade != 0) continue;
        reps.images.push_back(img);
        LabeledImage copy = img;
        copy.grade = 1;
        copy.id += "_twin";
        reps.images.push_back(copy);
    }
    reps.per_class_counts[0] = 3;
    reps.per_class_counts[1] = 3;
    const ModelState model = grow_architecture(reps, 0.99);
    CHECK(model.arch.depth() == 1);
    REQUIRE(model.arch.trace_history.size() == 1);
    CHECK(model.arch.trace_history[0].second < 1e-15);
}

TEST_CASE("growth is deterministic") {
    const RepresentativeSet reps = reps_from_toy(3, 2, 16, 104);
    const ModelState a = grow_architecture(reps, 0.99);
    const ModelState b = grow_architecture(reps, 0.99);
    CHECK(save_arch(a.arch) == save_arch(b.arch));
    CHECK(checkpoint_save(a) == checkpoint_save(b));
}

TEST_CASE("tiny inputs stop at the spatial floor") {
    Rng rng(105);
    RepresentativeSet reps;
    reps.num_classes = 2;
    for (int i = 0; i < 6; ++i) {
        LabeledImage img;
        img.pixels = Tensor::image(8, 8, 1);
        for (double& v : img.pixels.v) v = rng.uniform();
        img.grade = i % 2;
        img.id = "r" + std::to_string(i);
        reps.images.push_back(img);
        reps.per_class_counts[img.grade]++;
    }
    const ModelState model = grow_architecture(reps, 0.99);
    CHECK(model.arch.depth() <= 2); // 8 -> 4 -> 2 cannot tile another 3x3 block
    CHECK_NOTHROW(model.arch.validate());
}

TEST_CASE("grow rejects bad inputs") {
    RepresentativeSet empty;
    CHECK_THROWS_AS(grow_architecture(empty, 0.99), DpcnError);

    RepresentativeSet reps = reps_from_toy(3, 2, 16, 106);
    CHECK_THROWS_AS(grow_architecture(reps, 0.0), DpcnError);
    CHECK_THROWS_AS(grow_architecture(reps, 1.5), DpcnError);

    RepresentativeSet one_class;
    one_class.num_classes = 2;
    Rng rng(107);
    for (int i = 0; i < 3; ++i) {
        LabeledImage img;
        img.pixels = Tensor::image(16, 16, 1);
        for (double& v : img.pixels.v) v = rng.uniform();
        img.grade = 0;
        img.id = "x" + std::to_string(i);
        one_class.images.push_back(img);
    }
    one_class.per_class_counts[0] = 3;
    CHECK_THROWS_WITH_AS(grow_architecture(one_class, 0.99), doctest::Contains("2 classes"),
                         DpcnError);

    // constant images cannot seed a kernel bank
    RepresentativeSet flat;
    flat.num_classes = 2;
    for (int i = 0; i < 4; ++i) {
        LabeledImage img;
        img.pixels = Tensor::image(16, 16, 1);
        for (double& v : img.pixels.v) v = 0.5;
        img.grade = i % 2;
        img.id = "f" + std::to_string(i);
        flat.images.push_back(img);
        flat.per_class_counts[img.grade]++;
    }
    CHECK_THROWS_WITH_AS(grow_architecture(flat, 0.99), doctest::Contains("degenerate"),
                         DpcnError);
}

TEST_CASE("finalize_head appends the fixed head order and dense dimensions") {
    ArchSpec body;
    body.side = 16;
    body.channels = 1;
    body.num_classes = 2;
    LayerSpec l;
    l.kind = LayerSpec::Kind::conv_block;
    l.kernel_size = 7;
    l.out_channels = 10;
    l.activation = "relu";
    body.layers.push_back(l);
    body.layers.push_back({LayerSpec::Kind::maxpool, 0, 0, "", 0.0});

    const ArchSpec arch = finalize_head(body, 2, 0.3);
    REQUIRE(arch.layers.size() == 7);
    CHECK(arch.layers[2].kind == LayerSpec::Kind::gap);
    CHECK(arch.layers[3].kind == LayerSpec::Kind::gmp);
    CHECK(arch.layers[4].kind == LayerSpec::Kind::concat);
    CHECK(arch.layers[5].kind == LayerSpec::Kind::dropout);
    CHECK(arch.layers[6].kind == LayerSpec::Kind::softmax);

    ModelState model;
    model.arch = body;
    model.params.resize(2);
    model.params[0].bn.init(1);
    model.params[0].conv.init(7, 1, 10);
    Rng rng(108);
    finalize_head(model, 2, 0.3, rng);
    // softmax input is the 2 * 10 concat of gap and gmp
    CHECK(model.params.back().dense.in == 20);
    CHECK(model.params.back().dense.out == 2);
    CHECK(model.params.back().dense.w.size() + model.params.back().dense.b.size() == 42);

    // outside the tuned dropout range: warn, not error
    CHECK_NOTHROW(finalize_head(body, 2, 0.1));
    CHECK_THROWS_AS(finalize_head(ArchSpec{}, 2, 0.3), DpcnError);
    CHECK_THROWS_AS(finalize_head(arch, 2, 0.3), DpcnError); // head already present
}

TEST_CASE("complexity counts follow the stated conventions") {
    // conv7(1->3) on 16x16, pool, conv3(3->8) on 8x8, pool, head C=2
    ArchSpec body;
    body.side = 16;
    body.channels = 1;
    body.num_classes = 2;
    LayerSpec l;
    l.kind = LayerSpec::Kind::conv_block;
    l.kernel_size = 7;
    l.out_channels = 3;
    l.activation = "relu";
    body.layers.push_back(l);
    body.layers.push_back({LayerSpec::Kind::maxpool, 0, 0, "", 0.0});
    l.kernel_size = 3;
    l.out_channels = 8;
    body.layers.push_back(l);
    body.layers.push_back({LayerSpec::Kind::maxpool, 0, 0, "", 0.0});
    const ArchSpec arch = finalize_head(body, 2, 0.3);

    const ComplexityReport report = count_complexity(arch);
    const auto row = [&](const std::string& name) -> const ComplexityRow& {
        for (const auto& r : report.rows)
            if (r.name == name) return r;
        REQUIRE(false);
        return report.rows.front();
    };
    // hand counts for the second block: 3x3 conv, 3 -> 8 channels, 8x8 maps
    CHECK(row("conv2").params == 9 * 3 * 8);                     // 216
    CHECK(row("conv2").flops == 2LL * 9 * 3 * 8 * 8 * 8);        // 27648
    CHECK(row("bn2").params == 2 * 3);
    // first block on the 16x16 input
    CHECK(row("conv1").params == 49 * 1 * 3);
    CHECK(row("conv1").flops == 2LL * 49 * 1 * 3 * 16 * 16);
    CHECK(row("bn1").params == 2);
    // dense reads the 2*8 concat
    CHECK(row("dense").params == 16 * 2 + 2);
    CHECK(row("dense").flops == 2 * 16 * 2 + 2);

    long long params = 0;
    for (const auto& r : report.rows) params += r.params;
    CHECK(report.learnable_parameters == params);
    CHECK(report.learnable_parameters == 2 + 147 + 6 + 216 + 34);
    CHECK(report.flops > 0);

    CHECK_THROWS_AS(count_complexity(body), DpcnError); // head required
}

TEST_CASE("grown arch json round-trips byte-identically") {
    const RepresentativeSet reps = reps_from_toy(3, 2, 16, 109);
    ModelState model = grow_architecture(reps, 0.9);
    Rng rng(110);
    finalize_head(model, 2, 0.4, rng);
    const std::string once = save_arch(model.arch);
    CHECK(save_arch(load_arch(once)) == once);
}
