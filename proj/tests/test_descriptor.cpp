#include <doctest.h>

#include <cmath>

#include "dpcn/descriptor.hpp"
#include "dpcn/rng.hpp"

using namespace dpcn;

namespace {

LabeledImage image_from(const std::vector<std::vector<double>>& rows, const std::string& id) {
    LabeledImage img;
    const int h = static_cast<int>(rows.size());
    const int w = static_cast<int>(rows[0].size());
    img.pixels = Tensor::image(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.pixels.at(0, y, x, 0) = rows[y][x];
    img.id = id;
    return img;
}

} // namespace

TEST_CASE("descriptor has the documented layout") {
    LabeledImage img;
    img.pixels = Tensor::image(16, 16, 1);
    Rng rng(4);
    for (double& v : img.pixels.v) v = rng.uniform();
    const DescriptorVector d = compute_descriptor(img);
    REQUIRE(d.values.size() == 75);
    double lbp_sum = 0.0, grad_sum = 0.0;
    for (int b = 0; b < 59; ++b) lbp_sum += d.values[b];
    for (int b = 59; b < 75; ++b) grad_sum += d.values[b];
    CHECK(lbp_sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(grad_sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("constant image concentrates LBP mass in the all-zero pattern") {
    LabeledImage img;
    img.pixels = Tensor::image(16, 16, 1);
    for (double& v : img.pixels.v) v = 0.3;
    const DescriptorVector d = compute_descriptor(img);
    // pattern 0 is uniform and maps to bin 0 in ascending order
    CHECK(d.values[0] == doctest::Approx(1.0).epsilon(1e-12));
    // zero gradient everywhere: orientation histogram is uniform by convention
    for (int b = 0; b < 16; ++b)
        CHECK(d.values[59 + b] == doctest::Approx(1.0 / 16).epsilon(1e-12));
}

TEST_CASE("vertical step edge puts gradient mass in the zero-degree bin") {
    // hand check on a 4x4 step: interior gx = 0.5 or 0, gy = 0 everywhere,
    // so every nonzero gradient points along +x
    const LabeledImage img = image_from({{0, 0, 1, 1},
                                         {0, 0, 1, 1},
                                         {0, 0, 1, 1},
                                         {0, 0, 1, 1}},
                                        "step");
    const DescriptorVector d = compute_descriptor(img);
    CHECK(d.values[59 + 0] == doctest::Approx(1.0).epsilon(1e-12));
    for (int b = 1; b < 16; ++b) CHECK(d.values[59 + b] == doctest::Approx(0.0));
}

TEST_CASE("identical images give identical descriptors") {
    LabeledImage img;
    img.pixels = Tensor::image(20, 20, 1);
    Rng rng(9);
    for (double& v : img.pixels.v) v = rng.uniform();
    const DescriptorVector a = compute_descriptor(img);
    const DescriptorVector b = compute_descriptor(img);
    CHECK(a.values == b.values);
}

TEST_CASE("color images use the green channel") {
    LabeledImage color;
    color.pixels = Tensor::image(16, 16, 3);
    LabeledImage gray;
    gray.pixels = Tensor::image(16, 16, 1);
    Rng rng(12);
    for (int y = 0; y < 16; ++y) {
        for (int x = 0; x < 16; ++x) {
            const double g = rng.uniform();
            gray.pixels.at(0, y, x, 0) = g;
            color.pixels.at(0, y, x, 0) = rng.uniform(); // red channel is noise
            color.pixels.at(0, y, x, 1) = g;
            color.pixels.at(0, y, x, 2) = rng.uniform();
        }
    }
    CHECK(compute_descriptor(color).values == compute_descriptor(gray).values);
}
