#include <doctest.h>

#include <set>

#include "dpcn/dataset.hpp"
#include "dpcn/representatives.hpp"
#include "helpers.hpp"

using namespace dpcn;

TEST_CASE("singleton classes contribute their only sample") {
    Rng toy(41);
    LabeledImageSet train = generate_toy_dataset(1, 3, 16, toy);
    Rng rng(42);
    const RepresentativeSet reps = select_representatives(train, rng);
    REQUIRE(reps.images.size() == 3);
    std::set<std::string> ids;
    for (const auto& img : reps.images) ids.insert(img.id);
    for (const auto& img : train.items) CHECK(ids.count(img.id) == 1);
}

TEST_CASE("representatives are exact members of the training set") {
    Rng toy(43);
    LabeledImageSet train = generate_toy_dataset(12, 3, 16, toy);
    Rng rng(44);
    const RepresentativeSet reps = select_representatives(train, rng);
    CHECK(reps.images.size() >= 3);
    for (const auto& rep : reps.images) {
        bool found = false;
        for (const auto& item : train.items) {
            if (item.id == rep.id) {
                found = true;
                CHECK(item.pixels.v == rep.pixels.v); // medoid property: bit-identical
                CHECK(item.grade == rep.grade);
            }
        }
        CHECK(found);
    }
    // every class contributes at least one representative
    for (int k = 0; k < 3; ++k) {
        REQUIRE(reps.per_class_counts.count(k) == 1);
        CHECK(reps.per_class_counts.at(k) >= 1);
    }
}

TEST_CASE("two texture families per class yield multiple representatives") {
    // class 0 mixes two clearly different texture populations
    Rng toy_a(45), toy_b(46);
    LabeledImageSet a = generate_toy_dataset(10, 2, 16, toy_a);   // orientations 0 and 90
    LabeledImageSet b = generate_toy_dataset(10, 3, 16, toy_b);   // orientations 0, 60, 120
    LabeledImageSet train;
    train.num_classes = 2;
    for (auto& item : a.items)
        if (item.grade == 0) {
            item.id = "fam0_" + item.id;
            train.items.push_back(item);
        }
    for (auto& item : b.items)
        if (item.grade == 2) { // 120-degree gratings, same class label 0
            item.grade = 0;
            item.id = "fam1_" + item.id;
            train.items.push_back(item);
        }
    for (auto& item : a.items)
        if (item.grade == 1) {
            train.items.push_back(item);
        }
    Rng rng(47);
    const RepresentativeSet reps = select_representatives(train, rng);
    CHECK(reps.per_class_counts.at(0) >= 2);
}

TEST_CASE("results do not depend on the thread count") {
    Rng toy(48);
    LabeledImageSet train = generate_toy_dataset(8, 3, 16, toy);
    Rng r1(49), r4(49);
    const RepresentativeSet seq = select_representatives(train, r1, 1);
    const RepresentativeSet par = select_representatives(train, r4, 4);
    REQUIRE(seq.images.size() == par.images.size());
    for (std::size_t i = 0; i < seq.images.size(); ++i) {
        CHECK(seq.images[i].id == par.images[i].id);
        CHECK(seq.images[i].pixels.v == par.images[i].pixels.v);
    }
}

TEST_CASE("manifest lists ids per class") {
    Rng toy(50);
    LabeledImageSet train = generate_toy_dataset(4, 2, 16, toy);
    Rng rng(51);
    const RepresentativeSet reps = select_representatives(train, rng);
    TempDir dir("reps");
    write_representatives(dir.str(), reps);
    const std::string manifest = read_file(dir.file("manifest.json"));
    CHECK(manifest.find("\"class\"") != std::string::npos);
    CHECK(manifest.find("\"ids\"") != std::string::npos);
    for (const auto& img : reps.images)
        CHECK(std::filesystem::exists(dir.path / "images" / img.id));
}
