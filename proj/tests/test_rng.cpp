#include <doctest.h>

#include <algorithm>
#include <vector>

#include "dpcn/rng.hpp"

using dpcn::Rng;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays in bounds") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("uniform_index covers all buckets") {
    Rng rng(11);
    int counts[7] = {0};
    for (int i = 0; i < 7000; ++i) counts[rng.uniform_index(7)]++;
    for (int c : counts) CHECK(c > 0);
}

TEST_CASE("children do not depend on parent draw history") {
    Rng a(9), b(9);
    a.next_u64(); // advance the parent; children must be unaffected
    CHECK(a.child(3).next_u64() == b.child(3).next_u64());
    CHECK(a.child(3).next_u64() != a.child(4).next_u64());
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v1{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<int> v2 = v1;
    const std::vector<int> orig = v1;
    Rng a(5), b(5);
    a.shuffle(v1);
    b.shuffle(v2);
    CHECK(v1 == v2);
    std::vector<int> sorted = v1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == orig);
}
