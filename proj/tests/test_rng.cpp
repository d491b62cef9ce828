#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "xsim/rng.hpp"

using namespace xsim;

TEST_CASE("identical seeds give identical streams") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}

TEST_CASE("uniform stays inside its bounds") {
    Rng rng(7);
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform(-3.0, 5.0);
        CHECK(u >= -3.0);
        CHECK(u < 5.0);
    }
}

TEST_CASE("uniform_int covers the full range and nothing else") {
    Rng rng(9);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 20000; ++i) {
        int v = rng.uniform_int(10);
        REQUIRE(v >= 0);
        REQUIRE(v < 10);
        counts[static_cast<size_t>(v)]++;
    }
    for (int c : counts) CHECK(c > 0);
}

TEST_CASE("normal has roughly standard moments") {
    Rng rng(11);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        double v = rng.normal();
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("shuffle produces a permutation and is seed-deterministic") {
    std::vector<int> v(100);
    std::iota(v.begin(), v.end(), 0);
    std::vector<int> w = v;

    Rng a(123);
    a.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == w);

    std::vector<int> v2(100);
    std::iota(v2.begin(), v2.end(), 0);
    Rng b(123);
    b.shuffle(v2);
    CHECK(v2 == v);
}

TEST_CASE("derived streams are independent of parent consumption") {
    // derive() must depend only on the parent's seed, not on how much of the
    // parent stream has been drawn.
    Rng parent1(77);
    Rng child1 = parent1.derive(5);

    Rng parent2(77);
    for (int i = 0; i < 50; ++i) parent2.next_u64();
    Rng child2 = parent2.derive(5);

    for (int i = 0; i < 100; ++i) CHECK(child1.next_u64() == child2.next_u64());
}

TEST_CASE("derived streams with different tags disagree") {
    Rng parent(77);
    Rng a = parent.derive(1);
    Rng b = parent.derive(2);
    int same = 0;
    for (int i = 0; i < 64; ++i)
        if (a.next_u64() == b.next_u64()) ++same;
    CHECK(same == 0);
}
