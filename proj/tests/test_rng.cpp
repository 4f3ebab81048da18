#include "doctest.h"

#include <vector>

#include "ikc/rng.hpp"

using ikc::Rng;

TEST_SUITE("rng") {

TEST_CASE("same seed, same stream") {
    Rng a(42), b(42);
    for (int i = 0; i < 1000; ++i) CHECK(a.next() == b.next());
}

TEST_CASE("derived streams differ by any key component") {
    Rng a = Rng::derive(7, {1, 2, 3});
    Rng b = Rng::derive(7, {1, 2, 4});
    Rng c = Rng::derive(8, {1, 2, 3});
    int equal_ab = 0, equal_ac = 0;
    for (int i = 0; i < 64; ++i) {
        const auto va = a.next();
        equal_ab += va == b.next();
        equal_ac += va == c.next();
    }
    CHECK(equal_ab < 4);
    CHECK(equal_ac < 4);
}

TEST_CASE("uniform stays in [0,1) with sane mean") {
    Rng rng(11);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("bernoulli frequency tracks p") {
    Rng rng(5);
    int hits = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3);
    // 5 sigma band around 0.3
    CHECK(std::abs(hits / double(n) - 0.3) < 5.0 * std::sqrt(0.3 * 0.7 / n));
}

TEST_CASE("normal moments") {
    Rng rng(17);
    double sum = 0.0, sq = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    CHECK(sum / n == doctest::Approx(0.0).epsilon(0.02));
    CHECK(sq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below is bounded and roughly uniform") {
    Rng rng(3);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) {
        const auto v = rng.below(10);
        REQUIRE(v < 10);
        ++counts[v];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 600);
}

TEST_CASE("shuffle is a permutation") {
    Rng rng(9);
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i;
    auto w = v;
    rng.shuffle(w);
    CHECK(w != v);  // astronomically unlikely to be identity
    std::sort(w.begin(), w.end());
    CHECK(w == v);
}

}  // TEST_SUITE
