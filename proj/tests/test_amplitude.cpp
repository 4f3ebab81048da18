#include "doctest.h"

#include <cmath>
#include <vector>

#include "ikc/amplitude.hpp"
#include "ikc/rng.hpp"

using namespace ikc;

namespace {

// Brute-force oracle: incoherent part plus an explicit double loop over
// all pairwise cross-terms.
double coherent_by_cross_terms(const std::vector<Amplitude>& a) {
    double e = 0.0;
    for (const auto& z : a) e += std::norm(z);
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = i + 1; j < a.size(); ++j)
            e += 2.0 * (a[i] * std::conj(a[j])).real();
    return e;
}

std::vector<Amplitude> random_components(Rng& rng, std::size_t k) {
    std::vector<Amplitude> a(k);
    for (auto& z : a) z = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    return a;
}

}  // namespace

TEST_SUITE("amplitude") {

TEST_CASE("coherent energy on aligned and orthogonal phases") {
    std::vector<Amplitude> aligned{{1, 0}, {1, 0}};
    CHECK(coherent_energy(aligned) == doctest::Approx(4.0));
    std::vector<Amplitude> orthogonal{{1, 0}, {0, 1}};
    CHECK(coherent_energy(orthogonal) == doctest::Approx(2.0));
}

TEST_CASE("incoherent energy basics") {
    std::vector<Amplitude> aligned{{1, 0}, {1, 0}};
    CHECK(incoherent_energy(aligned) == doctest::Approx(2.0));
    std::vector<Amplitude> single{{3, 4}};
    CHECK(incoherent_energy(single) == doctest::Approx(25.0));
    CHECK(coherent_energy(single) == doctest::Approx(25.0));
    std::vector<Amplitude> orthogonal{{1, 0}, {0, 1}};
    CHECK(incoherent_energy(orthogonal) == doctest::Approx(2.0));
}

TEST_CASE("empty sequence is a precondition error") {
    std::vector<Amplitude> empty;
    CHECK_THROWS_AS(coherent_energy(empty), std::invalid_argument);
    CHECK_THROWS_AS(incoherent_energy(empty), std::invalid_argument);
}

TEST_CASE("coherent equals cross-term expansion (seeded, K=5)") {
    Rng rng(20231);
    const auto a = random_components(rng, 5);
    CHECK(coherent_energy(a) ==
          doctest::Approx(coherent_by_cross_terms(a)).epsilon(1e-12));
}

TEST_CASE("cross-term identity holds for random K") {
    Rng rng(77);
    for (int rep = 0; rep < 200; ++rep) {
        const auto a = random_components(rng, 1 + rng.below(8));
        const double coh = coherent_energy(a);
        const double oracle = coherent_by_cross_terms(a);
        CHECK(std::abs(coh - oracle) <= 1e-10 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("global phase invariance of both energies") {
    Rng rng(101);
    for (int rep = 0; rep < 100; ++rep) {
        const auto a = random_components(rng, 2 + rng.below(6));
        const Amplitude phase = std::polar(1.0, rng.uniform(-3.14159, 3.14159));
        auto rotated = a;
        for (auto& z : rotated) z *= phase;
        CHECK(std::abs(coherent_energy(a) - coherent_energy(rotated)) < 1e-10);
        CHECK(std::abs(incoherent_energy(a) - incoherent_energy(rotated)) < 1e-10);
    }
}

TEST_CASE("scale covariance: energies scale by c^2") {
    Rng rng(202);
    const auto a = random_components(rng, 4);
    const double c = 3.5;
    auto scaled = a;
    for (auto& z : scaled) z *= c;
    CHECK(coherent_energy(scaled) ==
          doctest::Approx(c * c * coherent_energy(a)).epsilon(1e-12));
    CHECK(incoherent_energy(scaled) ==
          doctest::Approx(c * c * incoherent_energy(a)).epsilon(1e-12));
}

TEST_CASE("magnitude_sq is phase invariant and zero only at origin") {
    Rng rng(303);
    for (int rep = 0; rep < 100; ++rep) {
        const Amplitude z{rng.uniform(-2, 2), rng.uniform(-2, 2)};
        const Amplitude r = z * std::polar(1.0, rng.uniform(-3.0, 3.0));
        const double m = magnitude_sq(z);
        CHECK(m >= 0.0);
        CHECK(std::abs(magnitude_sq(r) - m) <= 1e-12 * std::max(1.0, m));
    }
    CHECK(magnitude_sq({0.0, 0.0}) == 0.0);
}

TEST_CASE("born_normalize ratios") {
    const ProbPair a = born_normalize({1.0, 3.0});
    CHECK(a.p0 == doctest::Approx(0.25));
    CHECK(a.p1 == doctest::Approx(0.75));

    const ProbPair b = born_normalize({2.0, 2.0});
    CHECK(b.p0 == doctest::Approx(0.5));
    CHECK(b.p1 == doctest::Approx(0.5));

    // 0.04 / 0.85 by long division
    const ProbPair c = born_normalize({0.81, 0.04});
    CHECK(c.p1 == doctest::Approx(0.047058823529411764).epsilon(1e-12));
}

TEST_CASE("born_normalize sums to one and rejects degenerate input") {
    Rng rng(404);
    for (int rep = 0; rep < 100; ++rep) {
        const ProbPair p = born_normalize({rng.uniform(0.0, 5.0) + 1e-9,
                                           rng.uniform(0.0, 5.0)});
        CHECK(std::abs(p.p0 + p.p1 - 1.0) < 1e-12);
    }
    CHECK_THROWS_AS(born_normalize({0.0, 0.0}), DegenerateEnergies);
}

TEST_CASE("born_normalize invariant under common rescaling") {
    Rng rng(505);
    for (int rep = 0; rep < 100; ++rep) {
        const double e0 = rng.uniform(0.01, 4.0);
        const double e1 = rng.uniform(0.01, 4.0);
        const double c = rng.uniform(0.1, 9.0);
        const ProbPair p = born_normalize({e0, e1});
        const ProbPair q = born_normalize({c * e0, c * e1});
        CHECK(std::abs(p.p1 - q.p1) < 1e-12);
    }
}

}  // TEST_SUITE
