#include "doctest.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "ikc/identity.hpp"
#include "ikc/rng.hpp"

using namespace ikc;

namespace {

AmplitudeTriple random_triple(Rng& rng, double scale = 2.0) {
    auto z = [&] {
        return Amplitude{rng.uniform(-scale, scale), rng.uniform(-scale, scale)};
    };
    return {z(), z(), z()};
}

}  // namespace

TEST_SUITE("identity") {

TEST_CASE("cell probabilities from the zero-phase magnitudes") {
    const AmplitudeTriple u{{0.2, 0.0}, {0.35, 0.0}, {0.35, 0.0}};
    const CellProbs p = cell_probs(u);
    CHECK(p.p00 == doctest::Approx(0.04));
    CHECK(p.p10 == doctest::Approx(0.3025));
    CHECK(p.p01 == doctest::Approx(0.3025));
    CHECK(p.p11 == doctest::Approx(0.81));
}

TEST_CASE("zero factor amplitudes collapse all cells to |u0|^2") {
    const AmplitudeTriple u{{0.3, 0.4}, {0, 0}, {0, 0}};
    const CellProbs p = cell_probs(u);
    for (double v : {p.p00, p.p01, p.p10, p.p11})
        CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("pi phase on uB flips the p11 cell") {
    const AmplitudeTriple u{{0.2, 0.0}, {0.35, 0.0},
                            std::polar(0.35, std::numbers::pi)};
    const CellProbs p = cell_probs(u);
    CHECK(p.p11 == doctest::Approx(0.04).epsilon(1e-9));
    CHECK(p.p10 == doctest::Approx(0.3025));
    CHECK(p.p01 == doctest::Approx(0.0225).epsilon(1e-9));
}

TEST_CASE("cell exceeding 1 is rejected") {
    const AmplitudeTriple u{{0.8, 0.0}, {0.5, 0.0}, {0.5, 0.0}};
    CHECK_THROWS_AS(cell_probs(u), InvalidProbabilityModel);
}

TEST_CASE("interaction contrast at the zero-phase point is 0.245") {
    const CellProbs p{0.04, 0.3025, 0.3025, 0.81};
    CHECK(interaction_contrast(p) == doctest::Approx(0.245));
}

TEST_CASE("additive cells have zero contrast") {
    CellProbs p;
    p.p00 = 0.1;
    p.p10 = 0.1 + 0.2;
    p.p01 = 0.1 + 0.3;
    p.p11 = 0.1 + 0.2 + 0.3;
    CHECK(interaction_contrast(p) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("contrast equals the alternating sum on random cells") {
    Rng rng(61);
    for (int rep = 0; rep < 50; ++rep) {
        CellProbs p{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        CHECK(interaction_contrast(p) ==
              doctest::Approx(p.p11 - p.p10 - p.p01 + p.p00).epsilon(1e-15));
    }
}

TEST_CASE("identity_check trivial cases") {
    const auto [l1, r1] = identity_check({{0.4, 0.1}, {0, 0}, {0.3, -0.2}});
    CHECK(l1 == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(r1 == doctest::Approx(0.0).epsilon(1e-15));

    // 90 degree relative phase kills the cross-term
    const double r = 0.6;
    const auto [l2, r2] =
        identity_check({{0.1, 0.0}, {r, 0.0}, std::polar(r, std::numbers::pi / 2)});
    CHECK(r2 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(std::abs(l2 - r2) < 1e-12);
}

TEST_CASE("identity holds for 1000 seeded random triples") {
    Rng rng(424242);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const auto [lhs, rhs] = identity_check(random_triple(rng));
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    CHECK(worst < 1e-12);
}

TEST_CASE("phase law of the theory curve") {
    const auto pts = simulate_sweep(0.2, 0.35, 0.35, 9, 10, 10, 1);
    REQUIRE(pts.size() == 9);
    CHECK(pts.front().delta_phi == doctest::Approx(-std::numbers::pi));
    CHECK(pts.back().delta_phi == doctest::Approx(std::numbers::pi));
    CHECK(pts[4].delta_phi == doctest::Approx(0.0));
    CHECK(pts[4].theory == doctest::Approx(0.245));
    CHECK(pts.front().theory == doctest::Approx(-0.245));
    CHECK(pts.back().theory == doctest::Approx(-0.245));
    CHECK(pts[2].theory == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("sweep determinism: same seed, bit-identical points") {
    const auto a = simulate_sweep(0.2, 0.35, 0.35, 11, 200, 300, 99);
    const auto b = simulate_sweep(0.2, 0.35, 0.35, 11, 200, 300, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].estimate == b[i].estimate);
        CHECK(a[i].ci_lo == b[i].ci_lo);
        CHECK(a[i].ci_hi == b[i].ci_hi);
    }
}

TEST_CASE("sweep point invariants: estimate within band") {
    const auto pts = simulate_sweep(0.2, 0.35, 0.35, 15, 400, 500, 7);
    for (const auto& p : pts) {
        CHECK(p.ci_lo <= p.estimate);
        CHECK(p.estimate <= p.ci_hi);
    }
}

TEST_CASE("large per-cell count pins the estimate near theory") {
    // Law of large numbers at the pi endpoint.
    const auto pts = simulate_sweep(0.2, 0.35, 0.35, 3, 1000000, 10, 5);
    CHECK(std::abs(pts.back().estimate - (-0.245)) < 0.01);
}

TEST_CASE("invalid magnitudes are rejected up front") {
    CHECK_THROWS_AS(simulate_sweep(0.8, 0.5, 0.5, 5, 10, 10, 1),
                    InvalidProbabilityModel);
}

TEST_CASE("sweep csv shape") {
    const auto pts = simulate_sweep(0.2, 0.35, 0.35, 3, 50, 60, 2);
    std::ostringstream os;
    write_sweep_csv(os, pts);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line == "delta_phi,theory,estimate,ci_lo,ci_hi");
    int rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}

}  // TEST_SUITE
