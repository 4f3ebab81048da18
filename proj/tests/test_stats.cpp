#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ikc/errors.hpp"
#include "ikc/rng.hpp"
#include "ikc/stats.hpp"

using namespace ikc;

namespace {

// Independent oracle: direct double loop over all masks, mean recomputed
// from scratch per assignment.
double sign_flip_oracle(const std::vector<double>& deltas) {
    const std::size_t n = deltas.size();
    double obs = 0.0;
    for (double d : deltas) obs += d;
    obs = std::abs(obs / double(n));
    std::size_t count = 0;
    const std::size_t total = 1ull << n;
    for (std::size_t mask = 0; mask < total; ++mask) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            s += (mask >> i) & 1 ? -deltas[i] : deltas[i];
        if (std::abs(s / double(n)) >= obs - 1e-12) ++count;
    }
    return double(count) / double(total);
}

}  // namespace

TEST_SUITE("stats") {

TEST_CASE("quantile interpolation") {
    const std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    CHECK(quantile_sorted(v, 0.0) == 1.0);
    CHECK(quantile_sorted(v, 1.0) == 4.0);
    CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
}

TEST_CASE("bootstrap of a constant sequence collapses") {
    const std::vector<double> v(12, 3.25);
    const CiSummary ci = bootstrap_ci(v, 500, 7);
    CHECK(ci.mean == 3.25);
    CHECK(ci.lo == 3.25);
    CHECK(ci.hi == 3.25);
}

TEST_CASE("two-point sequence stays within support") {
    const std::vector<double> v{0.0, 1.0};
    const CiSummary ci = bootstrap_ci(v, 4000, 8);
    CHECK(ci.lo >= 0.0);
    CHECK(ci.hi <= 1.0);
    CHECK(ci.mean == doctest::Approx(0.5));
    CHECK(ci.lo <= ci.mean);
    CHECK(ci.mean <= ci.hi);
}

TEST_CASE("bootstrap is deterministic in (values, n_boot, seed)") {
    const std::vector<double> v{0.3, -1.2, 0.7, 2.2, -0.4};
    const CiSummary a = bootstrap_ci(v, 1000, 99);
    const CiSummary b = bootstrap_ci(v, 1000, 99);
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
    const CiSummary c = bootstrap_ci(v, 1000, 100);
    CHECK((c.lo != a.lo || c.hi != a.hi));
}

TEST_CASE("bootstrap CI covers the true mean about 95% of the time") {
    // 1000 outer replications of n=20 Gaussian samples.
    Rng rng(2024);
    int covered = 0;
    const int outer = 1000;
    for (int rep = 0; rep < outer; ++rep) {
        std::vector<double> sample(20);
        for (auto& v : sample) v = rng.normal();
        const CiSummary ci = bootstrap_ci(sample, 1000, 5000 + rep);
        if (ci.lo <= 0.0 && 0.0 <= ci.hi) ++covered;
    }
    const double rate = covered / double(outer);
    // Percentile bootstrap at n=20 undercovers slightly; allow [0.90, 0.98].
    CHECK(rate > 0.90);
    CHECK(rate < 0.98);
}

TEST_CASE("sign flip on [-1, -1] is one half") {
    const std::vector<double> d{-1.0, -1.0};
    CHECK(sign_flip_test(d) == doctest::Approx(0.5));
}

TEST_CASE("all-zero deltas give p = 1") {
    const std::vector<double> d(9, 0.0);
    CHECK(sign_flip_test(d) == 1.0);
}

TEST_CASE("n = 20 one-sided floor is exactly 2^-19") {
    std::vector<double> d(20, -0.37);
    CHECK(sign_flip_test(d) == std::ldexp(1.0, -19));
    // unequal magnitudes, same sign: still only the two extreme assignments
    Rng rng(51);
    for (auto& v : d) v = -0.1 - rng.uniform();
    CHECK(sign_flip_test(d) == std::ldexp(1.0, -19));
}

TEST_CASE("matches the brute-force oracle for n <= 12") {
    Rng rng(52);
    for (int rep = 0; rep < 40; ++rep) {
        const std::size_t n = 1 + rng.below(12);
        std::vector<double> d(n);
        for (auto& v : d) v = rng.normal();
        // occasionally inject exact ties
        if (rep % 5 == 0 && n >= 2) d[1] = -d[0];
        CHECK(sign_flip_test(d) == doctest::Approx(sign_flip_oracle(d)).epsilon(1e-15));
    }
}

TEST_CASE("permutation symmetry and two-sidedness") {
    Rng rng(53);
    std::vector<double> d(10);
    for (auto& v : d) v = rng.normal();
    const double p = sign_flip_test(d);

    auto shuffled = d;
    rng.shuffle(shuffled);
    CHECK(sign_flip_test(shuffled) == doctest::Approx(p).epsilon(1e-15));

    auto negated = d;
    for (auto& v : negated) v = -v;
    CHECK(sign_flip_test(negated) == doctest::Approx(p).epsilon(1e-15));
}

TEST_CASE("n above 25 is refused") {
    const std::vector<double> d(26, 1.0);
    CHECK_THROWS_AS(sign_flip_test(d), Error);
}

TEST_CASE("holm-bonferroni adjustment") {
    const std::vector<double> p{0.01, 0.04, 0.03, 0.005};
    const auto adj = holm_bonferroni(p);
    // sorted: 0.005*4=0.02, 0.01*3=0.03, 0.03*2=0.06, 0.04*1=0.06 (monotone)
    CHECK(adj[3] == doctest::Approx(0.02));
    CHECK(adj[0] == doctest::Approx(0.03));
    CHECK(adj[2] == doctest::Approx(0.06));
    CHECK(adj[1] == doctest::Approx(0.06));
}

TEST_CASE("paired report composes bootstrap and sign flip") {
    std::vector<PairedRuns> runs(2);
    runs[0].metric_name = "nll";
    runs[0].deltas = {-0.2, -0.1, -0.3, -0.15, -0.25};
    runs[1].metric_name = "brier";
    runs[1].deltas = {-0.02, -0.01, -0.03, -0.015, -0.025};
    const auto rows = paired_report(runs, 2000, 77);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].metric == "nll");
    REQUIRE(rows[0].p_exact.has_value());
    CHECK(*rows[0].p_exact == doctest::Approx(sign_flip_oracle(runs[0].deltas)));
    CHECK_FALSE(rows[1].p_exact.has_value());
    CHECK(rows[0].ci_lo <= rows[0].mean);
    CHECK(rows[0].mean <= rows[0].ci_hi);

    const auto rows_all = paired_report(runs, 2000, 77, true);
    CHECK(rows_all[1].p_exact.has_value());
}

TEST_CASE("all-zero paired deltas") {
    std::vector<PairedRuns> runs(1);
    runs[0].metric_name = "nll";
    runs[0].deltas = std::vector<double>(6, 0.0);
    const auto rows = paired_report(runs, 500, 3);
    CHECK(rows[0].mean == 0.0);
    CHECK(rows[0].ci_lo == 0.0);
    CHECK(rows[0].ci_hi == 0.0);
    CHECK(*rows[0].p_exact == 1.0);
}

TEST_CASE("mismatched n across metrics is rejected") {
    std::vector<PairedRuns> runs(2);
    runs[0] = {{1.0, 2.0}, "nll"};
    runs[1] = {{1.0}, "brier"};
    CHECK_THROWS_AS(paired_report(runs, 100, 1), std::invalid_argument);
}

}  // TEST_SUITE
