#include "ikc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>

#include "ikc/errors.hpp"
#include "ikc/rng.hpp"

namespace ikc {

double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty sample");
    if (q <= 0.0) return sorted.front();
    if (q >= 1.0) return sorted.back();
    const double h = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

CiSummary bootstrap_ci(std::span<const double> values, std::size_t n_boot,
                       std::uint64_t seed) {
    if (values.empty()) throw std::invalid_argument("bootstrap_ci: empty sample");
    const std::size_t n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);

    Rng rng = Rng::derive(seed, {0x626f6f74ULL});  // "boot"
    std::vector<double> means(n_boot);
    for (std::size_t b = 0; b < n_boot; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[rng.below(n)];
        means[b] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    return {mean, quantile_sorted(means, 0.025), quantile_sorted(means, 0.975),
            n_boot};
}

double sign_flip_test(std::span<const double> deltas) {
    const std::size_t n = deltas.size();
    if (n == 0) throw std::invalid_argument("sign_flip_test: empty deltas");
    if (n > 25)
        throw Error("sign_flip_test: n > 25 would enumerate more than 2^25 "
                    "assignments; exact test refused");
    for (double d : deltas)
        if (!std::isfinite(d))
            throw std::invalid_argument("sign_flip_test: non-finite delta");

    double observed_sum = 0.0;
    for (double d : deltas) observed_sum += d;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double threshold = std::abs(observed_sum) * inv_n - 1e-12;

    // Gray-code walk over all sign assignments: one sign flips per step.
    const std::uint64_t total = 1ULL << n;
    double sum = observed_sum;  // assignment 0 = identity (all +1)
    std::uint64_t gray = 0;
    std::uint64_t count = 0;
    if (std::abs(sum) * inv_n >= threshold) ++count;
    std::vector<double> twice(deltas.begin(), deltas.end());
    for (auto& d : twice) d *= 2.0;
    std::vector<int> sign(n, +1);
    for (std::uint64_t k = 1; k < total; ++k) {
        const std::uint64_t next_gray = k ^ (k >> 1);
        const std::uint64_t changed = gray ^ next_gray;
        gray = next_gray;
        int bit = 0;
        std::uint64_t c = changed;
        while ((c >>= 1) != 0) ++bit;
        sign[bit] = -sign[bit];
        sum += static_cast<double>(sign[bit]) * twice[bit];
        if ((k & 0xFFFF) == 0) {
            // Resum from scratch so incremental rounding cannot creep past
            // the 1e-12 tie tolerance over 2^25 updates.
            sum = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                sum += static_cast<double>(sign[i]) * deltas[i];
        }
        if (std::abs(sum) * inv_n >= threshold) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(total);
}

std::vector<double> holm_bonferroni(std::span<const double> p_values) {
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
    std::vector<double> adjusted(m, 0.0);
    double running = 0.0;
    for (std::size_t rank = 0; rank < m; ++rank) {
        const std::size_t i = order[rank];
        double adj = static_cast<double>(m - rank) * p_values[i];
        adj = std::min(adj, 1.0);
        running = std::max(running, adj);
        adjusted[i] = running;
    }
    return adjusted;
}

std::vector<ReportRow> paired_report(std::span<const PairedRuns> runs,
                                     std::size_t n_boot, std::uint64_t seed,
                                     bool p_all) {
    if (runs.empty()) return {};
    const std::size_t n = runs.front().deltas.size();
    for (const auto& r : runs)
        if (r.deltas.size() != n)
            throw std::invalid_argument("paired_report: mismatched n across metrics");

    std::vector<ReportRow> rows;
    rows.reserve(runs.size());
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        const CiSummary ci = bootstrap_ci(r.deltas, n_boot,
                                          seed + 0x9e3779b9ULL * (i + 1));
        ReportRow row{r.metric_name, ci.mean, ci.lo, ci.hi, std::nullopt, n};
        if (p_all || r.metric_name == "nll")
            row.p_exact = sign_flip_test(r.deltas);
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace ikc
