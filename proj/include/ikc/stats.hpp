#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ikc {

// Per-seed metric differences (system A - system B) on a shared test split.
struct PairedRuns {
    std::vector<double> deltas;
    std::string metric_name;
};

struct CiSummary {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n_boot = 0;
};

// Linear-interpolation quantile of an already sorted sample, q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Percentile bootstrap CI (2.5/97.5) of the mean, n_boot resamples with
// replacement. Deterministic given (values, n_boot, seed).
CiSummary bootstrap_ci(std::span<const double> values, std::size_t n_boot,
                       std::uint64_t seed);

// Exact two-sided paired sign-flip test on the mean of deltas: enumerates
// all 2^n sign assignments and counts |mean| >= |observed mean| - 1e-12.
// The identity assignment always counts, so p >= 2^-(n-1) for nonzero
// deltas. Refuses n > 25 (no asymptotic fallback).
double sign_flip_test(std::span<const double> deltas);

// Holm-Bonferroni step-down adjustment; returns adjusted p-values in the
// input order. Optional post-processing, off by default in reports.
std::vector<double> holm_bonferroni(std::span<const double> p_values);

struct ReportRow {
    std::string metric;
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    std::optional<double> p_exact;
    std::size_t n = 0;
};

// One row per metric: bootstrap CI of the mean delta, plus the exact
// sign-flip p for NLL (and for every metric when p_all is set).
std::vector<ReportRow> paired_report(std::span<const PairedRuns> runs,
                                     std::size_t n_boot, std::uint64_t seed,
                                     bool p_all = false);

}  // namespace ikc
