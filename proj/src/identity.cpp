#include "ikc/identity.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "ikc/csv.hpp"
#include "ikc/errors.hpp"
#include "ikc/parallel.hpp"
#include "ikc/rng.hpp"
#include "ikc/stats.hpp"

namespace ikc {

namespace {

// Raw cell energies |psi(a,b)|^2 without the probability bound; the
// algebraic identity needs no such bound.
CellProbs cell_energies(const AmplitudeTriple& u) {
    CellProbs p;
    p.p00 = std::norm(u.u0);
    p.p10 = std::norm(u.u0 + u.uA);
    p.p01 = std::norm(u.u0 + u.uB);
    p.p11 = std::norm(u.u0 + u.uA + u.uB);
    return p;
}

}  // namespace

CellProbs cell_probs(const AmplitudeTriple& u) {
    const CellProbs p = cell_energies(u);
    for (double v : {p.p00, p.p01, p.p10, p.p11}) {
        if (v > 1.0)
            throw InvalidProbabilityModel(
                "cell probability |psi(a,b)|^2 = " + format_double(v) +
                " exceeds 1");
    }
    return p;
}

double interaction_contrast(const CellProbs& p) {
    return p.p11 - p.p10 - p.p01 + p.p00;
}

std::pair<double, double> identity_check(const AmplitudeTriple& u) {
    const double lhs = interaction_contrast(cell_energies(u));
    const double rhs = 2.0 * (u.uA * std::conj(u.uB)).real();
    return {lhs, rhs};
}

std::vector<SweepPoint> simulate_sweep(double r0, double rA, double rB,
                                       std::size_t n_points,
                                       std::size_t n_per_cell,
                                       std::size_t n_boot,
                                       std::uint64_t seed) {
    if (n_points < 1 || n_per_cell < 1 || n_boot < 1)
        throw std::invalid_argument("simulate_sweep: counts must be >= 1");

    constexpr double pi = std::numbers::pi;

    // Validate amplitudes across the sweep before spending any RNG budget.
    std::vector<double> phases(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
        phases[i] = (n_points == 1)
                        ? -pi
                        : -pi + 2.0 * pi * static_cast<double>(i) /
                                  static_cast<double>(n_points - 1);
        const AmplitudeTriple u{Amplitude{r0, 0.0}, Amplitude{rA, 0.0},
                                std::polar(rB, phases[i])};
        cell_probs(u);  // throws InvalidProbabilityModel on any bad cell
    }

    std::vector<SweepPoint> out(n_points);
    parallel_for(n_points, [&](std::size_t i) {
        const double dphi = phases[i];
        const AmplitudeTriple u{Amplitude{r0, 0.0}, Amplitude{rA, 0.0},
                                std::polar(rB, dphi)};
        const CellProbs p = cell_probs(u);
        const double cells[4] = {p.p00, p.p01, p.p10, p.p11};

        Rng rng = Rng::derive(seed, {0x73776565ULL /* "swee" */, i});

        // Bernoulli outcomes per cell, kept so the bootstrap can resample
        // the actual draws.
        std::vector<std::vector<std::uint8_t>> outcomes(4);
        double hat[4];
        for (int c = 0; c < 4; ++c) {
            outcomes[c].resize(n_per_cell);
            std::size_t successes = 0;
            for (std::size_t k = 0; k < n_per_cell; ++k) {
                const bool hit = rng.bernoulli(cells[c]);
                outcomes[c][k] = hit ? 1 : 0;
                successes += hit;
            }
            hat[c] = static_cast<double>(successes) /
                     static_cast<double>(n_per_cell);
        }
        // cells order is (00, 01, 10, 11)
        const double estimate = hat[3] - hat[2] - hat[1] + hat[0];

        std::vector<double> replicates(n_boot);
        for (std::size_t b = 0; b < n_boot; ++b) {
            double rep[4];
            for (int c = 0; c < 4; ++c) {
                std::size_t successes = 0;
                for (std::size_t k = 0; k < n_per_cell; ++k)
                    successes += outcomes[c][rng.below(n_per_cell)];
                rep[c] = static_cast<double>(successes) /
                         static_cast<double>(n_per_cell);
            }
            replicates[b] = rep[3] - rep[2] - rep[1] + rep[0];
        }
        std::sort(replicates.begin(), replicates.end());

        SweepPoint pt;
        pt.delta_phi = dphi;
        pt.theory = 2.0 * rA * rB * std::cos(dphi);
        pt.estimate = estimate;
        pt.ci_lo = quantile_sorted(replicates, 0.025);
        pt.ci_hi = quantile_sorted(replicates, 0.975);
        out[i] = pt;
    });
    return out;
}

void write_sweep_csv(std::ostream& os, std::span<const SweepPoint> points) {
    os << "delta_phi,theory,estimate,ci_lo,ci_hi\n";
    for (const auto& p : points) {
        write_csv_row(os, {format_double(p.delta_phi), format_double(p.theory),
                           format_double(p.estimate), format_double(p.ci_lo),
                           format_double(p.ci_hi)});
    }
}

}  // namespace ikc
