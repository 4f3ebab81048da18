#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "ikc/amplitude.hpp"

namespace ikc {

// Amplitudes of the minimal 2x2 model psi(a,b) = u0 + a*uA + b*uB.
struct AmplitudeTriple {
    Amplitude u0;
    Amplitude uA;
    Amplitude uB;
};

// The four design-cell success probabilities p_ab = P(Y=1 | a, b).
struct CellProbs {
    double p00 = 0.0;
    double p01 = 0.0;
    double p10 = 0.0;
    double p11 = 0.0;
};

// p_ab = |u0 + a*uA + b*uB|^2 for (a,b) in {0,1}^2.
// Throws InvalidProbabilityModel if any cell exceeds 1.
CellProbs cell_probs(const AmplitudeTriple& u);

// p11 - p10 - p01 + p00, the additive-scale interaction contrast.
double interaction_contrast(const CellProbs& p);

// Returns (contrast from unchecked cell energies, 2*Re(uA * conj(uB))).
// Purely algebraic: no probability bound is enforced, the two sides agree
// for arbitrary complex triples.
std::pair<double, double> identity_check(const AmplitudeTriple& u);

// One phase-sweep point with its percentile-bootstrap band.
struct SweepPoint {
    double delta_phi = 0.0;  // relative phase, radians
    double theory = 0.0;     // 2 * rA * rB * cos(delta_phi)
    double estimate = 0.0;   // plug-in contrast from cell frequencies
    double ci_lo = 0.0;
    double ci_hi = 0.0;
};

// Sweeps the relative phase over n_points equally spaced values in
// [-pi, pi] (both endpoints included). At each point: phase_A = 0,
// phase_B = delta_phi, n_per_cell Bernoulli trials per design cell, and a
// stratified-by-cell percentile bootstrap (n_boot replicates) for the
// 95% band. Each point owns the stream derive(seed, {point index}), so
// points are order-independent and evaluated in parallel.
std::vector<SweepPoint> simulate_sweep(double r0, double rA, double rB,
                                       std::size_t n_points,
                                       std::size_t n_per_cell,
                                       std::size_t n_boot,
                                       std::uint64_t seed);

// Columns: delta_phi,theory,estimate,ci_lo,ci_hi.
void write_sweep_csv(std::ostream& os, std::span<const SweepPoint> points);

}  // namespace ikc
