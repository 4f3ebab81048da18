#pragma once

#include <complex>
#include <span>
#include <stdexcept>

#include "ikc/errors.hpp"

namespace ikc {

// A single complex amplitude. Squared magnitudes of these are the
// unnormalized class energies everywhere in the library.
using Amplitude = std::complex<double>;

inline double magnitude_sq(const Amplitude& z) { return std::norm(z); }

// Unnormalized class energies for the two labels.
struct EnergyPair {
    double e0 = 0.0;
    double e1 = 0.0;
};

// A binary predictive distribution; p0 + p1 == 1.
struct ProbPair {
    double p0 = 0.5;
    double p1 = 0.5;
};

// Add-then-square: |sum_k a_k|^2. Keeps every pairwise cross-term
// 2*Re(a_i * conj(a_j)).
inline double coherent_energy(std::span<const Amplitude> components) {
    if (components.empty())
        throw std::invalid_argument("coherent_energy: empty component sequence");
    Amplitude sum{0.0, 0.0};
    for (const auto& a : components) sum += a;
    return std::norm(sum);
}

// Square-then-sum: sum_k |a_k|^2. All cross-terms removed.
inline double incoherent_energy(std::span<const Amplitude> components) {
    if (components.empty())
        throw std::invalid_argument("incoherent_energy: empty component sequence");
    double e = 0.0;
    for (const auto& a : components) e += std::norm(a);
    return e;
}

// p1 = e1 / (e0 + e1). Throws DegenerateEnergies when both energies vanish
// instead of inventing a uniform distribution; an all-zero amplitude model
// is a parameter pathology the caller should see.
inline ProbPair born_normalize(const EnergyPair& e) {
    const double total = e.e0 + e.e1;
    if (total <= 0.0) throw DegenerateEnergies();
    const double p1 = e.e1 / total;
    return {1.0 - p1, p1};
}

}  // namespace ikc
