#pragma once

#include <stdexcept>
#include <string>

namespace ikc {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Both class energies are exactly zero, so Born normalization is undefined.
struct DegenerateEnergies : Error {
    DegenerateEnergies() : Error("degenerate energies: e0 + e1 == 0") {}
};

// An amplitude-linear cell model produced |psi|^2 > 1 where a probability
// was required.
struct InvalidProbabilityModel : Error {
    explicit InvalidProbabilityModel(const std::string& what) : Error(what) {}
};

// Training hit a non-finite loss; carries the offending epoch.
struct DivergedTraining : Error {
    explicit DivergedTraining(int epoch_idx)
        : Error("training diverged at epoch " + std::to_string(epoch_idx)),
          epoch(epoch_idx) {}
    int epoch;
};

// Malformed input data (CSV parse, schema, external predictions, ...).
struct DataError : Error {
    using Error::Error;
};

}  // namespace ikc
