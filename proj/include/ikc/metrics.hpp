#pragma once

#include <span>
#include <vector>

#include "ikc/amplitude.hpp"
#include "ikc/matrix.hpp"
#include "ikc/model.hpp"

namespace ikc {

struct MetricReport {
    double nll = 0.0;
    double brier = 0.0;
    double ece = 0.0;
    double accuracy = 0.0;
    std::size_t n = 0;
};

inline constexpr int kEceBins = 15;

// NLL (clipped), Brier on p1, ECE over 15 equal-width bins of the
// max-channel confidence (binary: bins below 0.5 stay empty), accuracy by
// 0.5 threshold on p1 (ties predict 1).
MetricReport compute_metrics(std::span<const ProbPair> probs,
                             std::span<const int> labels);

struct Temperature {
    double t = 1.0;
    bool applied = false;
    bool degenerate = false;  // calibration split had a single label
};

enum class TsPolicy { always, safety_switch };

// Scales every distribution through logit division by t (then re-clips).
// Exposed because fit_temperature and the tests need the unconditional
// transform; apply_temperature is the policy-respecting entry point.
std::vector<ProbPair> scale_probs(std::span<const ProbPair> probs, double t);

// Minimizes calibration NLL over t in [0.05, 20]: 200-point log grid, then
// golden-section refinement to 1e-4. Under safety_switch, applied is set
// only when the best NLL strictly beats the raw NLL (by more than 1e-12);
// under always, applied is set whenever the fit is non-degenerate.
Temperature fit_temperature(std::span<const ProbPair> cal_probs,
                            std::span<const int> cal_labels,
                            TsPolicy policy = TsPolicy::safety_switch);

// Identity when temp.applied is false (input returned unchanged).
std::vector<ProbPair> apply_temperature(std::span<const ProbPair> probs,
                                        const Temperature& temp);

// Mean per-row log-likelihood gain of the coherent readout over the
// incoherent proxy at fixed parameters; raw (pre-temperature) probabilities.
double coherent_gain(const IkcParams& params, const Matrix& X,
                     std::span<const int> y);

// Mean KL(P_coh || P_inc) per row; >= 0. Raw probabilities.
double interference_information(const IkcParams& params, const Matrix& X);

// Per-row KL values (used where every row must be checked nonnegative).
std::vector<double> interference_information_rows(const IkcParams& params,
                                                  const Matrix& X);

}  // namespace ikc
