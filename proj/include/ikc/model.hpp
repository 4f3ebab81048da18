#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ikc/amplitude.hpp"
#include "ikc/matrix.hpp"
#include "ikc/optim.hpp"
#include "ikc/rng.hpp"

namespace ikc {

// Readout rule: coherent keeps the phase-sensitive cross-terms of
// |b + w.x|^2, incoherent drops them (|b|^2 + sum_j |w_j|^2 x_j^2).
enum class AggregationMode { coherent, incoherent };

// Probabilities are clipped to [kProbClip, 1 - kProbClip] everywhere.
inline constexpr double kProbClip = 1e-7;

inline double clip_prob(double p) {
    if (p < kProbClip) return kProbClip;
    if (p > 1.0 - kProbClip) return 1.0 - kProbClip;
    return p;
}

// Two affine complex amplitude maps, one per label channel.
struct IkcParams {
    std::vector<Amplitude> w0;
    std::vector<Amplitude> w1;
    Amplitude b0;
    Amplitude b1;

    std::size_t dim() const { return w0.size(); }
};

// Gaussian init (sd 0.1 on every real component), biases offset by +0.5 on
// the real part so initial energies are bounded away from zero.
IkcParams ikc_init(std::size_t d, Rng& rng);

// Class energies for one row under the given readout.
EnergyPair ikc_energies(const IkcParams& params, std::span<const double> x,
                        AggregationMode mode);

// Born-normalized, clipped predictive distribution for one row.
ProbPair ikc_forward(const IkcParams& params, std::span<const double> x,
                     AggregationMode mode);

std::vector<ProbPair> ikc_predict(const IkcParams& params, const Matrix& X,
                                  AggregationMode mode);

// Mean -log P(y_i | x_i) with clipped probabilities.
double ikc_nll(const IkcParams& params, const Matrix& X,
               std::span<const int> y, AggregationMode mode);

// Exact gradient of [nll + weight_decay * sum(all real components squared)]
// with respect to every real component, returned in IkcParams shape.
// Rows whose probability is clipped contribute zero NLL gradient (the clip
// is a flat region).
IkcParams ikc_grad_nll(const IkcParams& params, const Matrix& X,
                       std::span<const int> y, AggregationMode mode,
                       double weight_decay);

// Trains by minimizing clipped NLL + L2 decay with the shared first-order
// loop; early stopping and checkpoint-restore on validation NLL. Pass a
// 0-row X_val to disable early stopping (used when retraining on
// train + validation).
std::pair<IkcParams, FitHistory> ikc_fit(const TrainConfig& config,
                                         const Matrix& X_train,
                                         std::span<const int> y_train,
                                         const Matrix& X_val,
                                         std::span<const int> y_val,
                                         AggregationMode mode);

// Flat real parameterization used by the optimizer and the checkpoints:
// [w0 re/im interleaved, w1 re/im interleaved, b0 re, b0 im, b1 re, b1 im]
std::vector<double> ikc_pack(const IkcParams& params);
IkcParams ikc_unpack(std::span<const double> theta, std::size_t d);

// JSON checkpoint, format tag "ikc-v1".
std::string ikc_to_json(const IkcParams& params);
IkcParams ikc_from_json(const std::string& text);
void ikc_save(const IkcParams& params, const std::string& path);
IkcParams ikc_load(const std::string& path);

}  // namespace ikc
