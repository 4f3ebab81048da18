#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ikc/amplitude.hpp"
#include "ikc/matrix.hpp"
#include "ikc/optim.hpp"

namespace ikc {

// raw: x unchanged.
// with_products: x, then squares, then pairwise products x_i*x_j (i < j)
//                in lexicographic index order.
// squares_only: x, then squares. On binary inputs this collapses to a
//               main-effects model (x^2 = x), the deliberate
//               mis-specification baseline.
enum class FeatureExpansion { raw, with_products, squares_only };

std::size_t expanded_dim(std::size_t d, FeatureExpansion kind);
std::vector<double> expand(std::span<const double> x, FeatureExpansion kind);
Matrix expand_matrix(const Matrix& X, FeatureExpansion kind);

struct LogisticParams {
    std::vector<double> weights;
    double bias = 0.0;
};

ProbPair logistic_forward(const LogisticParams& params,
                          std::span<const double> x);
std::vector<ProbPair> logistic_predict(const LogisticParams& params,
                                       const Matrix& X);

double logistic_nll(const LogisticParams& params, const Matrix& X,
                    std::span<const int> y);

// Gradient of [nll + l2 * sum(theta^2)]; clipped rows are a flat region,
// exactly as in the IKC objective.
LogisticParams logistic_grad_nll(const LogisticParams& params, const Matrix& X,
                                 std::span<const int> y, double l2);

// Same first-order machinery and early-stopping policy as ikc_fit, so
// budget-matched comparisons stay meaningful.
std::pair<LogisticParams, FitHistory> fit_logistic(
    const TrainConfig& config, const Matrix& X_train,
    std::span<const int> y_train, const Matrix& X_val,
    std::span<const int> y_val, double l2);

std::string logistic_to_json(const LogisticParams& params);
LogisticParams logistic_from_json(const std::string& text);

// Reads `row_id,p1` CSV of externally produced raw probabilities.
// Rejects malformed rows, p1 outside [0,1], and duplicate row ids.
std::map<std::int64_t, double> read_external_predictions(const std::string& path);

// Aligns imported predictions to a split; every requested row_id must be
// present. Extra ids in the map are allowed (they belong to other splits).
std::vector<ProbPair> align_external(const std::map<std::int64_t, double>& preds,
                                     std::span<const std::int64_t> row_ids);

// read + align in one step.
std::vector<ProbPair> import_external_predictions(
    const std::string& path, std::span<const std::int64_t> row_ids);

}  // namespace ikc
