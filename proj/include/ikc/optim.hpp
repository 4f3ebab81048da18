#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace ikc {

enum class Optimizer { adam, sgd };

struct TrainConfig {
    double learning_rate = 0.01;
    double weight_decay = 0.0;   // coefficient of sum(theta^2)
    int max_epochs = 500;
    int batch_size = 0;          // 0 = full batch
    Optimizer optimizer = Optimizer::adam;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int early_stop_patience = 20;
    std::uint64_t seed = 0;
};

struct FitHistory {
    std::vector<double> train_nll;  // per epoch, decay term excluded
    std::vector<double> val_nll;    // empty when no validation split
    int best_epoch = 0;             // 0 = initialization
    double best_val_nll = 0.0;
    int epochs_run = 0;
};

// Differentiable objective over a flat real parameter vector. loss/grad are
// means over the given row subset; the weight-decay term is folded in by
// the objective itself so IKC and the logistic baselines share one loop.
class Objective {
public:
    virtual ~Objective() = default;
    virtual std::size_t n_rows() const = 0;
    virtual std::size_t n_params() const = 0;
    // Mean loss over rows (including any decay term).
    virtual double loss(std::span<const double> theta,
                        std::span<const std::size_t> rows) const = 0;
    // Gradient of loss() into grad (overwritten).
    virtual void grad(std::span<const double> theta,
                      std::span<const std::size_t> rows,
                      std::span<double> grad) const = 0;
    // Plain NLL without decay, for history and early stopping.
    virtual double nll(std::span<const double> theta,
                       std::span<const std::size_t> rows) const = 0;
};

// Minimizes train.loss with Adam or SGD. Early-stops on validation NLL with
// checkpoint-restore: the returned parameters are the ones with the best
// recorded validation NLL, where the initialization counts as epoch 0.
// Throws DivergedTraining on the first non-finite loss.
std::pair<std::vector<double>, FitHistory> first_order_fit(
    const TrainConfig& config, const Objective& train,
    const Objective* validation, std::vector<double> theta0);

}  // namespace ikc
