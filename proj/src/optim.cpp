#include "ikc/optim.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "ikc/errors.hpp"
#include "ikc/rng.hpp"

namespace ikc {

std::pair<std::vector<double>, FitHistory> first_order_fit(
    const TrainConfig& config, const Objective& train,
    const Objective* validation, std::vector<double> theta0) {
    const std::size_t n = train.n_rows();
    const std::size_t p = train.n_params();
    std::vector<double> theta = std::move(theta0);

    std::vector<std::size_t> all_rows(n);
    std::iota(all_rows.begin(), all_rows.end(), 0);
    std::vector<std::size_t> val_rows;
    if (validation) {
        val_rows.resize(validation->n_rows());
        std::iota(val_rows.begin(), val_rows.end(), 0);
    }
    const bool has_val = validation && !val_rows.empty();

    FitHistory hist;
    std::vector<double> best_theta = theta;
    hist.best_val_nll = has_val ? validation->nll(theta, val_rows)
                                : std::numeric_limits<double>::quiet_NaN();
    hist.best_epoch = 0;

    std::vector<double> g(p, 0.0);
    std::vector<double> m(p, 0.0), v(p, 0.0);
    std::size_t adam_t = 0;
    int epochs_since_improvement = 0;

    Rng shuffle_rng = Rng::derive(config.seed, {0x73687566ULL});  // "shuf"
    std::vector<std::size_t> order = all_rows;
    const std::size_t batch =
        config.batch_size > 0 ? static_cast<std::size_t>(config.batch_size) : n;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        if (batch < n) shuffle_rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            std::span<const std::size_t> rows(order.data() + start, len);
            const double step_loss = train.loss(theta, rows);
            if (!std::isfinite(step_loss)) throw DivergedTraining(epoch);
            train.grad(theta, rows, g);
            if (config.optimizer == Optimizer::adam) {
                ++adam_t;
                const double c1 =
                    1.0 - std::pow(config.adam_beta1, static_cast<double>(adam_t));
                const double c2 =
                    1.0 - std::pow(config.adam_beta2, static_cast<double>(adam_t));
                for (std::size_t i = 0; i < p; ++i) {
                    m[i] = config.adam_beta1 * m[i] + (1.0 - config.adam_beta1) * g[i];
                    v[i] = config.adam_beta2 * v[i] +
                           (1.0 - config.adam_beta2) * g[i] * g[i];
                    theta[i] -= config.learning_rate * (m[i] / c1) /
                                (std::sqrt(v[i] / c2) + config.adam_eps);
                }
            } else {
                for (std::size_t i = 0; i < p; ++i)
                    theta[i] -= config.learning_rate * g[i];
            }
        }

        const double train_nll = train.nll(theta, all_rows);
        if (!std::isfinite(train_nll)) throw DivergedTraining(epoch);
        hist.train_nll.push_back(train_nll);
        hist.epochs_run = epoch;

        if (has_val) {
            const double val_nll = validation->nll(theta, val_rows);
            if (!std::isfinite(val_nll)) throw DivergedTraining(epoch);
            hist.val_nll.push_back(val_nll);
            if (val_nll < hist.best_val_nll) {
                hist.best_val_nll = val_nll;
                hist.best_epoch = epoch;
                best_theta = theta;
                epochs_since_improvement = 0;
            } else if (++epochs_since_improvement >= config.early_stop_patience) {
                break;
            }
        } else {
            hist.best_epoch = epoch;
            best_theta = theta;
        }
    }
    return {std::move(best_theta), std::move(hist)};
}

}  // namespace ikc
