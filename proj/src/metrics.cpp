#include "ikc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace ikc {

MetricReport compute_metrics(std::span<const ProbPair> probs,
                             std::span<const int> labels) {
    if (probs.size() != labels.size())
        throw std::invalid_argument("compute_metrics: length mismatch");
    if (probs.empty())
        throw std::invalid_argument("compute_metrics: empty input");
    const std::size_t n = probs.size();

    double nll = 0.0, brier = 0.0;
    std::size_t correct = 0;
    double bin_conf[kEceBins] = {0};
    double bin_acc[kEceBins] = {0};
    std::size_t bin_n[kEceBins] = {0};

    for (std::size_t i = 0; i < n; ++i) {
        const double p1 = probs[i].p1;
        const int y = labels[i];
        nll -= std::log(clip_prob(y == 1 ? p1 : 1.0 - p1));
        brier += (p1 - static_cast<double>(y)) * (p1 - static_cast<double>(y));
        const int pred = p1 >= 0.5 ? 1 : 0;
        const bool hit = pred == y;
        correct += hit;
        const double conf = std::max(p1, 1.0 - p1);
        int b = static_cast<int>(conf * kEceBins);
        if (b >= kEceBins) b = kEceBins - 1;
        bin_conf[b] += conf;
        bin_acc[b] += hit ? 1.0 : 0.0;
        ++bin_n[b];
    }

    double ece = 0.0;
    for (int b = 0; b < kEceBins; ++b) {
        if (bin_n[b] == 0) continue;
        const double nb = static_cast<double>(bin_n[b]);
        ece += nb / static_cast<double>(n) *
               std::abs(bin_acc[b] / nb - bin_conf[b] / nb);
    }

    return {nll / static_cast<double>(n), brier / static_cast<double>(n), ece,
            static_cast<double>(correct) / static_cast<double>(n), n};
}

std::vector<ProbPair> scale_probs(std::span<const ProbPair> probs, double t) {
    if (t <= 0.0) throw std::invalid_argument("scale_probs: t must be positive");
    std::vector<ProbPair> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p1 = clip_prob(probs[i].p1);
        const double logit = std::log(p1 / (1.0 - p1));
        const double scaled = clip_prob(1.0 / (1.0 + std::exp(-logit / t)));
        out[i] = {1.0 - scaled, scaled};
    }
    return out;
}

namespace {

double cal_nll(std::span<const ProbPair> probs, std::span<const int> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        total -= std::log(clip_prob(labels[i] == 1 ? probs[i].p1 : probs[i].p0));
    return total / static_cast<double>(probs.size());
}

double scaled_nll(std::span<const ProbPair> probs, std::span<const int> labels,
                  double t) {
    const auto scaled = scale_probs(probs, t);
    return cal_nll(scaled, labels);
}

}  // namespace

Temperature fit_temperature(std::span<const ProbPair> cal_probs,
                            std::span<const int> cal_labels, TsPolicy policy) {
    if (cal_probs.empty() || cal_probs.size() != cal_labels.size())
        throw std::invalid_argument("fit_temperature: bad calibration set");

    const bool any0 = std::any_of(cal_labels.begin(), cal_labels.end(),
                                  [](int y) { return y == 0; });
    const bool any1 = std::any_of(cal_labels.begin(), cal_labels.end(),
                                  [](int y) { return y == 1; });
    if (!any0 || !any1) {
        // One-label calibration split: the NLL minimizer is unbounded.
        return {1.0, false, true};
    }

    constexpr double t_lo = 0.05, t_hi = 20.0;
    constexpr int grid_n = 200;
    const double log_lo = std::log(t_lo), log_hi = std::log(t_hi);

    int best_i = 0;
    double best_nll = std::numeric_limits<double>::infinity();
    std::vector<double> ts(grid_n);
    for (int i = 0; i < grid_n; ++i) {
        ts[i] = std::exp(log_lo + (log_hi - log_lo) * i / (grid_n - 1));
        const double v = scaled_nll(cal_probs, cal_labels, ts[i]);
        if (v < best_nll) {
            best_nll = v;
            best_i = i;
        }
    }

    // Golden-section refinement in the bracket around the best grid point.
    double a = ts[std::max(0, best_i - 1)];
    double b = ts[std::min(grid_n - 1, best_i + 1)];
    constexpr double invphi = 0.6180339887498949;
    double c = b - (b - a) * invphi;
    double d = a + (b - a) * invphi;
    double fc = scaled_nll(cal_probs, cal_labels, c);
    double fd = scaled_nll(cal_probs, cal_labels, d);
    while (b - a > 1e-4) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * invphi;
            fc = scaled_nll(cal_probs, cal_labels, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * invphi;
            fd = scaled_nll(cal_probs, cal_labels, d);
        }
    }
    const double t_star = 0.5 * (a + b);
    const double nll_star = scaled_nll(cal_probs, cal_labels, t_star);
    double best_t = t_star;
    double final_nll = nll_star;
    if (best_nll < nll_star) {
        best_t = ts[best_i];
        final_nll = best_nll;
    }

    const double raw = cal_nll(cal_probs, cal_labels);
    Temperature temp;
    temp.t = best_t;
    if (policy == TsPolicy::always) {
        temp.applied = true;
    } else {
        temp.applied = final_nll < raw - 1e-12;
    }
    return temp;
}

std::vector<ProbPair> apply_temperature(std::span<const ProbPair> probs,
                                        const Temperature& temp) {
    if (temp.t <= 0.0)
        throw std::invalid_argument("apply_temperature: t must be positive");
    if (!temp.applied) return {probs.begin(), probs.end()};
    return scale_probs(probs, temp.t);
}

double coherent_gain(const IkcParams& params, const Matrix& X,
                     std::span<const int> y) {
    if (X.rows() == 0 || X.rows() != y.size())
        throw std::invalid_argument("coherent_gain: bad shapes");
    double total = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const ProbPair pc = ikc_forward(params, X.row(i), AggregationMode::coherent);
        const ProbPair pi = ikc_forward(params, X.row(i), AggregationMode::incoherent);
        const double lc = std::log(y[i] == 1 ? pc.p1 : pc.p0);
        const double li = std::log(y[i] == 1 ? pi.p1 : pi.p0);
        total += lc - li;
    }
    return total / static_cast<double>(X.rows());
}

std::vector<double> interference_information_rows(const IkcParams& params,
                                                  const Matrix& X) {
    std::vector<double> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const ProbPair p = ikc_forward(params, X.row(i), AggregationMode::coherent);
        const ProbPair q = ikc_forward(params, X.row(i), AggregationMode::incoherent);
        double kl = p.p0 * std::log(p.p0 / q.p0) + p.p1 * std::log(p.p1 / q.p1);
        if (kl < 0.0 && kl > -1e-12) kl = 0.0;  // rounding on near-equal rows
        out[i] = kl;
    }
    return out;
}

double interference_information(const IkcParams& params, const Matrix& X) {
    if (X.rows() == 0)
        throw std::invalid_argument("interference_information: empty data");
    const auto rows = interference_information_rows(params, X);
    double total = 0.0;
    for (double v : rows) total += v;
    return total / static_cast<double>(rows.size());
}

}  // namespace ikc
