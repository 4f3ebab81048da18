#include "ikc/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

#include "ikc/csv.hpp"
#include "ikc/errors.hpp"
#include "ikc/model.hpp"

namespace ikc {

std::size_t expanded_dim(std::size_t d, FeatureExpansion kind) {
    switch (kind) {
        case FeatureExpansion::raw: return d;
        case FeatureExpansion::squares_only: return 2 * d;
        case FeatureExpansion::with_products: return 2 * d + d * (d - 1) / 2;
    }
    return d;
}

std::vector<double> expand(std::span<const double> x, FeatureExpansion kind) {
    std::vector<double> out;
    out.reserve(expanded_dim(x.size(), kind));
    out.assign(x.begin(), x.end());
    if (kind == FeatureExpansion::raw) return out;
    for (double v : x) out.push_back(v * v);
    if (kind == FeatureExpansion::with_products) {
        for (std::size_t i = 0; i + 1 < x.size(); ++i)
            for (std::size_t j = i + 1; j < x.size(); ++j)
                out.push_back(x[i] * x[j]);
    }
    return out;
}

Matrix expand_matrix(const Matrix& X, FeatureExpansion kind) {
    const std::size_t m = expanded_dim(X.cols(), kind);
    Matrix out(X.rows(), m);
    for (std::size_t r = 0; r < X.rows(); ++r) {
        const auto row = expand(X.row(r), kind);
        for (std::size_t c = 0; c < m; ++c) out(r, c) = row[c];
    }
    return out;
}

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double raw_p1(const LogisticParams& params, std::span<const double> x) {
    if (params.weights.size() != x.size())
        throw std::invalid_argument("logistic: feature dimension mismatch");
    double z = params.bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += params.weights[j] * x[j];
    return sigmoid(z);
}

class LogisticObjective final : public Objective {
public:
    LogisticObjective(const Matrix& X, std::span<const int> y, double l2)
        : X_(X), y_(y), l2_(l2) {}

    std::size_t n_rows() const override { return X_.rows(); }
    std::size_t n_params() const override { return X_.cols() + 1; }

    double loss(std::span<const double> theta,
                std::span<const std::size_t> rows) const override {
        double l = nll(theta, rows);
        if (l2_ > 0.0)
            for (double t : theta) l += l2_ * t * t;
        return l;
    }

    double nll(std::span<const double> theta,
               std::span<const std::size_t> rows) const override {
        const std::size_t d = X_.cols();
        double total = 0.0;
        for (std::size_t r : rows) {
            const auto x = X_.row(r);
            double z = theta[d];
            for (std::size_t j = 0; j < d; ++j) z += theta[j] * x[j];
            const double p1 = clip_prob(sigmoid(z));
            total -= std::log(y_[r] == 1 ? p1 : 1.0 - p1);
        }
        return total / static_cast<double>(rows.size());
    }

    void grad(std::span<const double> theta, std::span<const std::size_t> rows,
              std::span<double> g) const override {
        const std::size_t d = X_.cols();
        for (auto& v : g) v = 0.0;
        const double scale = 1.0 / static_cast<double>(rows.size());
        for (std::size_t r : rows) {
            const auto x = X_.row(r);
            double z = theta[d];
            for (std::size_t j = 0; j < d; ++j) z += theta[j] * x[j];
            const double p1 = sigmoid(z);
            if (p1 < kProbClip || p1 > 1.0 - kProbClip) continue;  // flat clip region
            const double resid = scale * (p1 - static_cast<double>(y_[r]));
            for (std::size_t j = 0; j < d; ++j) g[j] += resid * x[j];
            g[d] += resid;
        }
        if (l2_ > 0.0)
            for (std::size_t i = 0; i < theta.size(); ++i)
                g[i] += 2.0 * l2_ * theta[i];
    }

private:
    const Matrix& X_;
    std::span<const int> y_;
    double l2_;
};

std::vector<double> pack(const LogisticParams& p) {
    std::vector<double> theta(p.weights.begin(), p.weights.end());
    theta.push_back(p.bias);
    return theta;
}

LogisticParams unpack(std::span<const double> theta) {
    LogisticParams p;
    p.weights.assign(theta.begin(), theta.end() - 1);
    p.bias = theta.back();
    return p;
}

}  // namespace

ProbPair logistic_forward(const LogisticParams& params,
                          std::span<const double> x) {
    const double p1 = clip_prob(raw_p1(params, x));
    return {1.0 - p1, p1};
}

std::vector<ProbPair> logistic_predict(const LogisticParams& params,
                                       const Matrix& X) {
    std::vector<ProbPair> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i)
        out[i] = logistic_forward(params, X.row(i));
    return out;
}

double logistic_nll(const LogisticParams& params, const Matrix& X,
                    std::span<const int> y) {
    if (X.rows() == 0 || X.rows() != y.size())
        throw std::invalid_argument("logistic_nll: bad shapes");
    double total = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const ProbPair p = logistic_forward(params, X.row(i));
        total -= std::log(y[i] == 1 ? p.p1 : p.p0);
    }
    return total / static_cast<double>(X.rows());
}

LogisticParams logistic_grad_nll(const LogisticParams& params, const Matrix& X,
                                 std::span<const int> y, double l2) {
    LogisticObjective obj(X, y, l2);
    std::vector<double> theta = pack(params);
    std::vector<double> g(theta.size());
    std::vector<std::size_t> rows(X.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    obj.grad(theta, rows, g);
    return unpack(g);
}

std::pair<LogisticParams, FitHistory> fit_logistic(
    const TrainConfig& config, const Matrix& X_train,
    std::span<const int> y_train, const Matrix& X_val,
    std::span<const int> y_val, double l2) {
    if (X_train.rows() == 0 || X_train.rows() != y_train.size())
        throw std::invalid_argument("fit_logistic: bad training shapes");
    if (X_val.rows() != y_val.size())
        throw std::invalid_argument("fit_logistic: bad validation shapes");

    Rng init_rng = Rng::derive(config.seed, {0x6c6f6769ULL});  // "logi"
    std::vector<double> theta0(X_train.cols() + 1);
    for (auto& t : theta0) t = 0.1 * init_rng.normal();

    LogisticObjective train_obj(X_train, y_train, l2);
    LogisticObjective val_obj(X_val, y_val, 0.0);
    auto [theta, hist] =
        first_order_fit(config, train_obj,
                        X_val.rows() > 0 ? &val_obj : nullptr, std::move(theta0));
    return {unpack(theta), std::move(hist)};
}

std::string logistic_to_json(const LogisticParams& params) {
    nlohmann::json j;
    j["format"] = "logistic-v1";
    j["m"] = params.weights.size();
    j["weights"] = params.weights;
    j["bias"] = params.bias;
    return j.dump(2);
}

LogisticParams logistic_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "logistic-v1")
        throw DataError("checkpoint is not logistic-v1 format");
    LogisticParams p;
    p.weights = j.at("weights").get<std::vector<double>>();
    p.bias = j.at("bias").get<double>();
    if (p.weights.size() != j.at("m").get<std::size_t>())
        throw DataError("logistic checkpoint: inconsistent weight count");
    return p;
}

std::map<std::int64_t, double> read_external_predictions(const std::string& path) {
    const auto rows = read_delimited(path, ',');
    if (rows.empty()) throw DataError("external predictions: empty file " + path);
    if (rows[0].size() != 2 || rows[0][0] != "row_id" || rows[0][1] != "p1")
        throw DataError("external predictions: expected header 'row_id,p1'");
    std::map<std::int64_t, double> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const std::string ctx = path + " line " + std::to_string(i + 1);
        if (rows[i].size() != 2)
            throw DataError(ctx + ": expected 2 fields, got " +
                            std::to_string(rows[i].size()));
        const std::int64_t id = parse_int(rows[i][0], ctx);
        const double p1 = parse_double(rows[i][1], ctx);
        if (p1 < 0.0 || p1 > 1.0)
            throw DataError(ctx + ": probability " + rows[i][1] +
                            " outside [0,1]");
        if (!out.emplace(id, p1).second)
            throw DataError(ctx + ": duplicate row_id " + rows[i][0]);
    }
    return out;
}

std::vector<ProbPair> align_external(const std::map<std::int64_t, double>& preds,
                                     std::span<const std::int64_t> row_ids) {
    std::vector<ProbPair> out;
    out.reserve(row_ids.size());
    for (std::int64_t id : row_ids) {
        const auto it = preds.find(id);
        if (it == preds.end())
            throw DataError("external predictions: missing row_id " +
                            std::to_string(id));
        out.push_back({1.0 - it->second, it->second});
    }
    return out;
}

std::vector<ProbPair> import_external_predictions(
    const std::string& path, std::span<const std::int64_t> row_ids) {
    return align_external(read_external_predictions(path), row_ids);
}

}  // namespace ikc
