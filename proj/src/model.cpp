#include "ikc/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "ikc/errors.hpp"

namespace ikc {

IkcParams ikc_init(std::size_t d, Rng& rng) {
    IkcParams p;
    p.w0.resize(d);
    p.w1.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        p.w0[j] = {0.1 * rng.normal(), 0.1 * rng.normal()};
        p.w1[j] = {0.1 * rng.normal(), 0.1 * rng.normal()};
    }
    p.b0 = {0.5 + 0.1 * rng.normal(), 0.1 * rng.normal()};
    p.b1 = {0.5 + 0.1 * rng.normal(), 0.1 * rng.normal()};
    return p;
}

namespace {

void check_dim(const IkcParams& params, std::size_t d) {
    if (params.w0.size() != d || params.w1.size() != d)
        throw std::invalid_argument("ikc: feature dimension mismatch");
}

Amplitude affine(std::span<const Amplitude> w, const Amplitude& b,
                 std::span<const double> x) {
    double re = b.real();
    double im = b.imag();
    for (std::size_t j = 0; j < x.size(); ++j) {
        re += w[j].real() * x[j];
        im += w[j].imag() * x[j];
    }
    return {re, im};
}

double incoherent_channel(std::span<const Amplitude> w, const Amplitude& b,
                          std::span<const double> x) {
    double e = std::norm(b);
    for (std::size_t j = 0; j < x.size(); ++j) e += std::norm(w[j]) * x[j] * x[j];
    return e;
}

}  // namespace

EnergyPair ikc_energies(const IkcParams& params, std::span<const double> x,
                        AggregationMode mode) {
    check_dim(params, x.size());
    if (mode == AggregationMode::coherent) {
        return {std::norm(affine(params.w0, params.b0, x)),
                std::norm(affine(params.w1, params.b1, x))};
    }
    return {incoherent_channel(params.w0, params.b0, x),
            incoherent_channel(params.w1, params.b1, x)};
}

ProbPair ikc_forward(const IkcParams& params, std::span<const double> x,
                     AggregationMode mode) {
    const ProbPair raw = born_normalize(ikc_energies(params, x, mode));
    const double p1 = clip_prob(raw.p1);
    return {1.0 - p1, p1};
}

std::vector<ProbPair> ikc_predict(const IkcParams& params, const Matrix& X,
                                  AggregationMode mode) {
    std::vector<ProbPair> out(X.rows());
    for (std::size_t i = 0; i < X.rows(); ++i)
        out[i] = ikc_forward(params, X.row(i), mode);
    return out;
}

double ikc_nll(const IkcParams& params, const Matrix& X,
               std::span<const int> y, AggregationMode mode) {
    if (X.rows() == 0) throw std::invalid_argument("ikc_nll: empty data");
    if (X.rows() != y.size())
        throw std::invalid_argument("ikc_nll: label count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const ProbPair p = ikc_forward(params, X.row(i), mode);
        total -= std::log(y[i] == 1 ? p.p1 : p.p0);
    }
    return total / static_cast<double>(X.rows());
}

std::vector<double> ikc_pack(const IkcParams& params) {
    const std::size_t d = params.dim();
    std::vector<double> theta(4 * d + 4);
    for (std::size_t j = 0; j < d; ++j) {
        theta[2 * j] = params.w0[j].real();
        theta[2 * j + 1] = params.w0[j].imag();
        theta[2 * d + 2 * j] = params.w1[j].real();
        theta[2 * d + 2 * j + 1] = params.w1[j].imag();
    }
    theta[4 * d] = params.b0.real();
    theta[4 * d + 1] = params.b0.imag();
    theta[4 * d + 2] = params.b1.real();
    theta[4 * d + 3] = params.b1.imag();
    return theta;
}

IkcParams ikc_unpack(std::span<const double> theta, std::size_t d) {
    if (theta.size() != 4 * d + 4)
        throw std::invalid_argument("ikc_unpack: wrong parameter count");
    IkcParams p;
    p.w0.resize(d);
    p.w1.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        p.w0[j] = {theta[2 * j], theta[2 * j + 1]};
        p.w1[j] = {theta[2 * d + 2 * j], theta[2 * d + 2 * j + 1]};
    }
    p.b0 = {theta[4 * d], theta[4 * d + 1]};
    p.b1 = {theta[4 * d + 2], theta[4 * d + 3]};
    return p;
}

namespace {

// NLL gradient shared by ikc_grad_nll and the training objective. theta is
// the packed layout of ikc_pack; grad must be pre-sized and zeroed by the
// caller before adding the decay term.
class IkcCore {
public:
    IkcCore(const Matrix& X, std::span<const int> y, AggregationMode mode)
        : X_(X), y_(y), mode_(mode) {}

    double nll_rows(std::span<const double> theta,
                    std::span<const std::size_t> rows) const {
        const IkcParams p = ikc_unpack(theta, X_.cols());
        double total = 0.0;
        for (std::size_t r : rows) {
            const ProbPair pr = ikc_forward(p, X_.row(r), mode_);
            total -= std::log(y_[r] == 1 ? pr.p1 : pr.p0);
        }
        return total / static_cast<double>(rows.size());
    }

    void add_nll_grad(std::span<const double> theta,
                      std::span<const std::size_t> rows,
                      std::span<double> grad) const {
        const std::size_t d = X_.cols();
        const IkcParams p = ikc_unpack(theta, d);
        const double scale = 1.0 / static_cast<double>(rows.size());
        for (std::size_t r : rows) {
            const auto x = X_.row(r);
            const EnergyPair e = ikc_energies(p, x, mode_);
            const double total = e.e0 + e.e1;
            if (total <= 0.0) throw DegenerateEnergies();
            const double p1 = e.e1 / total;
            if (p1 < kProbClip || p1 > 1.0 - kProbClip) continue;  // flat clip region

            const int label = y_[r];
            const double ey = label == 1 ? e.e1 : e.e0;
            // dLoss/dE_c = -(c == y)/E_y + 1/(E_0 + E_1)
            const double coef0 = scale * ((label == 0 ? -1.0 / ey : 0.0) + 1.0 / total);
            const double coef1 = scale * ((label == 1 ? -1.0 / ey : 0.0) + 1.0 / total);

            if (mode_ == AggregationMode::coherent) {
                const Amplitude psi0 = affine(p.w0, p.b0, x);
                const Amplitude psi1 = affine(p.w1, p.b1, x);
                const double a0 = 2.0 * coef0 * psi0.real();
                const double b0 = 2.0 * coef0 * psi0.imag();
                const double a1 = 2.0 * coef1 * psi1.real();
                const double b1 = 2.0 * coef1 * psi1.imag();
                for (std::size_t j = 0; j < d; ++j) {
                    grad[2 * j] += a0 * x[j];
                    grad[2 * j + 1] += b0 * x[j];
                    grad[2 * d + 2 * j] += a1 * x[j];
                    grad[2 * d + 2 * j + 1] += b1 * x[j];
                }
                grad[4 * d] += a0;
                grad[4 * d + 1] += b0;
                grad[4 * d + 2] += a1;
                grad[4 * d + 3] += b1;
            } else {
                for (std::size_t j = 0; j < d; ++j) {
                    const double xx = x[j] * x[j];
                    grad[2 * j] += coef0 * 2.0 * p.w0[j].real() * xx;
                    grad[2 * j + 1] += coef0 * 2.0 * p.w0[j].imag() * xx;
                    grad[2 * d + 2 * j] += coef1 * 2.0 * p.w1[j].real() * xx;
                    grad[2 * d + 2 * j + 1] += coef1 * 2.0 * p.w1[j].imag() * xx;
                }
                grad[4 * d] += coef0 * 2.0 * p.b0.real();
                grad[4 * d + 1] += coef0 * 2.0 * p.b0.imag();
                grad[4 * d + 2] += coef1 * 2.0 * p.b1.real();
                grad[4 * d + 3] += coef1 * 2.0 * p.b1.imag();
            }
        }
    }

private:
    const Matrix& X_;
    std::span<const int> y_;
    AggregationMode mode_;
};

class IkcObjective final : public Objective {
public:
    IkcObjective(const Matrix& X, std::span<const int> y, AggregationMode mode,
                 double weight_decay)
        : core_(X, y, mode), n_(X.rows()), p_(4 * X.cols() + 4),
          decay_(weight_decay) {}

    std::size_t n_rows() const override { return n_; }
    std::size_t n_params() const override { return p_; }

    double loss(std::span<const double> theta,
                std::span<const std::size_t> rows) const override {
        double l = core_.nll_rows(theta, rows);
        if (decay_ > 0.0)
            for (double t : theta) l += decay_ * t * t;
        return l;
    }

    void grad(std::span<const double> theta, std::span<const std::size_t> rows,
              std::span<double> g) const override {
        for (auto& v : g) v = 0.0;
        core_.add_nll_grad(theta, rows, g);
        if (decay_ > 0.0)
            for (std::size_t i = 0; i < theta.size(); ++i)
                g[i] += 2.0 * decay_ * theta[i];
    }

    double nll(std::span<const double> theta,
               std::span<const std::size_t> rows) const override {
        return core_.nll_rows(theta, rows);
    }

private:
    IkcCore core_;
    std::size_t n_;
    std::size_t p_;
    double decay_;
};

}  // namespace

IkcParams ikc_grad_nll(const IkcParams& params, const Matrix& X,
                       std::span<const int> y, AggregationMode mode,
                       double weight_decay) {
    if (X.rows() == 0 || X.rows() != y.size())
        throw std::invalid_argument("ikc_grad_nll: bad shapes");
    std::vector<double> theta = ikc_pack(params);
    std::vector<double> g(theta.size(), 0.0);
    std::vector<std::size_t> rows(X.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    IkcCore core(X, y, mode);
    core.add_nll_grad(theta, rows, g);
    if (weight_decay > 0.0)
        for (std::size_t i = 0; i < theta.size(); ++i)
            g[i] += 2.0 * weight_decay * theta[i];
    return ikc_unpack(g, X.cols());
}

std::pair<IkcParams, FitHistory> ikc_fit(const TrainConfig& config,
                                         const Matrix& X_train,
                                         std::span<const int> y_train,
                                         const Matrix& X_val,
                                         std::span<const int> y_val,
                                         AggregationMode mode) {
    if (X_train.rows() == 0 || X_train.rows() != y_train.size())
        throw std::invalid_argument("ikc_fit: bad training shapes");
    if (X_val.rows() != y_val.size())
        throw std::invalid_argument("ikc_fit: bad validation shapes");

    Rng init_rng = Rng::derive(config.seed, {0x696e6974ULL});  // "init"
    const IkcParams start = ikc_init(X_train.cols(), init_rng);

    IkcObjective train_obj(X_train, y_train, mode, config.weight_decay);
    IkcObjective val_obj(X_val, y_val, mode, 0.0);
    auto [theta, hist] =
        first_order_fit(config, train_obj,
                        X_val.rows() > 0 ? &val_obj : nullptr, ikc_pack(start));
    return {ikc_unpack(theta, X_train.cols()), std::move(hist)};
}

std::string ikc_to_json(const IkcParams& params) {
    nlohmann::json j;
    j["format"] = "ikc-v1";
    j["d"] = params.dim();
    auto fill = [](const std::vector<Amplitude>& w, nlohmann::json& re,
                   nlohmann::json& im) {
        re = nlohmann::json::array();
        im = nlohmann::json::array();
        for (const auto& z : w) {
            re.push_back(z.real());
            im.push_back(z.imag());
        }
    };
    fill(params.w0, j["w0_re"], j["w0_im"]);
    fill(params.w1, j["w1_re"], j["w1_im"]);
    j["b0_re"] = params.b0.real();
    j["b0_im"] = params.b0.imag();
    j["b1_re"] = params.b1.real();
    j["b1_im"] = params.b1.imag();
    return j.dump(2);
}

IkcParams ikc_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "ikc-v1")
        throw DataError("checkpoint is not ikc-v1 format");
    const std::size_t d = j.at("d").get<std::size_t>();
    IkcParams p;
    p.w0.resize(d);
    p.w1.resize(d);
    for (std::size_t k = 0; k < d; ++k) {
        p.w0[k] = {j.at("w0_re").at(k).get<double>(),
                   j.at("w0_im").at(k).get<double>()};
        p.w1[k] = {j.at("w1_re").at(k).get<double>(),
                   j.at("w1_im").at(k).get<double>()};
    }
    p.b0 = {j.at("b0_re").get<double>(), j.at("b0_im").get<double>()};
    p.b1 = {j.at("b1_re").get<double>(), j.at("b1_im").get<double>()};
    return p;
}

void ikc_save(const IkcParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << ikc_to_json(params) << '\n';
}

IkcParams ikc_load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read checkpoint: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ikc_from_json(ss.str());
}

}  // namespace ikc
