#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <vector>

#include "ikc/errors.hpp"
#include "ikc/model.hpp"
#include "ikc/rng.hpp"

using namespace ikc;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    return m;
}

IkcParams random_params(Rng& rng, std::size_t d, double scale = 0.4) {
    IkcParams p;
    p.w0.resize(d);
    p.w1.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        p.w0[j] = {scale * rng.normal(), scale * rng.normal()};
        p.w1[j] = {scale * rng.normal(), scale * rng.normal()};
    }
    p.b0 = {0.5 + scale * rng.normal(), scale * rng.normal()};
    p.b1 = {0.5 + scale * rng.normal(), scale * rng.normal()};
    return p;
}

// Central finite differences of the packed training objective.
std::vector<double> fd_gradient(const IkcParams& params, const Matrix& X,
                                const std::vector<int>& y, AggregationMode mode,
                                double wd, double h = 1e-5) {
    std::vector<double> theta = ikc_pack(params);
    std::vector<double> g(theta.size());
    auto objective = [&](const std::vector<double>& th) {
        const IkcParams p = ikc_unpack(th, X.cols());
        double l = ikc_nll(p, X, y, mode);
        for (double t : th) l += wd * t * t;
        return l;
    };
    for (std::size_t i = 0; i < theta.size(); ++i) {
        auto plus = theta, minus = theta;
        plus[i] += h;
        minus[i] -= h;
        g[i] = (objective(plus) - objective(minus)) / (2.0 * h);
    }
    return g;
}

double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

// Four XOR rows replicated.
void xor_data(std::size_t reps, Matrix& X, std::vector<int>& y) {
    const int rows[4][3] = {{0, 0, 0}, {0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
    X = Matrix(4 * reps, 2);
    y.resize(4 * reps);
    for (std::size_t r = 0; r < 4 * reps; ++r) {
        X(r, 0) = rows[r % 4][0];
        X(r, 1) = rows[r % 4][1];
        y[r] = rows[r % 4][2];
    }
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("forward on the hand example") {
    IkcParams p;
    p.w0 = {Amplitude{0, 0}};
    p.w1 = {Amplitude{1, 0}};
    p.b0 = {1, 0};
    p.b1 = {1, 0};
    const std::vector<double> x{1.0};

    const ProbPair coh = ikc_forward(p, x, AggregationMode::coherent);
    CHECK(coh.p1 == doctest::Approx(0.8));

    const ProbPair inc = ikc_forward(p, x, AggregationMode::incoherent);
    CHECK(inc.p1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("zero input makes the modes agree") {
    Rng rng(1);
    const IkcParams p = random_params(rng, 3);
    const std::vector<double> x{0.0, 0.0, 0.0};
    const ProbPair coh = ikc_forward(p, x, AggregationMode::coherent);
    const ProbPair inc = ikc_forward(p, x, AggregationMode::incoherent);
    CHECK(std::abs(coh.p1 - inc.p1) < 1e-12);
}

TEST_CASE("modes agree when at most one feature is active and bias is zero") {
    Rng rng(2);
    IkcParams p = random_params(rng, 4);
    p.b0 = {0, 0};
    p.b1 = {0, 0};
    std::vector<double> x{0.0, 0.0, 1.7, 0.0};
    const ProbPair coh = ikc_forward(p, x, AggregationMode::coherent);
    const ProbPair inc = ikc_forward(p, x, AggregationMode::incoherent);
    CHECK(std::abs(coh.p1 - inc.p1) < 1e-12);
}

TEST_CASE("dimension mismatch is an error") {
    Rng rng(3);
    const IkcParams p = random_params(rng, 2);
    const std::vector<double> x{1.0, 2.0, 3.0};
    CHECK_THROWS_AS(ikc_forward(p, x, AggregationMode::coherent),
                    std::invalid_argument);
}

TEST_CASE("rescaling both channels by a common complex factor is invisible") {
    Rng rng(4);
    const IkcParams p = random_params(rng, 3);
    const Amplitude c{1.3, -2.1};
    IkcParams q = p;
    for (auto& z : q.w0) z *= c;
    for (auto& z : q.w1) z *= c;
    q.b0 *= c;
    q.b1 *= c;
    for (int rep = 0; rep < 50; ++rep) {
        const std::vector<double> x{rng.normal(), rng.normal(), rng.normal()};
        for (auto mode : {AggregationMode::coherent, AggregationMode::incoherent}) {
            const ProbPair a = ikc_forward(p, x, mode);
            const ProbPair b = ikc_forward(q, x, mode);
            CHECK(std::abs(a.p1 - b.p1) < 1e-10);
        }
    }
}

TEST_CASE("nll of a perfectly confident row hits the clip floor") {
    // Channel-1 energy overwhelms channel 0: p1 clipped to 1 - 1e-7.
    IkcParams p;
    p.w0 = {Amplitude{0, 0}};
    p.w1 = {Amplitude{0, 0}};
    p.b0 = {1e-9, 0};
    p.b1 = {1e6, 0};
    const Matrix X = from_rows({{0.0}});
    const std::vector<int> y{1};
    CHECK(ikc_nll(p, X, y, AggregationMode::coherent) ==
          doctest::Approx(1e-7).epsilon(1e-3));
}

TEST_CASE("nll at p = 0.5 is ln 2") {
    IkcParams p;
    p.w0 = {Amplitude{0, 0}};
    p.w1 = {Amplitude{0, 0}};
    p.b0 = {1, 0};
    p.b1 = {1, 0};
    const Matrix X = from_rows({{0.4}, {-0.3}, {2.0}});
    const std::vector<int> y{0, 1, 0};
    CHECK(ikc_nll(p, X, y, AggregationMode::coherent) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("nll equals the row-by-row oracle") {
    Rng rng(5);
    const IkcParams p = random_params(rng, 3);
    Matrix X(8, 3);
    std::vector<int> y(8);
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 3; ++j) X(i, j) = rng.normal();
        y[i] = rng.bernoulli(0.5);
    }
    for (auto mode : {AggregationMode::coherent, AggregationMode::incoherent}) {
        double manual = 0.0;
        for (std::size_t i = 0; i < 8; ++i) {
            const ProbPair pr = ikc_forward(p, X.row(i), mode);
            manual -= std::log(y[i] == 1 ? pr.p1 : pr.p0);
        }
        manual /= 8.0;
        CHECK(ikc_nll(p, X, y, mode) == doctest::Approx(manual).epsilon(1e-14));
    }
}

TEST_CASE("analytic gradient matches central differences") {
    Rng rng(6);
    for (int rep = 0; rep < 8; ++rep) {
        const std::size_t d = 1 + rng.below(3);
        const std::size_t n = 4 + rng.below(13);
        const IkcParams p = random_params(rng, d);
        Matrix X(n, d);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) X(i, j) = rng.normal();
            y[i] = rng.bernoulli(0.5);
        }
        const double wd = rep % 2 == 0 ? 0.0 : 0.01;
        const auto mode = rep % 2 == 0 ? AggregationMode::coherent
                                       : AggregationMode::incoherent;
        const auto analytic = ikc_pack(ikc_grad_nll(p, X, y, mode, wd));
        const auto numeric = fd_gradient(p, X, y, mode, wd);
        CHECK(max_rel_err(analytic, numeric) < 1e-5);
    }
}

TEST_CASE("gradient antisymmetry for mirrored channels on all-zero labels") {
    // Swapping the channel roles negates the channel-wise gradients when
    // the parameters are mirrored and every label points at channel 0.
    Rng rng(7);
    IkcParams p = random_params(rng, 2);
    p.w1 = p.w0;
    p.b1 = p.b0;
    Matrix X(6, 2);
    std::vector<int> y(6, 0);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 2; ++j) X(i, j) = rng.normal();
    const IkcParams g = ikc_grad_nll(p, X, y, AggregationMode::coherent, 0.0);
    for (std::size_t j = 0; j < 2; ++j) {
        CHECK(g.w0[j].real() == doctest::Approx(-g.w1[j].real()).epsilon(1e-9));
        CHECK(g.w0[j].imag() == doctest::Approx(-g.w1[j].imag()).epsilon(1e-9));
    }
    CHECK(g.b0.real() == doctest::Approx(-g.b1.real()).epsilon(1e-9));
    CHECK(g.b0.imag() == doctest::Approx(-g.b1.imag()).epsilon(1e-9));
}

TEST_CASE("zero-epoch budget returns the initialization") {
    Matrix X;
    std::vector<int> y;
    xor_data(8, X, y);
    TrainConfig cfg;
    cfg.max_epochs = 0;
    cfg.seed = 9;
    auto [params, hist] =
        ikc_fit(cfg, X, y, Matrix(0, 2), {}, AggregationMode::coherent);
    Rng init_rng = Rng::derive(cfg.seed, {0x696e6974ULL});
    const IkcParams expect = ikc_init(2, init_rng);
    CHECK(ikc_pack(params) == ikc_pack(expect));
    CHECK(hist.epochs_run == 0);
}

TEST_CASE("coherent training solves replicated XOR") {
    Matrix X;
    std::vector<int> y;
    xor_data(100, X, y);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 500;
    cfg.seed = 11;
    auto [params, hist] =
        ikc_fit(cfg, X, y, Matrix(0, 2), {}, AggregationMode::coherent);
    CHECK(ikc_nll(params, X, y, AggregationMode::coherent) < 0.05);
}

TEST_CASE("incoherent training cannot learn XOR") {
    Matrix Xtr, Xval;
    std::vector<int> ytr, yval;
    xor_data(100, Xtr, ytr);
    xor_data(25, Xval, yval);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 300;
    cfg.seed = 12;
    auto [params, hist] =
        ikc_fit(cfg, Xtr, ytr, Xval, yval, AggregationMode::incoherent);
    // Validation accuracy stays at chance.
    std::size_t correct = 0;
    for (std::size_t i = 0; i < Xval.rows(); ++i) {
        const ProbPair p = ikc_forward(params, Xval.row(i), AggregationMode::incoherent);
        correct += (p.p1 >= 0.5 ? 1 : 0) == yval[i];
    }
    const double acc = double(correct) / double(Xval.rows());
    CHECK(acc > 0.35);
    CHECK(acc < 0.65);
}

TEST_CASE("diverged training reports the epoch") {
    Matrix X;
    std::vector<int> y;
    xor_data(4, X, y);
    TrainConfig cfg;
    cfg.optimizer = Optimizer::sgd;
    cfg.learning_rate = 1e9;  // guaranteed blow-up
    cfg.max_epochs = 50;
    cfg.seed = 13;
    CHECK_THROWS_AS(ikc_fit(cfg, X, y, Matrix(0, 2), {}, AggregationMode::coherent),
                    DivergedTraining);
}

TEST_CASE("more weight decay never grows the final parameter norm") {
    Matrix X;
    std::vector<int> y;
    xor_data(30, X, y);
    double prev_norm = -1.0;
    bool first = true;
    for (double wd : {0.0, 1e-3, 1e-2, 1e-1}) {
        TrainConfig cfg;
        cfg.learning_rate = 0.05;
        cfg.max_epochs = 200;
        cfg.weight_decay = wd;
        cfg.seed = 14;
        auto [params, hist] =
            ikc_fit(cfg, X, y, Matrix(0, 2), {}, AggregationMode::coherent);
        double norm = 0.0;
        for (double t : ikc_pack(params)) norm += t * t;
        if (!first) CHECK(norm <= prev_norm + 1e-9);
        prev_norm = norm;
        first = false;
    }
}

TEST_CASE("checkpoint json round trip") {
    Rng rng(15);
    const IkcParams p = random_params(rng, 5);
    const IkcParams q = ikc_from_json(ikc_to_json(p));
    CHECK(ikc_pack(p) == ikc_pack(q));

    const std::string path =
        (std::filesystem::temp_directory_path() / "ikc_ckpt_test.json").string();
    ikc_save(p, path);
    const IkcParams r = ikc_load(path);
    CHECK(ikc_pack(p) == ikc_pack(r));
    std::filesystem::remove(path);

    CHECK_THROWS_AS(ikc_from_json("{\"format\":\"other\"}"), DataError);
}

TEST_CASE("mini-batch training still converges") {
    Matrix X;
    std::vector<int> y;
    xor_data(64, X, y);
    TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 200;
    cfg.batch_size = 32;
    cfg.seed = 16;
    auto [params, hist] =
        ikc_fit(cfg, X, y, Matrix(0, 2), {}, AggregationMode::coherent);
    CHECK(ikc_nll(params, X, y, AggregationMode::coherent) < 0.2);
}

}  // TEST_SUITE
