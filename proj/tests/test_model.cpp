#include <doctest.h>

#include <cmath>
#include <vector>

#include "npnet/model.hpp"
#include "npnet/topology.hpp"
#include "test_util.hpp"

using namespace npnet;
using namespace npnet_test;

TEST_CASE("all-zero weights give zero activations and a uniform softmax") {
    ModelConfig cfg{2, 3, 10, NormMode::CapNorm};
    NetworkParams p;
    p.dims = {3, 4, 10};
    p.weights = {Matrix(3, 4), Matrix(4, 10)};
    p.run_mean = {std::vector<double>(4, 0.0)};
    p.run_div = {std::vector<double>(4, 1.0)};

    Rng rng(1);
    Matrix X = random_matrix(5, 3, rng);
    const ForwardCache cache = forward(p, cfg, X, RunMode::Train);
    for (double v : cache.z[0].flat()) CHECK(v == 0.0);
    for (double v : cache.x[1].flat()) CHECK(v == 0.0);
    for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t j = 0; j < 10; ++j) CHECK(cache.probs(b, j) == doctest::Approx(0.1).epsilon(1e-12));

    std::vector<int> labels(5, 3);
    const auto [ce, err] = loss_and_error(cache, labels);
    CHECK(ce == doctest::Approx(std::log(10.0)).epsilon(1e-12)); // ln 10 = 2.302585...
    CHECK(err == 5); // argmax ties resolve to class 0
}

// Independent scalar recomputation of a 2-2-2 CapNorm net, no matrix ops.
TEST_CASE("forward matches a scalar-by-scalar recomputation") {
    ModelConfig cfg{2, 2, 2, NormMode::CapNorm};
    NetworkParams p;
    p.dims = {2, 2, 2};
    p.weights = {Matrix(2, 2), Matrix(2, 2)};
    p.weights[0](0, 0) = 1.0;  p.weights[0](0, 1) = -1.0;
    p.weights[0](1, 0) = 0.5;  p.weights[0](1, 1) = 2.0;
    p.weights[1](0, 0) = 1.0;  p.weights[1](0, 1) = 0.0;
    p.weights[1](1, 0) = -1.0; p.weights[1](1, 1) = 1.0;
    p.run_mean = {std::vector<double>(2, 0.0)};
    p.run_div = {std::vector<double>(2, 1.0)};

    Matrix X(3, 2);
    X(0, 0) = 1.0;  X(0, 1) = 2.0;
    X(1, 0) = -1.0; X(1, 1) = 0.5;
    X(2, 0) = 0.0;  X(2, 1) = -2.0;

    const ForwardCache cache = forward(p, cfg, X, RunMode::Train);

    // z1 per element.
    double z1[3][2];
    for (int b = 0; b < 3; ++b)
        for (int j = 0; j < 2; ++j)
            z1[b][j] = X(b, 0) * p.weights[0](0, j) + X(b, 1) * p.weights[0](1, j);
    // CapNorm per column.
    double x1[3][2];
    for (int j = 0; j < 2; ++j) {
        const double mu = (z1[0][j] + z1[1][j] + z1[2][j]) / 3.0;
        double var = 0.0;
        for (int b = 0; b < 3; ++b) var += (z1[b][j] - mu) * (z1[b][j] - mu);
        var /= 3.0;
        const double s = std::max(std::sqrt(var), 1.0);
        for (int b = 0; b < 3; ++b) {
            const double y = (z1[b][j] - mu) / s;
            x1[b][j] = y > 0.0 ? y : 0.0;
        }
    }
    for (int b = 0; b < 3; ++b)
        for (int j = 0; j < 2; ++j)
            CHECK(cache.x[1](b, j) == doctest::Approx(x1[b][j]).epsilon(1e-14));
    // Output layer + softmax.
    for (int b = 0; b < 3; ++b) {
        double z2[2];
        for (int j = 0; j < 2; ++j)
            z2[j] = x1[b][0] * p.weights[1](0, j) + x1[b][1] * p.weights[1](1, j);
        const double m = std::max(z2[0], z2[1]);
        const double e0 = std::exp(z2[0] - m), e1 = std::exp(z2[1] - m);
        CHECK(cache.probs(b, 0) == doctest::Approx(e0 / (e0 + e1)).epsilon(1e-14));
        CHECK(cache.probs(b, 1) == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-14));
    }
}

TEST_CASE("forward rejects bad batches") {
    ModelConfig cfg{2, 3, 2, NormMode::CapNorm};
    Rng rng(3);
    NetworkParams p = NetworkParams::init(cfg, std::vector<std::size_t>{4}, rng);
    CHECK_THROWS_AS(forward(p, cfg, Matrix(0, 3), RunMode::Train), Error);
    CHECK_THROWS_AS(forward(p, cfg, Matrix(4, 2), RunMode::Train), Error);
    CHECK_THROWS_AS(forward(p, cfg, Matrix(1, 3), RunMode::Train), Error); // batch 1 + norm
    CHECK_NOTHROW(forward(p, cfg, Matrix(1, 3), RunMode::Eval));
}

TEST_CASE("loss_and_error on explicit probability rows") {
    // softmax(log p) = p when each row sums to 1, so feed log p as logits.
    ModelConfig cfg{1, 3, 3, NormMode::None};
    NetworkParams p;
    p.dims = {3, 3};
    p.weights = {Matrix(3, 3)};
    for (int i = 0; i < 3; ++i) p.weights[0](i, i) = 1.0; // identity

    const double rows[3][3] = {{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.25, 0.25, 0.5}};
    Matrix X(3, 3);
    for (int b = 0; b < 3; ++b)
        for (int j = 0; j < 3; ++j) X(b, j) = std::log(rows[b][j]);
    const ForwardCache cache = forward(p, cfg, X, RunMode::Train);
    std::vector<int> labels = {0, 1, 2};
    const auto [ce, err] = loss_and_error(cache, labels);
    const double expected = -(std::log(0.7) + std::log(0.8) + std::log(0.5)) / 3.0;
    CHECK(ce == doctest::Approx(expected).epsilon(1e-12));
    CHECK(err == 0);

    std::vector<int> bad = {0, 1, 3};
    CHECK_THROWS_AS(loss_and_error(cache, bad), Error);

    // Probability ~1 on the true class.
    Matrix X2(2, 3);
    X2(0, 0) = 60.0; X2(1, 1) = 60.0;
    const ForwardCache c2 = forward(p, cfg, X2, RunMode::Train);
    std::vector<int> l2 = {0, 1};
    const auto [ce2, err2] = loss_and_error(c2, l2);
    CHECK(ce2 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(err2 == 0);
}

TEST_CASE("capnorm_forward known columns") {
    std::vector<double> y(3);

    const std::vector<double> a = {1.0, 2.0, 3.0};
    NormStats sa = capnorm_forward(a, y);
    CHECK(sa.mean == doctest::Approx(2.0));
    CHECK(sa.sigma == doctest::Approx(std::sqrt(2.0 / 3.0)));
    CHECK(sa.divisor == 1.0);
    CHECK(y[0] == doctest::Approx(-1.0));
    CHECK(y[1] == doctest::Approx(0.0));
    CHECK(y[2] == doctest::Approx(1.0));

    const std::vector<double> b = {0.0, 4.0, 8.0};
    NormStats sb = capnorm_forward(b, y);
    CHECK(sb.mean == doctest::Approx(4.0));
    CHECK(sb.sigma == doctest::Approx(3.265986323710904).epsilon(1e-12));
    CHECK(y[0] == doctest::Approx(-1.224744871391589).epsilon(1e-12));
    CHECK(y[1] == doctest::Approx(0.0));
    CHECK(y[2] == doctest::Approx(1.224744871391589).epsilon(1e-12));

    const std::vector<double> c = {5.0, 5.0, 5.0};
    NormStats sc = capnorm_forward(c, y);
    CHECK(sc.sigma == 0.0);
    CHECK(sc.divisor == 1.0);
    for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("capnorm output invariants on random columns") {
    Rng rng(11);
    std::vector<double> z(16), y(16);
    for (int trial = 0; trial < 50; ++trial) {
        const double scale = trial % 2 == 0 ? 0.3 : 5.0;
        for (auto& v : z) v = scale * rng.normal();
        const NormStats s = capnorm_forward(z, y);
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(y.size());
        CHECK(std::fabs(mean) < 1e-12);
        double var = 0.0;
        for (double v : y) var += (v - mean) * (v - mean);
        var /= static_cast<double>(y.size());
        CHECK(std::sqrt(var) == doctest::Approx(std::min(s.sigma, 1.0)).epsilon(1e-9));
    }
}

TEST_CASE("capnorm scale invariance for sigma > 1") {
    Rng rng(13);
    std::vector<double> z(8), zc(8), y1(8), y2(8);
    for (auto& v : z) v = 4.0 * rng.normal();
    const NormStats s = capnorm_forward(z, y1);
    REQUIRE(s.sigma > 1.0);
    const double c = 2.5;
    for (std::size_t i = 0; i < z.size(); ++i) zc[i] = c * z[i];
    capnorm_forward(zc, y2);
    for (std::size_t i = 0; i < z.size(); ++i)
        CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
}

TEST_CASE("capnorm_backward branches") {
    std::vector<double> z = {1.0, 2.0, 3.0}; // sigma < 1
    std::vector<double> y(3), dz(3);
    const NormStats s = capnorm_forward(z, y);

    std::vector<double> dy = {1.0, 1.0, 1.0};
    capnorm_backward(dy, s, z, dz);
    for (double v : dz) CHECK(v == doctest::Approx(0.0));

    // sigma > 1: matches central differences of capnorm_forward.
    std::vector<double> zb = {0.0, 4.0, 9.0};
    std::vector<double> yb(3);
    const NormStats sb = capnorm_forward(zb, yb);
    REQUIRE(sb.sigma > 1.0);
    std::vector<double> dyb = {0.3, -0.7, 0.9};
    capnorm_backward(dyb, sb, zb, dz);
    const double h = 1e-6;
    for (int k = 0; k < 3; ++k) {
        std::vector<double> zp = zb, zm = zb, yp(3), ym(3);
        zp[static_cast<std::size_t>(k)] += h;
        zm[static_cast<std::size_t>(k)] -= h;
        capnorm_forward(zp, yp);
        capnorm_forward(zm, ym);
        double fd = 0.0;
        for (int i = 0; i < 3; ++i)
            fd += dyb[static_cast<std::size_t>(i)] *
                  (yp[static_cast<std::size_t>(i)] - ym[static_cast<std::size_t>(i)]) / (2.0 * h);
        CHECK(dz[static_cast<std::size_t>(k)] == doctest::Approx(fd).epsilon(1e-8));
    }

    // dY parallel to Y is annihilated when sigma > 1.
    std::vector<double> dyy(3);
    for (int i = 0; i < 3; ++i) dyy[static_cast<std::size_t>(i)] = 1.7 * yb[static_cast<std::size_t>(i)];
    capnorm_backward(dyy, sb, zb, dz);
    for (double v : dz) CHECK(std::fabs(v) < 1e-14);
}

TEST_CASE("zero fan-out units receive an exactly zero fan-in gradient") {
    NetFixture f = make_safe_net(21, 3, {4, 3}, 3, 2, 6, NormMode::CapNorm, 1.0);
    // Zero the fan-out of hidden unit 1 in layer 1 (row 1 of W_2).
    for (std::size_t j = 0; j < f.params.weights[1].cols(); ++j) f.params.weights[1](1, j) = 0.0;
    const ForwardCache cache = forward(f.params, f.config, f.X, RunMode::Train);
    const Gradients g = backward(f.params, f.config, cache, f.labels, 1.0);
    for (std::size_t i = 0; i < g.w[0].rows(); ++i) CHECK(g.w[0](i, 1) == 0.0);
}

TEST_CASE("backward matches central finite differences on random nets") {
    const struct {
        NormMode norm;
        double scale;
    } cases[] = {{NormMode::CapNorm, 0.4}, {NormMode::CapNorm, 6.0},
                 {NormMode::BatchNorm, 1.0}, {NormMode::BatchNormAffine, 1.0},
                 {NormMode::None, 1.0}};
    int idx = 0;
    for (const auto& c : cases) {
        NetFixture f = make_safe_net(100 + idx++, 3, {4, 3}, 3, 3, 7, c.norm, c.scale);
        const double scale = 0.37;
        const ForwardCache cache = forward(f.params, f.config, f.X, RunMode::Train);
        const Gradients analytic = backward(f.params, f.config, cache, f.labels, scale);
        const Gradients numeric = numeric_gradient(f.params, f.config, f.X, f.labels, scale, 1e-5);
        CHECK(max_rel_err(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("capnorm keeps the fan-in gradient orthogonal to the fan-in when sigma > 1") {
    NetFixture f = make_safe_net(31, 2, {5}, 4, 3, 8, NormMode::CapNorm, 6.0);
    const ForwardCache cache = forward(f.params, f.config, f.X, RunMode::Train);
    bool saw_big_sigma = false;
    const Gradients g = backward(f.params, f.config, cache, f.labels, 1.0);
    std::vector<double> wcol, gcol;
    for (std::size_t j = 0; j < f.params.dims[1]; ++j) {
        if (cache.stats[0][j].sigma <= 1.0) continue;
        saw_big_sigma = true;
        f.params.weights[0].get_col(j, wcol);
        g.w[0].get_col(j, gcol);
        const double denom = vec_norm2(wcol) * vec_norm2(gcol);
        REQUIRE(denom > 0.0);
        CHECK(std::fabs(vec_dot(wcol, gcol)) / denom < 1e-8);
    }
    CHECK(saw_big_sigma);
}

TEST_CASE("numeric_gradient matches a closed-form derivative") {
    // One linear layer into softmax: dE/dW = x^T (p - onehot), so the oracle
    // itself can be validated against an exact expression.
    ModelConfig cfg{1, 1, 2, NormMode::None};
    NetworkParams p;
    p.dims = {1, 2};
    p.weights = {Matrix(1, 2)};
    p.weights[0](0, 0) = 0.7;
    p.weights[0](0, 1) = -0.3;
    Matrix X(1, 1);
    X(0, 0) = 1.3;
    std::vector<int> labels = {0};

    const ForwardCache cache = forward(p, cfg, X, RunMode::Train);
    const Gradients numeric = numeric_gradient(p, cfg, X, labels, 1.0, 1e-5);
    const double p0 = cache.probs(0, 0);
    CHECK(numeric.w[0](0, 0) == doctest::Approx(1.3 * (p0 - 1.0)).epsilon(1e-9));
    CHECK(numeric.w[0](0, 1) == doctest::Approx(1.3 * (1.0 - p0)).epsilon(1e-9));

    CHECK_THROWS_AS(numeric_gradient(p, cfg, X, labels, 1.0, 0.0), Error);
}

TEST_CASE("relu self-similarity propagates scale through an unnormalized layer") {
    NetFixture f = make_safe_net(41, 2, {4}, 3, 2, 5, NormMode::None, 1.0);
    const ForwardCache base = forward(f.params, f.config, f.X, RunMode::Train);
    for (double c : {0.0, 0.25, 1.0, 3.0, 117.0}) {
        NetworkParams scaled = f.params;
        for (double& v : scaled.weights[0].flat()) v *= c;
        const ForwardCache out = forward(scaled, f.config, f.X, RunMode::Train);
        for (std::size_t b = 0; b < out.z[1].rows(); ++b)
            for (std::size_t j = 0; j < out.z[1].cols(); ++j)
                CHECK(out.z[1](b, j) == doctest::Approx(c * base.z[1](b, j)).epsilon(1e-12));
    }
}

TEST_CASE("eval mode uses running statistics") {
    NetFixture f = make_safe_net(51, 2, {4}, 3, 2, 6, NormMode::CapNorm, 1.0);
    ForwardCache train_cache = forward(f.params, f.config, f.X, RunMode::Train);
    // Run the running averages to convergence on the same batch.
    for (int i = 0; i < 4000; ++i) update_running_stats(f.params, train_cache, 0.01);
    const ForwardCache eval_cache = forward(f.params, f.config, f.X, RunMode::Eval);
    for (std::size_t b = 0; b < f.X.rows(); ++b)
        for (std::size_t j = 0; j < eval_cache.probs.cols(); ++j)
            CHECK(eval_cache.probs(b, j) ==
                  doctest::Approx(train_cache.probs(b, j)).epsilon(1e-6));

    // backward refuses eval caches.
    CHECK_THROWS_AS(backward(f.params, f.config, eval_cache, f.labels, 1.0), Error);
}

TEST_CASE("backward rejects a cache that no longer matches the params") {
    NetFixture f = make_safe_net(61, 2, {4}, 3, 2, 5, NormMode::CapNorm, 1.0);
    const ForwardCache cache = forward(f.params, f.config, f.X, RunMode::Train);
    Rng rng(62);
    add_unit(f.params, f.config, 1, rng); // params drift after the forward pass
    CHECK_THROWS_AS(backward(f.params, f.config, cache, f.labels, 1.0), Error);
}
