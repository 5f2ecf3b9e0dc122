#include <doctest.h>

#include <cmath>
#include <vector>

#include "npnet/regularizer.hpp"
#include "test_util.hpp"

using namespace npnet;
using namespace npnet_test;

namespace {

NetworkParams single_layer(const Matrix& w) {
    NetworkParams p;
    p.dims = {w.rows(), w.cols()};
    p.weights = {w};
    return p;
}

} // namespace

TEST_CASE("omega on hand-picked columns") {
    Matrix w(2, 2);
    w(0, 0) = 3.0; w(1, 0) = 4.0; // column [3,4]
    const NetworkParams p = single_layer(w);

    CHECK(omega(p, RegConfig{0.5, 2, RegMode::FanIn}) == doctest::Approx(2.5)); // 0.5*(5+0)

    Matrix w1(2, 1);
    w1(0, 0) = 3.0; w1(1, 0) = -4.0;
    CHECK(omega(single_layer(w1), RegConfig{1.0, 1, RegMode::FanIn}) == doctest::Approx(7.0));

    RegConfig bad{1.0, 3, RegMode::FanIn};
    CHECK_THROWS_AS(omega(p, bad), Error);
}

TEST_CASE("fan-in vs fan-out agree with an independent column/row recomputation") {
    Rng rng(5);
    Matrix w = random_matrix(4, 7, rng);
    const NetworkParams p = single_layer(w);
    const double lambda = 0.3;

    double by_cols = 0.0;
    for (std::size_t j = 0; j < w.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.rows(); ++i) acc += w(i, j) * w(i, j);
        by_cols += std::sqrt(acc);
    }
    double by_rows = 0.0;
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < w.cols(); ++j) acc += w(i, j) * w(i, j);
        by_rows += std::sqrt(acc);
    }
    CHECK(omega(p, RegConfig{lambda, 2, RegMode::FanIn}) ==
          doctest::Approx(lambda * by_cols).epsilon(1e-12));
    CHECK(omega(p, RegConfig{lambda, 2, RegMode::FanOut}) ==
          doctest::Approx(lambda * by_rows).epsilon(1e-12));
}

TEST_CASE("omega is absolutely homogeneous of degree 1") {
    Rng rng(6);
    NetFixture f = make_safe_net(61, 3, {4, 3}, 3, 2, 5, NormMode::None, 1.0);
    const RegConfig reg{0.7, 2, RegMode::FanIn};
    const double base = omega(f.params, reg);
    for (double c : {-2.0, 0.5, 3.0}) {
        NetworkParams scaled = f.params;
        for (auto& w : scaled.weights)
            for (double& v : w.flat()) v *= c;
        CHECK(omega(scaled, reg) == doctest::Approx(std::fabs(c) * base).epsilon(1e-12));
    }
}

TEST_CASE("objective composes the dataset loss with omega") {
    // Zero weights, 10 classes: ln 10 regardless of lambda.
    ModelConfig cfg{2, 3, 10, NormMode::CapNorm};
    NetworkParams p;
    p.dims = {3, 4, 10};
    p.weights = {Matrix(3, 4), Matrix(4, 10)};
    p.run_mean = {std::vector<double>(4, 0.0)};
    p.run_div = {std::vector<double>(4, 1.0)};
    Rng rng(7);
    Matrix X = random_matrix(6, 3, rng);
    std::vector<int> y = random_labels(6, 10, rng);
    CHECK(objective(p, cfg, RegConfig{123.0, 2, RegMode::FanIn}, X, y) ==
          doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // lambda = 0 equals the mean cross-entropy alone; small net cross-check.
    NetFixture f = make_safe_net(71, 2, {4}, 3, 3, 5, NormMode::CapNorm, 1.0);
    const ForwardCache cache = forward(f.params, f.config, f.X, RunMode::Train);
    const double ce = loss_and_error(cache, f.labels).first;
    CHECK(objective(f.params, f.config, RegConfig{0.0, 2, RegMode::FanIn}, f.X, f.labels) ==
          doctest::Approx(ce).epsilon(1e-12));
    const RegConfig reg{0.9, 2, RegMode::FanIn};
    CHECK(objective(f.params, f.config, reg, f.X, f.labels) ==
          doctest::Approx(ce + omega(f.params, reg)).epsilon(1e-12));
}

TEST_CASE("shrink on hand-picked vectors") {
    std::vector<double> v = {3.0, 4.0};
    shrink(v, 1.0);
    CHECK(v[0] == doctest::Approx(2.4).epsilon(1e-15));
    CHECK(v[1] == doctest::Approx(3.2).epsilon(1e-15));

    std::vector<double> small = {0.3, 0.4};
    shrink(small, 1.0);
    CHECK(small[0] == 0.0);
    CHECK(small[1] == 0.0);

    std::vector<double> same = {1.25, -7.5, 0.125};
    const std::vector<double> copy = same;
    shrink(same, 0.0);
    CHECK(same == copy);

    std::vector<double> neg = {1.0};
    CHECK_THROWS_AS(shrink(neg, -0.5), Error);
}

TEST_CASE("shrink norm identity and componentwise contraction") {
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> v(5);
        for (auto& x : v) x = 2.0 * rng.normal();
        const std::vector<double> orig = v;
        const double norm = vec_norm2(orig);
        const double s = rng.uniform01() * 1.5 * norm;
        shrink(v, s);
        CHECK(vec_norm2(v) == doctest::Approx(std::max(0.0, norm - s)).epsilon(1e-12));
        for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::fabs(v[i]) <= std::fabs(orig[i]));
    }
}

TEST_CASE("shrink minimizes the proximal objective on a 2-D grid") {
    const std::vector<double> v = {0.8, -1.1};
    const double s = 0.6;
    std::vector<double> prox = v;
    shrink(prox, s);
    const auto objective_at = [&](double a, double b) {
        const double half_sq = 0.5 * ((a - v[0]) * (a - v[0]) + (b - v[1]) * (b - v[1]));
        return half_sq + s * std::sqrt(a * a + b * b);
    };
    const double prox_val = objective_at(prox[0], prox[1]);
    double grid_min = 1e300;
    for (double a = -2.0; a <= 2.0; a += 0.01)
        for (double b = -2.0; b <= 2.0; b += 0.01) grid_min = std::min(grid_min, objective_at(a, b));
    CHECK(prox_val <= grid_min + 1e-9);
}
