#include <doctest.h>

#include <cmath>
#include <vector>

#include "npnet/optimizer.hpp"
#include "npnet/regularizer.hpp"
#include "test_util.hpp"

using namespace npnet;
using namespace npnet_test;

namespace {

Gradients random_grads_like(const NetworkParams& p, Rng& rng, double scale = 1.0) {
    Gradients g = zero_gradients_like(p);
    for (auto& m : g.w)
        for (double& v : m.flat()) v = scale * rng.normal();
    return g;
}

double col_cosine(const Matrix& a, std::size_t j, const Matrix& b, std::size_t k) {
    std::vector<double> x, y;
    a.get_col(j, x);
    b.get_col(k, y);
    const double denom = vec_norm2(x) * vec_norm2(y);
    if (denom == 0.0) return 0.0;
    return vec_dot(x, y) / denom;
}

} // namespace

TEST_CASE("decompose_radial_angular hand-picked cases") {
    std::vector<double> r(2), phi(2);

    decompose_radial_angular(std::vector<double>{1.0, 0.0}, std::vector<double>{2.0, 3.0}, r, phi);
    CHECK(r[0] == doctest::Approx(2.0));
    CHECK(r[1] == doctest::Approx(0.0));
    CHECK(phi[0] == doctest::Approx(0.0));
    CHECK(phi[1] == doctest::Approx(3.0));

    decompose_radial_angular(std::vector<double>{1.0, 1.0}, std::vector<double>{1.0, 0.0}, r, phi);
    CHECK(r[0] == doctest::Approx(0.5));
    CHECK(r[1] == doctest::Approx(0.5));
    CHECK(phi[0] == doctest::Approx(0.5));
    CHECK(phi[1] == doctest::Approx(-0.5));

    decompose_radial_angular(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 2.0}, r, phi);
    CHECK(r[0] == 0.0);
    CHECK(r[1] == 0.0);
    CHECK(phi[0] == 1.0);
    CHECK(phi[1] == 2.0);
}

TEST_CASE("rotate hand-picked cases") {
    std::vector<double> w = {2.0, 0.0};
    rotate(w, std::vector<double>{0.0, 1.0}, std::numbers::pi / 2.0);
    CHECK(w[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(2.0));

    std::vector<double> w2 = {0.7, -0.3};
    const std::vector<double> copy = w2;
    std::vector<double> dir = {0.3 / std::hypot(0.7, 0.3), 0.7 / std::hypot(0.7, 0.3)};
    rotate(w2, dir, 0.0);
    CHECK(w2 == copy);

    std::vector<double> w3 = {1.0, 0.0};
    rotate(w3, std::vector<double>{0.0, 1.0}, std::numbers::pi / 4.0);
    CHECK(w3[0] == doctest::Approx(std::sqrt(2.0) / 2.0));
    CHECK(w3[1] == doctest::Approx(std::sqrt(2.0) / 2.0));

    std::vector<double> zero = {0.0, 0.0};
    rotate(zero, std::vector<double>{1.0, 0.0}, 1.0); // no-op
    CHECK(zero[0] == 0.0);

    std::vector<double> w4 = {1.0, 1.0};
    CHECK_THROWS_AS(rotate(w4, std::vector<double>{1.0, 0.0}, 0.5), Error);
}

TEST_CASE("geometry over 1000 random steps: norms, direction, reconstruction") {
    Rng rng(17);
    std::vector<double> w(6);
    for (auto& v : w) v = rng.normal();
    for (int step = 0; step < 1000; ++step) {
        std::vector<double> g(6), r(6), phi(6);
        for (auto& v : g) v = rng.normal();
        decompose_radial_angular(w, g, r, phi);

        // g = r + phi to 1e-12.
        for (std::size_t i = 0; i < g.size(); ++i)
            CHECK(std::fabs(g[i] - (r[i] + phi[i])) <= 1e-12);

        // Radial move preserves direction up to sign.
        std::vector<double> radial = w;
        const double alpha_r = 0.05;
        for (std::size_t i = 0; i < w.size(); ++i) radial[i] = w[i] - alpha_r * r[i];
        const double cos_rad =
            vec_dot(w, radial) / (vec_norm2(w) * vec_norm2(radial));
        CHECK(std::fabs(std::fabs(cos_rad) - 1.0) <= 1e-9);

        // Angular move preserves the norm, drift <= 1e-9 per step.
        const double pn = vec_norm2(phi);
        if (pn > 0.0) {
            std::vector<double> dir(6);
            for (std::size_t i = 0; i < 6; ++i) dir[i] = -phi[i] / pn;
            const double before = vec_norm2(w);
            rotate(w, dir, rng.uniform01() * 1.5);
            const double after = vec_norm2(w);
            CHECK(std::fabs(after - before) / before <= 1e-9);
        }
    }
}

TEST_CASE("adarad_step: lambda 0 and gradient parallel to w moves only radially") {
    ModelConfig cfg{1, 2, 1, NormMode::None};
    NetworkParams p;
    p.dims = {2, 1};
    p.weights = {Matrix(2, 1)};
    p.weights[0](0, 0) = 0.6;
    p.weights[0](1, 0) = 0.8;
    AdaRadState state = AdaRadState::make(p);
    Gradients g = zero_gradients_like(p);
    g.w[0](0, 0) = 1.2; // parallel to w
    g.w[0](1, 0) = 1.6;
    AdaRadHyper hyper;
    hyper.alpha_r = 0.1;
    hyper.alpha_phi = 30.0;
    hyper.lambda = 0.0;
    hyper.nu = 0;
    Rng rng(18);
    const std::vector<double> before = {0.6, 0.8};
    adarad_step(p, cfg, state, g, hyper, 1.0, 1, rng);
    std::vector<double> after;
    p.weights[0].get_col(0, after);
    const double cosine = vec_dot(before, after) / (vec_norm2(before) * vec_norm2(after));
    CHECK(std::fabs(std::fabs(cosine) - 1.0) <= 1e-9);
    // Radial shift: length drops by alpha_r * ||g|| since g is parallel.
    CHECK(vec_norm2(after) == doctest::Approx(1.0 - 0.1 * 2.0).epsilon(1e-9));
}

TEST_CASE("adarad_step: the unit holding the global max sees phi_adj ~ phi") {
    // Single fan-in, fresh state: after the first update this unit IS the
    // global max, so phi_adj = (X/(X+eps)) phi with X = ||phi||.
    ModelConfig cfg{1, 2, 1, NormMode::None};
    NetworkParams p;
    p.dims = {2, 1};
    p.weights = {Matrix(2, 1)};
    p.weights[0](0, 0) = 0.6;
    p.weights[0](1, 0) = 0.8;
    AdaRadState state = AdaRadState::make(p);
    Gradients g = zero_gradients_like(p);
    g.w[0](0, 0) = 0.4;
    g.w[0](1, 0) = -0.3;
    AdaRadHyper hyper;
    hyper.alpha_r = 0.05;
    hyper.alpha_phi = 2.0;
    hyper.lambda = 0.0;
    hyper.nu = 0;
    hyper.epsilon = 1e-8;
    hyper.beta_quad = 0.005;

    // Independent recomputation of the whole column update.
    std::vector<double> w = {0.6, 0.8}, r(2), phi(2);
    decompose_radial_angular(w, g.w[0].flat(), r, phi);
    const double pn = vec_norm2(phi);
    const double coef = pn / (pn + hyper.epsilon); // phi_max/c_max == phi_bar/c here
    std::vector<double> expect = w;
    for (int i = 0; i < 2; ++i) expect[static_cast<std::size_t>(i)] -= hyper.alpha_r * r[static_cast<std::size_t>(i)];
    std::vector<double> dir(2);
    for (int i = 0; i < 2; ++i) dir[static_cast<std::size_t>(i)] = -coef * phi[static_cast<std::size_t>(i)] / (coef * pn);
    rotate(expect, dir, hyper.alpha_phi * coef * pn);

    Rng rng(19);
    adarad_step(p, cfg, state, g, hyper, 1.0, 1, rng);
    std::vector<double> got;
    p.weights[0].get_col(0, got);
    CHECK(got[0] == doctest::Approx(expect[0]).epsilon(1e-12));
    CHECK(got[1] == doctest::Approx(expect[1]).epsilon(1e-12));
    CHECK(state.phi_max == doctest::Approx(hyper.beta_quad * pn * pn));
    CHECK(state.c_max == doctest::Approx(hyper.beta_quad));
}

TEST_CASE("adarad: shrinkage over an epoch of partitioning batches totals alpha_r*lambda") {
    // One unit with zero gradient: only shrinkage acts on it.
    ModelConfig cfg{2, 2, 2, NormMode::CapNorm};
    NetworkParams p;
    p.dims = {2, 1, 2};
    p.weights = {Matrix(2, 1), Matrix(1, 2)};
    p.weights[0](0, 0) = 0.6;
    p.weights[0](1, 0) = 0.8;
    p.run_mean = {std::vector<double>(1, 0.0)};
    p.run_div = {std::vector<double>(1, 1.0)};
    AdaRadState state = AdaRadState::make(p);
    AdaRadHyper hyper;
    hyper.alpha_r = 2.0;
    hyper.lambda = 0.05;
    hyper.nu = 0;
    Rng rng(20);
    const Gradients g = zero_gradients_like(p);
    // Give an output-layer column a known length too: it must shrink by the
    // same budget but never be removed (the l < L guard).
    p.weights[1](0, 0) = 0.5;
    const double fractions[] = {0.4, 0.4, 0.2};
    std::uint64_t t = 0;
    for (double f : fractions) adarad_step(p, cfg, state, g, hyper, f, ++t, rng);
    std::vector<double> w;
    p.weights[0].get_col(0, w);
    CHECK(vec_norm2(w) == doctest::Approx(1.0 - 2.0 * 0.05).epsilon(1e-12));
    CHECK(p.dims[2] == 2);
    p.weights[1].get_col(0, w);
    CHECK(vec_norm2(w) == doctest::Approx(0.5 - 2.0 * 0.05).epsilon(1e-12));
    // The other output column was already zero: shrunk in place, not removed.
    p.weights[1].get_col(1, w);
    CHECK(vec_norm2(w) == 0.0);
}

TEST_CASE("adarad with lambda=0 and nu=0 never changes dimensions") {
    NetFixture f = make_safe_net(301, 3, {4, 3}, 3, 2, 5, NormMode::CapNorm, 1.0);
    AdaRadState state = AdaRadState::make(f.params);
    AdaRadHyper hyper;
    hyper.alpha_r = 0.01;
    hyper.alpha_phi = 1.0;
    hyper.lambda = 0.0;
    hyper.nu = 0;
    Rng rng(21);
    const auto dims = f.params.dims;
    double prev_phi_max = 0.0, prev_c_max = 0.0;
    for (int i = 0; i < 50; ++i) {
        Gradients g = random_grads_like(f.params, rng, 0.3);
        const StepReport rep = adarad_step(f.params, f.config, state, g, hyper, 1.0,
                                           static_cast<std::uint64_t>(i + 1), rng);
        CHECK(rep.units_added == 0);
        CHECK(rep.units_removed == 0);
        CHECK(f.params.dims == dims);
        CHECK(state.phi_max >= prev_phi_max); // monotone maxima
        CHECK(state.c_max >= prev_c_max);
        prev_phi_max = state.phi_max;
        prev_c_max = state.c_max;
    }
}

TEST_CASE("adarad additions fire on schedule and removals report") {
    NetFixture f = make_safe_net(311, 3, {3, 3}, 3, 2, 5, NormMode::CapNorm, 1.0);
    AdaRadState state = AdaRadState::make(f.params);
    UnitLedger ledger;
    ledger.init_existing(f.params);
    AdaRadHyper hyper;
    hyper.alpha_r = 0.01;
    hyper.alpha_phi = 1.0;
    hyper.lambda = 0.0;
    hyper.nu = 2;
    hyper.nu_freq = 3;
    Rng rng(22);
    std::size_t added = 0;
    for (std::uint64_t t = 1; t <= 6; ++t) {
        const Gradients g = zero_gradients_like(f.params);
        const StepReport rep = adarad_step(f.params, f.config, state, g, hyper, 1.0, t, rng,
                                           true, &ledger, static_cast<std::int64_t>(t));
        added += rep.units_added;
        if (t % 3 == 0)
            CHECK(rep.units_added == 4); // nu=2 per hidden layer, 2 hidden layers
        else
            CHECK(rep.units_added == 0);
    }
    CHECK(added == 8);
    CHECK(f.params.dims[1] == 3 + 4);
    CHECK(f.params.dims[2] == 3 + 4);
    f.params.check_consistent(f.config);

    // Additions disabled: nothing fires even when t hits the schedule.
    const Gradients g9 = zero_gradients_like(f.params);
    const StepReport rep =
        adarad_step(f.params, f.config, state, g9, hyper, 1.0, 9, rng, false, &ledger, 9);
    CHECK(rep.units_added == 0);
}

TEST_CASE("adaradm with beta_arith = 1 reproduces adarad bit for bit") {
    NetFixture f = make_safe_net(321, 3, {4, 3}, 3, 2, 5, NormMode::CapNorm, 1.0);
    NetworkParams pa = f.params;
    NetworkParams pb = f.params;
    AdaRadState sa = AdaRadState::make(pa);
    AdaRadMState sb = AdaRadMState::make(pb);
    AdaRadHyper hyper;
    hyper.alpha_r = 0.02;
    hyper.alpha_phi = 3.0;
    hyper.lambda = 0.01;
    hyper.beta_arith = 1.0;
    hyper.nu = 1;
    hyper.nu_freq = 4;
    Rng rng_a(23), rng_b(23), grad_rng(24);
    for (std::uint64_t t = 1; t <= 40; ++t) {
        Gradients g = random_grads_like(pa, grad_rng, 0.5);
        adarad_step(pa, f.config, sa, g, hyper, 0.5, t, rng_a);
        adaradm_step(pb, f.config, sb, g, hyper, 0.5, t, rng_b);
        REQUIRE(pa.dims == pb.dims);
        for (std::size_t l = 0; l < pa.weights.size(); ++l) REQUIRE(pa.weights[l] == pb.weights[l]);
    }
}

TEST_CASE("adaradm keeps momentum columns orthogonal over 100 random steps") {
    NetFixture f = make_safe_net(331, 3, {4, 3}, 3, 2, 5, NormMode::CapNorm, 1.0);
    AdaRadMState state = AdaRadMState::make(f.params);
    AdaRadHyper hyper;
    hyper.alpha_r = 0.02;
    hyper.alpha_phi = 3.0;
    hyper.lambda = 0.005;
    hyper.beta_arith = 0.1;
    hyper.nu = 0;
    Rng rng(25), grad_rng(26);
    for (std::uint64_t t = 1; t <= 100; ++t) {
        Gradients g = random_grads_like(f.params, grad_rng, 0.5);
        adaradm_step(f.params, f.config, state, g, hyper, 1.0, t, rng);
        for (std::size_t l = 0; l < f.params.weights.size(); ++l)
            for (std::size_t j = 0; j < f.params.weights[l].cols(); ++j)
                CHECK(std::fabs(col_cosine(state.phi_tilde[l], j, f.params.weights[l], j)) < 1e-6);
    }
}

TEST_CASE("unit removal re-orthogonalizes downstream momentum columns") {
    NetFixture f = make_safe_net(341, 3, {4, 3}, 3, 2, 5, NormMode::CapNorm, 1.0);
    AdaRadMState state = AdaRadMState::make(f.params);
    // Fill momentum with junk that is NOT orthogonal.
    Rng rng(27);
    for (auto& m : state.phi_tilde)
        for (double& v : m.flat()) v = rng.normal();

    remove_unit(f.params, f.config, 1, 2, &state);
    // Layer-2 momentum columns must now be orthogonal to the layer-2 fan-ins.
    for (std::size_t j = 0; j < f.params.weights[1].cols(); ++j)
        CHECK(std::fabs(col_cosine(state.phi_tilde[1], j, f.params.weights[1], j)) < 1e-10);
}

TEST_CASE("sgd_step basic updates and group shrink") {
    NetworkParams p;
    p.dims = {1, 2};
    p.weights = {Matrix(1, 2)};
    p.weights[0](0, 0) = 1.0;
    Gradients g = zero_gradients_like(p);
    g.w[0](0, 0) = 2.0;
    sgd_step(p, g, 0.1, 0.0);
    CHECK(p.weights[0](0, 0) == doctest::Approx(0.8));

    // Shrink at least as large as the post-step column norm zeroes it.
    NetworkParams q;
    q.dims = {2, 1};
    q.weights = {Matrix(2, 1)};
    q.weights[0](0, 0) = 0.3;
    q.weights[0](1, 0) = -0.4;
    Gradients gq = zero_gradients_like(q);
    sgd_step(q, gq, 0.1, 0.6);
    CHECK(q.weights[0](0, 0) == 0.0);
    CHECK(q.weights[0](1, 0) == 0.0);
}

TEST_CASE("rmsprop converges to sign steps under a constant gradient") {
    NetworkParams p;
    p.dims = {1, 2};
    p.weights = {Matrix(1, 2)};
    RmsPropState state = RmsPropState::make(p, 0.005, 1e-8);
    Gradients g = zero_gradients_like(p);
    g.w[0](0, 0) = 0.37;
    g.w[0](0, 1) = -0.02;
    const double alpha = 0.01;
    double prev0 = p.weights[0](0, 0);
    for (int i = 0; i < 4000; ++i) rmsprop_step(p, state, g, alpha);
    // After the cache converges to g^2, each step moves by alpha*sign(g).
    prev0 = p.weights[0](0, 0);
    const double prev1 = p.weights[0](0, 1);
    rmsprop_step(p, state, g, alpha);
    CHECK(p.weights[0](0, 0) - prev0 == doctest::Approx(-alpha).epsilon(1e-6));
    CHECK(p.weights[0](0, 1) - prev1 == doctest::Approx(alpha).epsilon(1e-6));
}

TEST_CASE("step functions reject shape drift") {
    NetFixture f = make_safe_net(351, 2, {3}, 3, 2, 5, NormMode::CapNorm, 1.0);
    AdaRadState state = AdaRadState::make(f.params);
    Gradients bad = zero_gradients_like(f.params);
    bad.w[0] = Matrix(2, 2);
    AdaRadHyper hyper;
    Rng rng(28);
    CHECK_THROWS_AS(adarad_step(f.params, f.config, state, bad, hyper, 1.0, 1, rng), Error);
    CHECK_THROWS_AS(sgd_step(f.params, bad, 0.1, 0.0), Error);
}
