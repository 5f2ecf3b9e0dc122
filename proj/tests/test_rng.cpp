#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "npnet/rng.hpp"

using namespace npnet;

TEST_CASE("rng streams are deterministic and state round-trips") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

    const auto state = a.state();
    std::vector<std::uint64_t> tail;
    for (int i = 0; i < 16; ++i) tail.push_back(a.next());
    Rng c;
    c.set_state(state);
    for (int i = 0; i < 16; ++i) CHECK(c.next() == tail[static_cast<std::size_t>(i)]);
}

TEST_CASE("bounded draws stay in range and cover values") {
    Rng rng(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t v = rng.bounded(10);
        CHECK(v < 10);
        seen.insert(v);
    }
    CHECK(seen.size() == 10);
}

TEST_CASE("normal draws have roughly the requested moments") {
    Rng rng(123);
    const int n = 20000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal(2.0, 3.0);
        sum += x;
        sum_sq += x * x;
    }
    const double mean = sum / n;
    const double var = sum_sq / n - mean * mean;
    CHECK(std::fabs(mean - 2.0) < 0.1);
    CHECK(std::fabs(var - 9.0) < 0.4);
}

TEST_CASE("mix_seed separates streams") {
    CHECK(mix_seed(1, 1) != mix_seed(1, 2));
    CHECK(mix_seed(1, 1) != mix_seed(2, 1));
}
