#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <vector>

#include "tsadapt/rng.hpp"

using tsadapt::num::glorot_uniform;
using tsadapt::num::Matrix;
using tsadapt::num::Rng;

TEST_CASE("identical seeds give bit-identical streams") {
    Rng a(123456789ull), b(123456789ull);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    Rng c(123456790ull);
    Rng d(123456789ull);
    bool any_diff = false;
    for (int i = 0; i < 10; ++i) any_diff |= (c.next_u64() != d.next_u64());
    CHECK(any_diff);
}

TEST_CASE("split children are independent of the parent and each other") {
    Rng parent(42);
    Rng c1 = parent.split(1);
    Rng c2 = parent.split(2);
    CHECK(c1.seed() != c2.seed());
    CHECK(c1.seed() != parent.seed());
    // split is const: parent stream unaffected by deriving children.
    Rng reference(42);
    CHECK(parent.next_u64() == reference.next_u64());
    // Same key always derives the same child.
    CHECK(Rng(42).split(7).seed() == Rng(42).split(7).seed());
}

TEST_CASE("a thousand split streams start pairwise distinct") {
    Rng parent(7);
    std::set<std::uint64_t> firsts;
    for (std::uint64_t k = 0; k < 1000; ++k) {
        Rng child = parent.split(k);
        firsts.insert(child.next_u64());
    }
    CHECK(firsts.size() == 1000);
}

TEST_CASE("next_double stays in [0, 1) and uniform respects bounds") {
    Rng rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.next_double();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        const double v = rng.uniform(-3.0, -1.0);
        CHECK(v >= -3.0);
        CHECK(v < -1.0);
    }
}

TEST_CASE("normal draws have standard moments at 1e5 samples") {
    Rng rng(2718);
    const int n = 100000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sq += z * z;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    CHECK(std::fabs(mean) < 0.02);
    CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("glorot_uniform bounds, mean, and determinism") {
    const std::size_t fan_in = 100, fan_out = 150;
    const double g = std::sqrt(6.0 / (fan_in + fan_out));
    Rng rng(99);
    Matrix w = glorot_uniform(rng, fan_in, fan_out);
    CHECK(w.rows() == fan_in);
    CHECK(w.cols() == fan_out);
    double sum = 0.0;
    for (double v : w.data()) {
        CHECK(v >= -g);
        CHECK(v <= g);
        sum += v;
    }
    // 15000 draws: the sample mean of U(-g, g) concentrates well inside 0.01 * g.
    CHECK(std::fabs(sum / static_cast<double>(w.size())) < 0.01 * g);

    Rng rng2(99);
    Matrix w2 = glorot_uniform(rng2, fan_in, fan_out);
    CHECK((w - w2).max_abs() == 0.0);
}

TEST_CASE("glorot mean over 1e5 draws is near zero") {
    Rng rng(4);
    Matrix w = glorot_uniform(rng, 250, 400);
    const double g = std::sqrt(6.0 / (250 + 400));
    double sum = 0.0;
    for (double v : w.data()) sum += v;
    CHECK(std::fabs(sum / static_cast<double>(w.size())) < 0.01 * g);
}
