#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "tsadapt/rng.hpp"
#include "tsadapt/tape.hpp"

using tsadapt::num::Matrix;
using tsadapt::num::Rng;
using tsadapt::optim::Tape;

namespace {

using Builder = std::function<Tape::NodeId(Tape&, const std::vector<Tape::NodeId>&)>;

struct GraphEval {
    double value = 0.0;
    std::vector<Matrix> grads;
};

GraphEval eval_graph(const std::vector<Matrix>& leaves, const Builder& build, bool want_grads) {
    Tape t;
    std::vector<Tape::NodeId> ids;
    ids.reserve(leaves.size());
    for (const auto& m : leaves) ids.push_back(t.leaf(m));
    const Tape::NodeId loss = build(t, ids);
    GraphEval ev;
    ev.value = t.value(loss)(0, 0);
    if (want_grads) {
        t.backward(loss);
        for (auto id : ids) ev.grads.push_back(t.grad(id));
    }
    return ev;
}

/// Central differences with a fresh tape per probe; relative error against the
/// analytic gradient with an absolute floor for near-zero entries.
void check_gradients(std::vector<Matrix> leaves, const Builder& build, double tol = 1e-4) {
    const GraphEval base = eval_graph(leaves, build, true);
    const double h = 1e-5;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        for (std::size_t r = 0; r < leaves[li].rows(); ++r) {
            for (std::size_t c = 0; c < leaves[li].cols(); ++c) {
                const double orig = leaves[li](r, c);
                leaves[li](r, c) = orig + h;
                const double up = eval_graph(leaves, build, false).value;
                leaves[li](r, c) = orig - h;
                const double dn = eval_graph(leaves, build, false).value;
                leaves[li](r, c) = orig;
                const double fd = (up - dn) / (2.0 * h);
                const double an = base.grads[li](r, c);
                const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
                CHECK(std::abs(fd - an) / scale < tol);
            }
        }
    }
}

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) m(i, j) = rng.uniform(lo, hi);
    }
    return m;
}

}  // namespace

TEST_CASE("forward values of the primitives") {
    Tape t;
    const auto a = t.leaf(Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}}));
    const auto b = t.leaf(Matrix::from_rows({{5.0, 6.0}, {7.0, 8.0}}));

    CHECK(t.value(t.matmul(a, b))(0, 0) == doctest::Approx(19.0));
    CHECK(t.value(t.matmul(a, b))(1, 1) == doctest::Approx(50.0));
    CHECK(t.value(t.add(a, b))(0, 1) == doctest::Approx(8.0));
    CHECK(t.value(t.sub(b, a))(1, 0) == doctest::Approx(4.0));
    CHECK(t.value(t.mul(a, b))(1, 1) == doctest::Approx(32.0));
    CHECK(t.value(t.scale(a, -2.0))(0, 0) == doctest::Approx(-2.0));
    CHECK(t.value(t.add_scalar(a, 0.5))(1, 1) == doctest::Approx(4.5));
    CHECK(t.value(t.sum(a))(0, 0) == doctest::Approx(10.0));
    CHECK(t.value(t.transpose(a))(0, 1) == doctest::Approx(3.0));

    const auto row = t.leaf(Matrix::from_rows({{10.0, 20.0}}));
    CHECK(t.value(t.add_row_broadcast(a, row))(1, 1) == doctest::Approx(24.0));
    CHECK(t.value(t.mul_row_broadcast(a, row))(1, 0) == doctest::Approx(30.0));

    const auto col = t.leaf(Matrix(2, 1, {10.0, 20.0}));
    CHECK(t.value(t.add_col_broadcast(a, col))(1, 0) == doctest::Approx(23.0));

    const auto neg = t.leaf(Matrix::from_rows({{-1.0, 2.0}}));
    CHECK(t.value(t.relu(neg))(0, 0) == doctest::Approx(0.0));
    CHECK(t.value(t.relu(neg))(0, 1) == doctest::Approx(2.0));
    CHECK(t.value(t.clamp(neg, -0.5, 1.5))(0, 0) == doctest::Approx(-0.5));
    CHECK(t.value(t.clamp(neg, -0.5, 1.5))(0, 1) == doctest::Approx(1.5));
    CHECK(t.value(t.exp(neg))(0, 1) == doctest::Approx(std::exp(2.0)));
}

TEST_CASE("gaussian_sample forward is mu + exp(lv/2) * eps") {
    Tape t;
    const auto mu = t.leaf(Matrix::from_rows({{1.0, -2.0}}));
    const auto lv = t.leaf(Matrix::from_rows({{0.0, std::log(4.0)}}));
    const auto z = t.gaussian_sample(mu, lv, Matrix::from_rows({{0.5, -1.0}}));
    CHECK(t.value(z)(0, 0) == doctest::Approx(1.5));
    CHECK(t.value(z)(0, 1) == doctest::Approx(-4.0));
}

TEST_CASE("least-squares gradient matches the analytic formula") {
    Rng rng(42);
    const Matrix x = random_matrix(rng, 6, 3);
    const Matrix y = random_matrix(rng, 6, 2);
    const Matrix w = random_matrix(rng, 3, 2);

    Tape t;
    const auto xw = t.leaf(x);
    const auto yw = t.leaf(y);
    const auto ww = t.leaf(w);
    const auto res = t.sub(yw, t.matmul(xw, ww));
    const auto loss = t.sum(t.mul(res, res));
    t.backward(loss);

    // d/dW ||Y - XW||_F^2 = -2 X^T (Y - XW)
    const Matrix expected =
        tsadapt::num::matmul(x.transpose(), y - tsadapt::num::matmul(x, w)) * -2.0;
    const Matrix got = t.grad(ww);
    CHECK((got - expected).max_abs() < 1e-12);
}

TEST_CASE("finite differences confirm gradients of composite graphs") {
    Rng rng(7);

    SUBCASE("matmul, mul, sum") {
        check_gradients({random_matrix(rng, 3, 4), random_matrix(rng, 4, 2),
                         random_matrix(rng, 3, 2)},
                        [](Tape& t, const std::vector<Tape::NodeId>& v) {
                            return t.sum(t.mul(t.matmul(v[0], v[1]), v[2]));
                        });
    }
    SUBCASE("broadcasts and scale") {
        check_gradients({random_matrix(rng, 3, 4), random_matrix(rng, 1, 4),
                         random_matrix(rng, 3, 1), random_matrix(rng, 1, 4, 0.5, 1.5)},
                        [](Tape& t, const std::vector<Tape::NodeId>& v) {
                            auto m = t.add_row_broadcast(v[0], v[1]);
                            m = t.add_col_broadcast(m, v[2]);
                            m = t.mul_row_broadcast(m, v[3]);
                            return t.sum(t.scale(m, 0.7));
                        });
    }
    SUBCASE("relu and exp away from the kink") {
        Matrix a = random_matrix(rng, 4, 3);
        for (auto& v : a.data()) {
            if (std::abs(v) < 0.05) v = 0.2;
        }
        check_gradients({a}, [](Tape& t, const std::vector<Tape::NodeId>& v) {
            return t.sum(t.exp(t.scale(t.relu(v[0]), 0.3)));
        });
    }
    SUBCASE("clamp passes gradients only strictly inside") {
        // Entries at +-2 are clamped to +-1: zero gradient both ways.
        check_gradients({Matrix::from_rows({{0.3, -2.0}, {2.0, -0.4}})},
                        [](Tape& t, const std::vector<Tape::NodeId>& v) {
                            return t.sum(t.mul(t.clamp(v[0], -1.0, 1.0), v[0]));
                        });
    }
    SUBCASE("transpose used twice on one leaf") {
        check_gradients({random_matrix(rng, 3, 4), random_matrix(rng, 3, 4)},
                        [](Tape& t, const std::vector<Tape::NodeId>& v) {
                            auto prod = t.matmul(t.transpose(v[0]), v[1]);
                            return t.sum(t.mul(prod, prod));
                        });
    }
    SUBCASE("reparameterized sample") {
        const Matrix eps = random_matrix(rng, 2, 3);
        check_gradients({random_matrix(rng, 2, 3), random_matrix(rng, 2, 3)},
                        [eps](Tape& t, const std::vector<Tape::NodeId>& v) {
                            auto z = t.gaussian_sample(v[0], v[1], eps);
                            return t.sum(t.mul(z, z));
                        });
    }
    SUBCASE("add_scalar and subtraction") {
        check_gradients({random_matrix(rng, 2, 2), random_matrix(rng, 2, 2)},
                        [](Tape& t, const std::vector<Tape::NodeId>& v) {
                            auto d = t.sub(v[0], v[1]);
                            return t.add_scalar(t.sum(t.mul(d, d)), 3.25);
                        });
    }
}

TEST_CASE("gradient accumulates over shared subexpressions") {
    Tape t;
    const auto a = t.leaf(Matrix::from_rows({{2.0}}));
    const auto s = t.add(a, a);           // 2a
    const auto loss = t.sum(t.mul(s, s));  // 4a^2, d/da = 8a = 16
    t.backward(loss);
    CHECK(t.grad(a)(0, 0) == doctest::Approx(16.0));
}

TEST_CASE("contract violations throw") {
    Tape t;
    const auto a = t.leaf(Matrix(2, 2, 1.0));
    const auto b = t.leaf(Matrix(2, 3, 1.0));
    CHECK_THROWS_WITH_AS(t.add(a, b), doctest::Contains("shape mismatch"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(t.backward(a), doctest::Contains("loss must be 1x1"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(t.grad(a), doctest::Contains("before backward"), std::logic_error);
    CHECK_THROWS_AS(t.value(99999), std::invalid_argument);
    CHECK_THROWS_WITH_AS(t.clamp(a, 2.0, 1.0), doctest::Contains("lo must not exceed hi"),
                         std::invalid_argument);

    const auto loss = t.sum(a);
    t.backward(loss);
    CHECK_THROWS_WITH_AS(t.backward(loss), doctest::Contains("already ran"), std::logic_error);
}
