#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "tsadapt/forecaster.hpp"
#include "tsadapt/rng.hpp"

using tsadapt::fm::apply_channel_independent;
using tsadapt::fm::LinearFm;
using tsadapt::fm::MlpFm;
using tsadapt::fm::random_linear_fm;
using tsadapt::num::Matrix;
using tsadapt::num::Rng;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c, 0.0);
    for (auto& v : m.data()) v = rng.uniform(-1.0, 1.0);
    return m;
}

}  // namespace

TEST_CASE("zero weights with constant bias forecast the bias everywhere") {
    const std::size_t L = 4, H = 3, D = 5;
    LinearFm f(Matrix(L, H, 0.0), Matrix(H, 1, 2.5));
    Rng rng(1);
    const Matrix out = apply_channel_independent(f, random_matrix(rng, L, D));
    REQUIRE(out.rows() == H);
    REQUIRE(out.cols() == D);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t d = 0; d < D; ++d) CHECK(out(h, d) == doctest::Approx(2.5));
    }
}

TEST_CASE("a last-row selector gives the persistence forecast") {
    const std::size_t L = 6, H = 2;
    Matrix w(L, H, 0.0);
    w(L - 1, 0) = 1.0;
    w(L - 1, 1) = 1.0;
    LinearFm f(w, Matrix(H, 1, 0.0));
    Rng rng(2);
    const Matrix x = random_matrix(rng, L, 3);
    const Matrix out = apply_channel_independent(f, x);
    for (std::size_t h = 0; h < H; ++h) {
        for (std::size_t d = 0; d < 3; ++d) CHECK(out(h, d) == doctest::Approx(x(L - 1, d)));
    }
}

TEST_CASE("channel independence: joint application equals column-by-column") {
    Rng rng(3);
    const LinearFm f = random_linear_fm(rng, 8, 4);
    const Matrix x = random_matrix(rng, 8, 2);
    const Matrix joint = apply_channel_independent(f, x);
    for (std::size_t d = 0; d < 2; ++d) {
        const Matrix single = apply_channel_independent(f, x.col(d));
        for (std::size_t h = 0; h < 4; ++h) CHECK(joint(h, d) == doctest::Approx(single(h, 0)));
    }
}

TEST_CASE("batched linear forecast equals the closed-form W^T X + b 1^T") {
    Rng rng(4);
    const LinearFm f = random_linear_fm(rng, 8, 4);
    const Matrix x = random_matrix(rng, 8, 5);
    const Matrix got = apply_channel_independent(f, x);
    Matrix expected = tsadapt::num::matmul(f.w().transpose(), x);
    for (std::size_t h = 0; h < 4; ++h) {
        for (std::size_t d = 0; d < 5; ++d) expected(h, d) += f.b()(h, 0);
    }
    CHECK((got - expected).max_abs() < 1e-12);
}

TEST_CASE("channel permutation equivariance") {
    Rng rng(5);
    const std::vector<std::size_t> perm{3, 0, 2, 1};
    for (int which = 0; which < 2; ++which) {
        const LinearFm lin = random_linear_fm(rng.split(10), 8, 4);
        const MlpFm mlp(rng.split(11), 8, 4);
        const tsadapt::fm::FrozenForecaster& f =
            which == 0 ? static_cast<const tsadapt::fm::FrozenForecaster&>(lin) : mlp;
        Rng dr(6);
        const Matrix x = random_matrix(dr, 8, 4);
        Matrix xp(8, 4, 0.0);
        for (std::size_t r = 0; r < 8; ++r) {
            for (std::size_t d = 0; d < 4; ++d) xp(r, d) = x(r, perm[d]);
        }
        const Matrix out = apply_channel_independent(f, x);
        const Matrix outp = apply_channel_independent(f, xp);
        for (std::size_t h = 0; h < 4; ++h) {
            for (std::size_t d = 0; d < 4; ++d) {
                CHECK(outp(h, d) == doctest::Approx(out(h, perm[d])));
            }
        }
    }
}

TEST_CASE("linear forecast is affine in the context") {
    Rng rng(7);
    const LinearFm f = random_linear_fm(rng, 10, 5);
    const Matrix x1 = random_matrix(rng, 10, 3);
    const Matrix x2 = random_matrix(rng, 10, 3);
    const double alpha = 0.3;
    const Matrix combo = x1 * alpha + x2 * (1.0 - alpha);
    const Matrix lhs = apply_channel_independent(f, combo);
    const Matrix rhs = apply_channel_independent(f, x1) * alpha +
                       apply_channel_independent(f, x2) * (1.0 - alpha);
    CHECK((lhs - rhs).max_abs() < 1e-10);
}

TEST_CASE("random forecasters are reproducible, distinct and Glorot-bounded") {
    const std::size_t L = 12, H = 6;
    const LinearFm a = random_linear_fm(Rng(99), L, H);
    const LinearFm b = random_linear_fm(Rng(99), L, H);
    CHECK(a.weight_checksum() == b.weight_checksum());
    CHECK((a.w() - b.w()).max_abs() == 0.0);

    Rng root(123);
    std::set<std::uint64_t> checksums;
    for (std::uint64_t i = 0; i < 1000; ++i) {
        checksums.insert(random_linear_fm(root.split(i), L, H).weight_checksum());
    }
    CHECK(checksums.size() == 1000);

    const double w_limit = std::sqrt(6.0 / static_cast<double>(L + H));
    const double b_limit = std::sqrt(6.0 / static_cast<double>(H + 1));
    CHECK(a.w().max_abs() <= w_limit);
    CHECK(a.b().max_abs() <= b_limit);
}

TEST_CASE("mlp forecaster is frozen, reproducible and restorable from weights") {
    const MlpFm a(Rng(11), 8, 4);
    const MlpFm b(Rng(11), 8, 4);
    CHECK(a.weight_checksum() == b.weight_checksum());
    CHECK(a.hidden() == 64);

    const MlpFm restored(a.w1(), a.b1(), a.w2(), a.b2());
    CHECK(restored.weight_checksum() == a.weight_checksum());
    Rng rng(12);
    const Matrix x = random_matrix(rng, 8, 3);
    CHECK((apply_channel_independent(a, x) - apply_channel_independent(restored, x)).max_abs() ==
          0.0);

    CHECK(a.weight_checksum() != MlpFm(Rng(13), 8, 4).weight_checksum());
    CHECK_THROWS_AS(MlpFm(Matrix(8, 4, 1.0), Matrix(3, 1, 0.0), Matrix(4, 2, 1.0),
                          Matrix(2, 1, 0.0)),
                    std::invalid_argument);
}

TEST_CASE("contract violations carry the failing channel") {
    Rng rng(8);
    const LinearFm f = random_linear_fm(rng, 8, 4);
    CHECK_THROWS_WITH_AS(apply_channel_independent(f, Matrix(5, 2, 0.0)),
                         doctest::Contains("context has"), std::invalid_argument);

    Matrix bad(8, 2, 0.0);
    bad(3, 1) = std::nan("");
    CHECK_THROWS_WITH_AS(apply_channel_independent(f, bad), doctest::Contains("non-finite"),
                         std::invalid_argument);

    std::vector<double> short_ctx(5, 0.0);
    CHECK_THROWS_WITH_AS(f.forecast_one(short_ctx), doctest::Contains("context length"),
                         std::invalid_argument);
}
