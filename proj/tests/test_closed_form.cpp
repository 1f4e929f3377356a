#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tsadapt/adapter.hpp"
#include "tsadapt/dataset.hpp"
#include "tsadapt/forecaster.hpp"
#include "tsadapt/linalg.hpp"
#include "tsadapt/rng.hpp"

using tsadapt::adapters::Adapter;
using tsadapt::adapters::ClosedFormFit;
using tsadapt::adapters::fit_closed_form;
using tsadapt::adapters::make_closed_form_adapter;
using tsadapt::adapters::make_identity_adapter;
using tsadapt::fm::LinearFm;
using tsadapt::fm::random_linear_fm;
using tsadapt::num::Matrix;
using tsadapt::num::matmul;
using tsadapt::num::pinv;
using tsadapt::num::Rng;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
    Matrix m(r, c, 0.0);
    for (auto& v : m.data()) v = rng.uniform(lo, hi);
    return m;
}

/// Residual A = Y - W^T X and bias block B = b 1^T for one window.
std::pair<Matrix, Matrix> residual_blocks(const Matrix& x, const Matrix& y, const LinearFm& f) {
    const Matrix a = y - matmul(f.w().transpose(), x);
    Matrix b(y.rows(), y.cols(), 0.0);
    for (std::size_t h = 0; h < y.rows(); ++h) {
        for (std::size_t d = 0; d < y.cols(); ++d) b(h, d) = f.b()(h, 0);
    }
    return {a, b};
}

double quadratic_loss(const Matrix& a, const Matrix& b, const Matrix& m) {
    const Matrix res = a - matmul(b, m);
    const double n = res.frobenius_norm();
    return n * n;
}

}  // namespace

TEST_CASE("rank-one blocks give the closed-form solution") {
    Rng rng(21);
    const std::size_t L = 16, H = 5, D = 4;
    const LinearFm f = random_linear_fm(rng.split(0), L, H);
    const Matrix x = random_matrix(rng, L, D);
    const Matrix y = random_matrix(rng, H, D);
    const auto [a, b] = residual_blocks(x, y, f);

    const ClosedFormFit fit = fit_closed_form(x, y, f);
    CHECK(!fit.degenerate_bias);

    // a_vec = A^T b; ||b||^2 = sum over horizon entries.
    const Matrix a_vec = matmul(a.transpose(), f.b());  // D x 1
    double b2 = 0.0;
    for (std::size_t h = 0; h < H; ++h) b2 += f.b()(h, 0) * f.b()(h, 0);
    double a2 = 0.0;
    for (std::size_t d = 0; d < D; ++d) a2 += a_vec(d, 0) * a_vec(d, 0);

    Matrix m_expected(D, D, 0.0);
    Matrix w_expected(D, D, 0.0);
    for (std::size_t i = 0; i < D; ++i) {
        for (std::size_t j = 0; j < D; ++j) {
            m_expected(i, j) = a_vec(j, 0) / (static_cast<double>(D) * b2);
            w_expected(i, j) = b2 * a_vec(i, 0) / a2;
        }
    }
    CHECK((fit.m_star - m_expected).max_abs() < 1e-10);
    CHECK((fit.w_star - w_expected).max_abs() < 1e-10);

    // The two coordinates are pseudo-inverses of each other.
    CHECK((pinv(fit.w_star) - fit.m_star).max_abs() < 1e-8);
}

TEST_CASE("stationarity: the analytic gradient vanishes at m_star") {
    Rng rng(22);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t L = 24, H = 6, D = 5;
        const LinearFm f = random_linear_fm(rng.split(100 + static_cast<std::uint64_t>(trial)),
                                            L, H);
        Rng dr = rng.split(200 + static_cast<std::uint64_t>(trial));
        const Matrix x = random_matrix(dr, L, D);
        const Matrix y = random_matrix(dr, H, D);
        const auto [a, b] = residual_blocks(x, y, f);
        const ClosedFormFit fit = fit_closed_form(x, y, f);

        // grad_M ||A - BM||^2 = -2 B^T (A - BM)
        const Matrix grad = matmul(b.transpose(), a - matmul(b, fit.m_star)) * -2.0;
        const double ref = matmul(b.transpose(), a).frobenius_norm();
        CHECK(grad.frobenius_norm() / ref < 1e-6);
    }
}

TEST_CASE("perturbations can only increase the quadratic loss, by exactly eps^2 ||B delta||^2") {
    Rng rng(23);
    const std::size_t L = 20, H = 4, D = 6;
    const LinearFm f = random_linear_fm(rng.split(0), L, H);
    const Matrix x = random_matrix(rng, L, D);
    const Matrix y = random_matrix(rng, H, D);
    const auto [a, b] = residual_blocks(x, y, f);
    const ClosedFormFit fit = fit_closed_form(x, y, f);
    const double base = quadratic_loss(a, b, fit.m_star);
    const double eps = 1e-3;

    for (int k = 0; k < 100; ++k) {
        const Matrix delta = random_matrix(rng, D, D);
        const double moved = quadratic_loss(a, b, fit.m_star + delta * eps);
        CHECK(moved >= base - 1e-9);
        const double bd = matmul(b, delta).frobenius_norm();
        CHECK(moved - base == doctest::Approx(eps * eps * bd * bd).epsilon(1e-6));
    }
}

TEST_CASE("scalar case: the optimum zeroes the residual and matches a grid search") {
    Rng rng(24);
    const std::size_t L = 8;
    Matrix w = random_matrix(rng, L, 1);
    Matrix bias(1, 1, 0.7);
    const LinearFm f(w, bias);
    const Matrix x = random_matrix(rng, L, 1);
    const Matrix y = random_matrix(rng, 1, 1);
    const auto [a, b] = residual_blocks(x, y, f);

    const ClosedFormFit fit = fit_closed_form(x, y, f);
    CHECK(fit.w_star(0, 0) == doctest::Approx(b(0, 0) / a(0, 0)));
    CHECK(fit.m_star(0, 0) == doctest::Approx(a(0, 0) / b(0, 0)));
    CHECK(quadratic_loss(a, b, fit.m_star) < 1e-20);

    const double best = quadratic_loss(a, b, fit.m_star);
    for (int i = -100; i <= 100; ++i) {
        Matrix m(1, 1, fit.m_star(0, 0) + 0.02 * i);
        CHECK(quadratic_loss(a, b, m) >= best - 1e-12);
    }
}

TEST_CASE("zero bias degenerates to the identity with a flag") {
    Rng rng(25);
    const std::size_t L = 10, H = 3, D = 4;
    const LinearFm f(random_matrix(rng, L, H), Matrix(H, 1, 0.0));
    const Matrix x = random_matrix(rng, L, D);
    const Matrix y = random_matrix(rng, H, D);
    const ClosedFormFit fit = fit_closed_form(x, y, f);
    CHECK(fit.degenerate_bias);
    CHECK((fit.w_star - Matrix::identity(D)).max_abs() == 0.0);
    CHECK((fit.m_star - Matrix::identity(D)).max_abs() == 0.0);

    // With B = 0 the loss ignores M entirely.
    const auto [a, b] = residual_blocks(x, y, f);
    const Matrix any = random_matrix(rng, D, D);
    CHECK(quadratic_loss(a, b, fit.m_star) == quadratic_loss(a, b, any));
}

TEST_CASE("regularized path follows the rank-one resolvent formula") {
    Rng rng(26);
    const std::size_t L = 12, H = 4, D = 5;
    const LinearFm f = random_linear_fm(rng.split(0), L, H);
    const Matrix x = random_matrix(rng, L, D);
    const Matrix y = random_matrix(rng, H, D);
    const auto [a, b] = residual_blocks(x, y, f);
    const Matrix a_vec = matmul(a.transpose(), f.b());
    double b2 = 0.0;
    for (std::size_t h = 0; h < H; ++h) b2 += f.b()(h, 0) * f.b()(h, 0);
    double a_sum = 0.0;
    for (std::size_t d = 0; d < D; ++d) a_sum += a_vec(d, 0);

    for (double lambda : {1e-4, 1e-2, 1.0}) {
        const ClosedFormFit fit = fit_closed_form(x, y, f, lambda);
        // (lambda I + 1 a^T)^{-1} ||b||^2 1 1^T = ||b||^2 1 1^T / (lambda + a^T 1)
        const double cell = b2 / (lambda + a_sum);
        for (std::size_t i = 0; i < D; ++i) {
            for (std::size_t j = 0; j < D; ++j) {
                CHECK(fit.w_star(i, j) == doctest::Approx(cell).epsilon(1e-8));
            }
        }
        // m_star is lambda-independent.
        CHECK((fit.m_star - fit_closed_form(x, y, f).m_star).max_abs() == 0.0);
    }
    CHECK_THROWS_AS(fit_closed_form(x, y, f, -1.0), std::invalid_argument);
}

TEST_CASE("batch fit equals the single-window formula on the mean residual") {
    Rng rng(27);
    const std::size_t L = 14, H = 4, D = 3;
    const LinearFm f = random_linear_fm(rng.split(0), L, H);
    tsadapt::data::WindowBatch batch;
    Matrix mean_res(H, D, 0.0);
    for (int i = 0; i < 5; ++i) {
        batch.contexts.push_back(random_matrix(rng, L, D));
        batch.targets.push_back(random_matrix(rng, H, D));
        batch.starts.push_back(static_cast<std::size_t>(i));
        mean_res = mean_res + residual_blocks(batch.contexts.back(), batch.targets.back(), f).first;
    }
    mean_res *= 1.0 / 5.0;

    const ClosedFormFit got = fit_closed_form(batch, f);
    const Matrix a_vec = matmul(mean_res.transpose(), f.b());
    double b2 = 0.0;
    for (std::size_t h = 0; h < H; ++h) b2 += f.b()(h, 0) * f.b()(h, 0);
    Matrix m_expected(D, D, 0.0);
    for (std::size_t i = 0; i < D; ++i) {
        for (std::size_t j = 0; j < D; ++j) {
            m_expected(i, j) = a_vec(j, 0) / (static_cast<double>(D) * b2);
        }
    }
    CHECK((got.m_star - m_expected).max_abs() < 1e-10);

    tsadapt::data::WindowBatch empty;
    CHECK_THROWS_AS(fit_closed_form(empty, f), std::invalid_argument);
}

TEST_CASE("the realized adapter inverts exactly and pays only the epsilon tax") {
    Rng rng(28);
    const std::size_t L = 18, H = 5, D = 4;
    const LinearFm f = random_linear_fm(rng.split(0), L, H);
    const Matrix x = random_matrix(rng, L, D);
    const Matrix y = random_matrix(rng, H, D);
    const auto [a, b] = residual_blocks(x, y, f);
    const ClosedFormFit fit = fit_closed_form(x, y, f);
    const Adapter ad = make_closed_form_adapter(fit);

    // enc.w composes with dec.w to the identity.
    const Matrix prod = matmul(ad.param("enc.w").value, ad.param("dec.w").value);
    CHECK((prod - Matrix::identity(D)).max_abs() < 1e-10);

    // dec.w = m_star + eps I; the composition loss is the quadratic optimum
    // plus exactly eps^2 ||B||_F^2.
    const double eps = ad.param("dec.w").value(0, 0) - fit.m_star(0, 0);
    CHECK(eps > 0.0);
    const Matrix pred = ad.forward_mean(f, x);
    const Matrix res = y - pred;
    const double composed = res.frobenius_norm() * res.frobenius_norm();
    const double expected =
        quadratic_loss(a, b, fit.m_star) + eps * eps * b.frobenius_norm() * b.frobenius_norm();
    CHECK(composed == doctest::Approx(expected).epsilon(1e-8));

    CHECK_THROWS_WITH_AS(
        make_closed_form_adapter(ClosedFormFit{Matrix(2, 3, 0.0), Matrix(2, 3, 0.0), false}),
        doctest::Contains("square"), std::invalid_argument);
}

TEST_CASE("on weak-signal synthetic data the fit beats the identity by a wide margin") {
    const auto ds = tsadapt::data::generate_synthetic(
        Rng(404), tsadapt::data::SyntheticMode::uncorrelated, 1600, 0.05);
    const std::size_t L = 48, H = 12;
    const auto train = make_windows(ds, tsadapt::data::Split::train, L, H, 8);

    Rng root(515);
    std::vector<double> ratios;
    for (int trial = 0; trial < 20; ++trial) {
        const LinearFm f = random_linear_fm(root.split(static_cast<std::uint64_t>(trial)), L, H);
        const ClosedFormFit fit = fit_closed_form(train, f);

        double loss_star = 0.0, loss_id = 0.0;
        const Matrix eye = Matrix::identity(5);
        for (std::size_t i = 0; i < train.size(); ++i) {
            const auto [a, b] = residual_blocks(train.contexts[i], train.targets[i], f);
            loss_star += quadratic_loss(a, b, fit.m_star);
            loss_id += quadratic_loss(a, b, eye);
        }
        CHECK(loss_star <= loss_id + 1e-9);
        ratios.push_back(loss_id / loss_star);
    }
    std::sort(ratios.begin(), ratios.end());
    CHECK(ratios[ratios.size() / 2] >= 5.0);
}
