#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "tsadapt/linalg.hpp"
#include "tsadapt/pca.hpp"
#include "tsadapt/rng.hpp"

using namespace tsadapt::num;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform(-1.5, 1.5);
    return m;
}

Matrix sample_covariance(const Matrix& data) {
    const std::size_t n = data.rows(), d = data.cols();
    Matrix mean(1, d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data(i, j);
        mean(0, j) = s / static_cast<double>(n);
    }
    Matrix cov(d, d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
            double s = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                s += (data(i, a) - mean(0, a)) * (data(i, b) - mean(0, b));
            cov(a, b) = s / static_cast<double>(n - 1);
        }
    return cov;
}

// Gram-Schmidt orthonormal basis of a random d x k matrix.
Matrix random_orthonormal(Rng& rng, std::size_t d, std::size_t k) {
    Matrix q = random_matrix(rng, d, k);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t p = 0; p < j; ++p) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += q(i, j) * q(i, p);
            for (std::size_t i = 0; i < d; ++i) q(i, j) -= dot * q(i, p);
        }
        double nrm = 0.0;
        for (std::size_t i = 0; i < d; ++i) nrm += q(i, j) * q(i, j);
        nrm = std::sqrt(nrm);
        for (std::size_t i = 0; i < d; ++i) q(i, j) /= nrm;
    }
    return q;
}

double projection_residual(const Matrix& data, const Matrix& mean, const Matrix& basis) {
    Matrix centered = data;
    for (std::size_t i = 0; i < data.rows(); ++i)
        for (std::size_t j = 0; j < data.cols(); ++j) centered(i, j) -= mean(0, j);
    Matrix proj = matmul(matmul(centered, basis), basis.transpose());
    return (centered - proj).frobenius_norm();
}

}  // namespace

TEST_CASE("components diagonalize the sample covariance (independent oracle)") {
    Rng rng(31);
    Matrix data = random_matrix(rng, 120, 6);
    // Inject anisotropy so eigenvalues are well separated.
    for (std::size_t i = 0; i < data.rows(); ++i) {
        data(i, 0) *= 4.0;
        data(i, 1) *= 2.0;
        data(i, 5) += 3.0;  // nonzero mean must not matter
    }
    PcaModel model = pca_fit(data, 6);
    Matrix cov = sample_covariance(data);
    Matrix d = matmul(matmul(model.components.transpose(), cov), model.components);
    for (std::size_t a = 0; a < 6; ++a)
        for (std::size_t b = 0; b < 6; ++b) {
            if (a == b)
                CHECK(d(a, b) == doctest::Approx(model.explained_variance[a]).epsilon(1e-8));
            else
                CHECK(std::fabs(d(a, b)) < 1e-8);
        }
    for (std::size_t k = 0; k + 1 < 6; ++k)
        CHECK(model.explained_variance[k] >= model.explained_variance[k + 1]);
}

TEST_CASE("points on a line give the line direction and zero second variance") {
    Rng rng(8);
    Matrix data(50, 2);
    for (std::size_t i = 0; i < 50; ++i) {
        const double t = rng.uniform(-3.0, 3.0);
        data(i, 0) = t;
        data(i, 1) = 2.0 * t;
    }
    PcaModel model = pca_fit(data, 2);
    const double inv_sqrt5 = 1.0 / std::sqrt(5.0);
    CHECK(std::fabs(model.components(0, 0)) == doctest::Approx(inv_sqrt5).epsilon(1e-9));
    CHECK(std::fabs(model.components(1, 0)) == doctest::Approx(2.0 * inv_sqrt5).epsilon(1e-9));
    CHECK(model.explained_variance[1] == doctest::Approx(0.0));
    // Sign convention: the largest-magnitude entry is positive.
    CHECK(model.components(1, 0) > 0.0);
}

TEST_CASE("full-component round trip is lossless to 1e-8") {
    Rng rng(77);
    Matrix data = random_matrix(rng, 40, 5);
    PcaModel model = pca_fit(data, 5);
    Matrix z = pca_transform(model, data);
    Matrix back = pca_inverse_transform(model, z);
    CHECK((back - data).max_abs() < 1e-8);
}

TEST_CASE("truncated projection beats random orthonormal bases (optimality oracle)") {
    Rng rng(13);
    Matrix data = random_matrix(rng, 80, 5);
    for (std::size_t i = 0; i < data.rows(); ++i) data(i, 2) *= 5.0;
    PcaModel model = pca_fit(data, 2);
    const double pca_res = projection_residual(data, model.mean, model.components);
    for (int trial = 0; trial < 20; ++trial) {
        Matrix basis = random_orthonormal(rng, 5, 2);
        CHECK(pca_res <= projection_residual(data, model.mean, basis) + 1e-9);
    }
}

TEST_CASE("constant column is handled without NaN") {
    Rng rng(3);
    Matrix data = random_matrix(rng, 30, 3);
    for (std::size_t i = 0; i < 30; ++i) data(i, 1) = 4.2;
    PcaModel model = pca_fit(data, 3);
    CHECK(model.components.all_finite());
    CHECK(model.explained_variance[2] == doctest::Approx(0.0).epsilon(1e-12));
    Matrix z = pca_transform(model, data);
    CHECK(z.all_finite());
    CHECK((pca_inverse_transform(model, z) - data).max_abs() < 1e-8);
}

TEST_CASE("components have orthonormal columns") {
    Rng rng(21);
    Matrix data = random_matrix(rng, 60, 7);
    PcaModel model = pca_fit(data, 4);
    Matrix g = matmul(model.components.transpose(), model.components);
    CHECK((g - Matrix::identity(4)).max_abs() < 1e-10);
}

TEST_CASE("contract violations throw") {
    Matrix one_row(1, 3, 1.0);
    CHECK_THROWS_AS(pca_fit(one_row, 1), std::invalid_argument);
    Matrix data(10, 3, 1.0);
    CHECK_THROWS_AS(pca_fit(data, 0), std::invalid_argument);
    CHECK_THROWS_AS(pca_fit(data, 4), std::invalid_argument);
    Rng rng(1);
    PcaModel model = pca_fit(random_matrix(rng, 10, 3), 2);
    CHECK_THROWS_AS(pca_transform(model, Matrix(5, 4, 1.0)), std::invalid_argument);
    CHECK_THROWS_AS(pca_inverse_transform(model, Matrix(5, 3, 1.0)), std::invalid_argument);
}
