#include "tsadapt/pca.hpp"

#include <cmath>
#include <stdexcept>

#include "tsadapt/linalg.hpp"

namespace tsadapt::num {

PcaModel pca_fit(const Matrix& data, std::size_t n_components) {
    const std::size_t n = data.rows(), d = data.cols();
    if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 rows, have " + std::to_string(n));
    if (n_components < 1 || n_components > d) {
        throw std::invalid_argument("pca_fit: n_components " + std::to_string(n_components) +
                                    " outside [1, " + std::to_string(d) + "]");
    }

    PcaModel model;
    model.mean = Matrix(1, d);
    for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += data(i, j);
        model.mean(0, j) = s / static_cast<double>(n);
    }

    Matrix centered = data;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) centered(i, j) -= model.mean(0, j);

    SvdResult f = svd(centered);
    model.components = Matrix(d, n_components);
    model.explained_variance.resize(n_components);
    for (std::size_t k = 0; k < n_components; ++k) {
        const double s = k < f.singular_values.size() ? f.singular_values[k] : 0.0;
        model.explained_variance[k] = s * s / static_cast<double>(n - 1);
        for (std::size_t j = 0; j < d; ++j) model.components(j, k) = f.vt(k, j);
        // Sign convention: largest-magnitude entry of each component is positive.
        std::size_t imax = 0;
        for (std::size_t j = 1; j < d; ++j)
            if (std::fabs(model.components(j, k)) > std::fabs(model.components(imax, k))) imax = j;
        if (model.components(imax, k) < 0.0)
            for (std::size_t j = 0; j < d; ++j) model.components(j, k) = -model.components(j, k);
    }
    return model;
}

Matrix pca_transform(const PcaModel& model, const Matrix& x) {
    if (x.cols() != model.mean.cols()) {
        throw std::invalid_argument("pca_transform: expected " + std::to_string(model.mean.cols()) +
                                    " columns, got " + x.shape_str());
    }
    Matrix centered = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) centered(i, j) -= model.mean(0, j);
    return matmul(centered, model.components);
}

Matrix pca_inverse_transform(const PcaModel& model, const Matrix& z) {
    if (z.cols() != model.components.cols()) {
        throw std::invalid_argument("pca_inverse_transform: expected " +
                                    std::to_string(model.components.cols()) + " columns, got " +
                                    z.shape_str());
    }
    Matrix x = matmul(z, model.components.transpose());
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) += model.mean(0, j);
    return x;
}

}  // namespace tsadapt::num
