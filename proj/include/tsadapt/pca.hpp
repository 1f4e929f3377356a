#pragma once

#include <vector>

#include "tsadapt/matrix.hpp"

namespace tsadapt::num {

/// Principal component basis fit on row-observations.
struct PcaModel {
    Matrix mean;                             // 1 x d
    Matrix components;                       // d x k, orthonormal columns, variance-descending
    std::vector<double> explained_variance;  // length k, singular_value^2 / (n - 1)
};

/**
 * @brief Fit PCA by SVD of the mean-centered data (rows are observations).
 *
 * Components are the top right singular vectors; each is sign-fixed so its
 * largest-magnitude entry is positive, which makes fits reproducible across
 * seeds and platforms. Requires n >= 2 rows and 1 <= n_components <= d.
 */
PcaModel pca_fit(const Matrix& data, std::size_t n_components);

/// Project rows: (x - mean) * components. x is n x d, result n x k.
Matrix pca_transform(const PcaModel& model, const Matrix& x);

/// Reconstruct rows: z * components^T + mean. z is n x k, result n x d.
Matrix pca_inverse_transform(const PcaModel& model, const Matrix& z);

}  // namespace tsadapt::num
