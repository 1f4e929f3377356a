#pragma once

#include <vector>

#include "tsadapt/matrix.hpp"

namespace tsadapt::num {

/// Thin SVD factors: a = u * diag(singular_values) * vt.
struct SvdResult {
    Matrix u;                             // rows x k, orthonormal columns
    std::vector<double> singular_values;  // length k = min(rows, cols), descending
    Matrix vt;                            // k x cols, orthonormal rows
};

/**
 * @brief Thin SVD via one-sided Jacobi rotations.
 *
 * Columns of the working copy are repeatedly rotated pairwise until all column
 * dot products fall below 1e-12 relative to the column norms; the rotations are
 * accumulated into v. Capped at 100 sweeps; failure to converge throws
 * std::runtime_error. Exact zero singular values get their u columns completed
 * to an orthonormal basis so u always has orthonormal columns.
 */
SvdResult svd(const Matrix& a);

/**
 * @brief Moore-Penrose pseudo-inverse via SVD.
 *
 * Singular values at or below rcond * max(singular value) are treated as zero.
 * rcond < 0 selects the default 1e-12 * max(rows, cols).
 */
Matrix pinv(const Matrix& a, double rcond = -1.0);

/// Square linear solve (LU, partial pivoting). Throws std::runtime_error when singular.
Matrix solve(const Matrix& a, const Matrix& b);

/**
 * @brief (a + lambda * I)^-1 for square a via direct solve.
 *
 * Verifies the residual ||(a + lambda I) * inv - I||_max < 1e-8 and throws
 * std::runtime_error suggesting a larger lambda when the system is too
 * ill-conditioned to pass.
 */
Matrix regularized_inverse(const Matrix& a, double lambda);

}  // namespace tsadapt::num
