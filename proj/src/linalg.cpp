#include "tsadapt/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tsadapt::num {

namespace {

constexpr double kJacobiTol = 1e-12;
constexpr int kMaxSweeps = 100;

// One-sided Jacobi on a tall-or-square matrix (rows >= cols).
SvdResult svd_tall(const Matrix& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Matrix w = a;
    Matrix v = Matrix::identity(n);

    // Rank-deficient inputs cancel columns down to roundoff noise; such
    // columns count as zero or the noise keeps the sweep from converging.
    const double fro = a.frobenius_norm();
    const double dead2 = 1e-28 * fro * fro;

    bool converged = false;
    for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if (alpha <= dead2 || beta <= dead2) continue;
                if (std::fabs(gamma) <= kJacobiTol * std::sqrt(alpha * beta)) continue;
                converged = false;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double wp = w(i, p), wq = w(i, q);
                    w(i, p) = c * wp - s * wq;
                    w(i, q) = s * wp + c * wq;
                }
                for (std::size_t i = 0; i < n; ++i) {
                    const double vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - s * vq;
                    v(i, q) = s * vp + c * vq;
                }
            }
        }
    }
    if (!converged) throw std::runtime_error("svd: one-sided Jacobi did not converge in 100 sweeps");

    std::vector<double> sigma(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
        sigma[j] = std::sqrt(s);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return sigma[i] > sigma[j]; });

    SvdResult r;
    r.u = Matrix(m, n);
    r.vt = Matrix(n, n);
    r.singular_values.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        r.singular_values[j] = sigma[src];
        for (std::size_t i = 0; i < n; ++i) r.vt(j, i) = v(i, src);
        if (sigma[src] > 0.0) {
            for (std::size_t i = 0; i < m; ++i) r.u(i, j) = w(i, src) / sigma[src];
        }
    }
    // Complete u columns for exact-zero singular values so u stays orthonormal.
    for (std::size_t j = 0; j < n; ++j) {
        if (r.singular_values[j] > 0.0) continue;
        for (std::size_t e = 0; e < m; ++e) {
            Matrix cand(m, 1);
            cand(e, 0) = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (k == j || (r.singular_values[k] == 0.0 && k > j)) continue;
                double dot = 0.0;
                for (std::size_t i = 0; i < m; ++i) dot += cand(i, 0) * r.u(i, k);
                for (std::size_t i = 0; i < m; ++i) cand(i, 0) -= dot * r.u(i, k);
            }
            double nrm = cand.frobenius_norm();
            if (nrm > 0.5) {
                for (std::size_t i = 0; i < m; ++i) r.u(i, j) = cand(i, 0) / nrm;
                break;
            }
        }
    }
    return r;
}

}  // namespace

SvdResult svd(const Matrix& a) {
    if (a.empty()) throw std::invalid_argument("svd: empty matrix");
    if (!a.all_finite()) throw std::invalid_argument("svd: non-finite input");
    if (a.rows() >= a.cols()) return svd_tall(a);
    SvdResult t = svd_tall(a.transpose());
    SvdResult r;
    r.singular_values = std::move(t.singular_values);
    r.u = t.vt.transpose();
    r.vt = t.u.transpose();
    return r;
}

Matrix pinv(const Matrix& a, double rcond) {
    if (rcond < 0.0) rcond = 1e-12 * static_cast<double>(std::max(a.rows(), a.cols()));
    SvdResult f = svd(a);
    const double smax = f.singular_values.empty() ? 0.0 : f.singular_values.front();
    const double cut = rcond * smax;
    // pinv = v * diag(1/s) * u^t, dropping singular values at or below the cutoff.
    Matrix vs = f.vt.transpose();  // cols x k
    for (std::size_t j = 0; j < f.singular_values.size(); ++j) {
        const double s = f.singular_values[j];
        const double inv = (s > cut && s > 0.0) ? 1.0 / s : 0.0;
        for (std::size_t i = 0; i < vs.rows(); ++i) vs(i, j) *= inv;
    }
    return matmul(vs, f.u.transpose());
}

Matrix solve(const Matrix& a, const Matrix& b) {
    if (a.rows() != a.cols()) throw std::invalid_argument("solve: matrix not square: " + a.shape_str());
    if (a.rows() != b.rows()) {
        throw std::invalid_argument("solve: shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
    const std::size_t n = a.rows(), k = b.cols();
    Matrix lu = a;
    Matrix x = b;
    std::vector<std::size_t> piv(n);
    std::iota(piv.begin(), piv.end(), 0);

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t best = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(lu(r, col)) > std::fabs(lu(best, col))) best = r;
        if (std::fabs(lu(best, col)) < 1e-300) throw std::runtime_error("solve: singular matrix");
        if (best != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(lu(col, j), lu(best, j));
            for (std::size_t j = 0; j < k; ++j) std::swap(x(col, j), x(best, j));
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = lu(r, col) / lu(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) lu(r, j) -= f * lu(col, j);
            for (std::size_t j = 0; j < k; ++j) x(r, j) -= f * x(col, j);
        }
    }
    for (std::size_t col = n; col-- > 0;) {
        for (std::size_t j = 0; j < k; ++j) {
            double s = x(col, j);
            for (std::size_t c = col + 1; c < n; ++c) s -= lu(col, c) * x(c, j);
            x(col, j) = s / lu(col, col);
        }
    }
    return x;
}

Matrix regularized_inverse(const Matrix& a, double lambda) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("regularized_inverse: matrix not square: " + a.shape_str());
    }
    Matrix shifted = a;
    for (std::size_t i = 0; i < a.rows(); ++i) shifted(i, i) += lambda;
    Matrix inv;
    try {
        inv = solve(shifted, Matrix::identity(a.rows()));
    } catch (const std::runtime_error&) {
        throw std::runtime_error("regularized_inverse: matrix singular at lambda = " +
                                 std::to_string(lambda) + ", increase lambda");
    }
    Matrix residual = matmul(shifted, inv) - Matrix::identity(a.rows());
    if (!(residual.max_abs() < 1e-8)) {
        throw std::runtime_error(
            "regularized_inverse: residual " + std::to_string(residual.max_abs()) +
            " exceeds 1e-8; system too ill-conditioned, increase lambda");
    }
    return inv;
}

}  // namespace tsadapt::num
