#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tsadapt/matrix.hpp"
#include "tsadapt/rng.hpp"

namespace tsadapt::fm {

using num::Matrix;
using num::Rng;

/**
 * @brief Frozen univariate forecaster: maps an L-step context to an H-step
 * forecast, one channel at a time.
 *
 * Implementations are deterministic and immutable after construction; adapter
 * training must never change the checksum.
 */
class FrozenForecaster {
public:
    virtual ~FrozenForecaster() = default;

    virtual std::vector<double> forecast_one(const std::vector<double>& context) const = 0;

    virtual std::size_t context_length() const = 0;
    virtual std::size_t horizon() const = 0;
    virtual std::string name() const = 0;

    /// Hash of all weight bytes; used to verify the frozen contract.
    virtual std::uint64_t weight_checksum() const = 0;
};

/**
 * @brief Linear forecaster f(x) = w^T x + b, applied per channel.
 */
class LinearFm final : public FrozenForecaster {
public:
    /// w is L x H, b is H x 1.
    LinearFm(Matrix w, Matrix b);

    std::vector<double> forecast_one(const std::vector<double>& context) const override;
    std::size_t context_length() const override { return w_.rows(); }
    std::size_t horizon() const override { return w_.cols(); }
    std::string name() const override { return "linear"; }
    std::uint64_t weight_checksum() const override;

    const Matrix& w() const { return w_; }
    const Matrix& b() const { return b_; }

private:
    Matrix w_;  // L x H
    Matrix b_;  // H x 1
};

/// Glorot-uniform LinearFm; w uses fans (L, H), b uses fans (H, 1).
LinearFm random_linear_fm(const Rng& rng, std::size_t L, std::size_t H);

/**
 * @brief Two-layer ReLU MLP forecaster with weights frozen at construction.
 *
 * Stands in for a pretrained nonlinear model in experiments that only assert
 * orderings, never absolute accuracy.
 */
class MlpFm final : public FrozenForecaster {
public:
    MlpFm(const Rng& rng, std::size_t L, std::size_t H, std::size_t hidden = 64);
    /// Restores an MLP from explicit weights; shapes must be mutually consistent.
    MlpFm(Matrix w1, Matrix b1, Matrix w2, Matrix b2);

    std::vector<double> forecast_one(const std::vector<double>& context) const override;
    std::size_t context_length() const override { return w1_.rows(); }
    std::size_t horizon() const override { return w2_.cols(); }
    std::string name() const override { return "mlp"; }
    std::uint64_t weight_checksum() const override;

    std::size_t hidden() const { return w1_.cols(); }
    const Matrix& w1() const { return w1_; }
    const Matrix& b1() const { return b1_; }
    const Matrix& w2() const { return w2_; }
    const Matrix& b2() const { return b2_; }

private:
    Matrix w1_;  // L x hidden
    Matrix b1_;  // hidden x 1
    Matrix w2_;  // hidden x H
    Matrix b2_;  // H x 1
};

/// Applies the forecaster to each column of x (L x D) independently -> H x D.
/// Forecaster errors are rethrown with the failing channel index attached.
Matrix apply_channel_independent(const FrozenForecaster& f, const Matrix& x);

}  // namespace tsadapt::fm
