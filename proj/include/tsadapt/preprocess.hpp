#pragma once

#include <optional>
#include <utility>

#include "tsadapt/matrix.hpp"
#include "tsadapt/pca.hpp"

namespace tsadapt::data {

using num::Matrix;

/**
 * @brief Per-window normalization statistics computed on the context.
 *
 * std is floored at eps so constant channels normalize to zero and denormalize
 * back exactly; for a > 0, normalize(a*x + b) == normalize(x) whenever the
 * channel std clears the floor.
 */
struct RevinState {
    Matrix mean;  // 1 x D
    Matrix std;   // 1 x D, every entry >= eps
    double eps = 1e-5;
};

/// Normalizes each channel of the context to mean 0, std 1 (population std,
/// floored at eps).
std::pair<Matrix, RevinState> revin_normalize(const Matrix& x, double eps = 1e-5);

/// Applies y * std + mean with the context statistics.
Matrix revin_denormalize(const Matrix& y, const RevinState& state);

enum class ScalerKind { standard, minmax };

/**
 * @brief Per-channel affine rescaler with statistics frozen at fit time.
 *
 * standard: (x - mean) / std; minmax: (x - min) / (max - min). Zero-spread
 * channels fall back to divisor 1 with a warning on stderr.
 */
struct Scaler {
    ScalerKind kind = ScalerKind::standard;
    Matrix offset;   // 1 x D
    Matrix divisor;  // 1 x D, strictly positive
};

/// Fits on the training rows only; every timestep is one data point.
Scaler fit_scaler(ScalerKind kind, const Matrix& train_values);
Matrix scaler_apply(const Scaler& s, const Matrix& x);
Matrix scaler_invert(const Scaler& s, const Matrix& x);

/**
 * @brief Whole-series preprocessing fit on the train split: optional rescaling
 * followed by optional full-component PCA rotation. RevIN stays per-window and
 * is applied at forward time, not here.
 */
struct Pipeline {
    std::optional<Scaler> scaler;
    std::optional<num::PcaModel> pca;
    bool revin = true;
    double revin_eps = 1e-5;
};

/// Fits scaler and PCA statistics on rows [0, train_end) of values.
Pipeline fit_pipeline(const Matrix& values, std::size_t train_end, bool use_scaler,
                      ScalerKind kind, bool use_pca, bool use_revin);

/// Applies the fitted scaler and PCA to a whole series.
Matrix pipeline_apply(const Pipeline& p, const Matrix& values);

}  // namespace tsadapt::data
