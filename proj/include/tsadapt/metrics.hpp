#pragma once

#include <string>
#include <vector>

#include "tsadapt/adapter.hpp"
#include "tsadapt/matrix.hpp"

namespace tsadapt::eval {

using num::Matrix;

/// Mean per-cell squared error; shapes must match.
double mse(const Matrix& pred, const Matrix& target);
/// Mean per-cell absolute error; shapes must match.
double mae(const Matrix& pred, const Matrix& target);

/**
 * @brief Aggregate forecast accuracy with a per-horizon-step breakdown.
 *
 * Per-cell mean convention throughout, so values are comparable across
 * horizons and channel counts. Aggregates equal the mean of per-window values.
 */
struct MetricsReport {
    double mse = 0.0;
    double mae = 0.0;
    std::vector<double> mse_per_step;  // length H
    std::vector<double> mae_per_step;
    std::size_t n_windows = 0;
};

MetricsReport evaluate_forecasts(const std::vector<Matrix>& preds,
                                 const std::vector<Matrix>& targets);

/**
 * @brief Empirical quantile coverage per nominal level, plus the mean
 * absolute gap to the diagonal (expected calibration error).
 */
struct ReliabilityTable {
    std::vector<double> levels;
    std::vector<double> coverage;                        // per level
    std::vector<std::vector<double>> coverage_per_step;  // [level][horizon step]
    double ece = 0.0;
};

/// Ten equally spaced levels 0.05, 0.15, ..., 0.95.
std::vector<double> default_quantile_levels();

/// Fraction of cells with target <= sample quantile, per level. Each
/// distribution needs at least 20 samples; levels must be strictly
/// increasing inside (0, 1).
ReliabilityTable empirical_coverage(const std::vector<adapters::ForecastDistribution>& dists,
                                    const std::vector<Matrix>& targets,
                                    const std::vector<double>& q_levels);

/// Flat CSV, one row per metric and horizon step.
std::string to_csv(const MetricsReport& r);
std::string to_csv(const ReliabilityTable& t);
std::string to_json(const MetricsReport& r);
std::string to_json(const ReliabilityTable& t);

}  // namespace tsadapt::eval
