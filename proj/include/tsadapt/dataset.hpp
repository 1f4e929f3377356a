#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tsadapt/matrix.hpp"
#include "tsadapt/rng.hpp"

namespace tsadapt::data {

using num::Matrix;
using num::Rng;

/// Contiguous train/val/test ranges: [0, train_end), [train_end, val_end),
/// [val_end, T).
struct SplitRanges {
    std::size_t train_end = 0;
    std::size_t val_end = 0;

    std::size_t train_len() const { return train_end; }
    std::size_t val_len() const { return val_end - train_end; }
};

enum class Split { train, val, test };

/**
 * @brief Multivariate series with immutable values and split boundaries.
 */
struct TimeSeriesDataset {
    Matrix values;  // T x D
    std::vector<std::string> channel_names;
    std::string granularity;
    SplitRanges split;

    std::size_t length() const { return values.rows(); }
    std::size_t channels() const { return values.cols(); }
    std::size_t split_begin(Split s) const;
    std::size_t split_end(Split s) const;
};

enum class SyntheticMode { uncorrelated, correlated };

/**
 * @brief Seeded synthetic benchmark series.
 *
 * Five base sinusoids with log-spaced frequencies in [1/256, 1/16] cycles/step,
 * amplitudes uniform on signal_scale*[0.5, 2.0], random phases, plus iid noise
 * of std 0.05*signal_scale on each base. Uncorrelated mode returns the 5 bases
 * as channels; correlated mode returns 8 random linear combinations of them
 * with per-channel Gaussian noise, std cycling signal_scale*{0.1, 0.2, 0.5}.
 *
 * test_offset adds a constant level shift to every channel inside the test
 * range, for distribution-shift experiments. Split is 0.6/0.2/0.2.
 */
TimeSeriesDataset generate_synthetic(const Rng& rng, SyntheticMode mode, std::size_t T,
                                     double signal_scale = 1.0, double test_offset = 0.0);

/**
 * @brief Paired context/target windows cut from one split.
 */
struct WindowBatch {
    std::vector<Matrix> contexts;  // each L x D
    std::vector<Matrix> targets;   // each H x D
    std::vector<std::size_t> starts;

    std::size_t size() const { return contexts.size(); }
    bool empty() const { return contexts.empty(); }
};

/// Cuts windows from the given split; windows never straddle split boundaries.
/// Count for stride s over split length n: floor((n - L - H) / s) + 1.
WindowBatch make_windows(const TimeSeriesDataset& ds, Split split, std::size_t L,
                         std::size_t H, std::size_t stride = 1);

/**
 * @brief Loads a rectangular CSV with a header row into a dataset.
 *
 * When date_column is true the first column is skipped (timestamps). Split
 * boundaries follow the published benchmark counts when (T, D) matches a known
 * dataset, otherwise 0.6/0.2/0.2.
 */
TimeSeriesDataset load_csv(const std::string& path, bool date_column);

/// Writes values with a header row; inverse of load_csv up to float formatting.
void save_csv(const TimeSeriesDataset& ds, const std::string& path);

}  // namespace tsadapt::data
