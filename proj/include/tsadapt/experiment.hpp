#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsadapt/checkpoint.hpp"
#include "tsadapt/config.hpp"
#include "tsadapt/dataset.hpp"
#include "tsadapt/metrics.hpp"

namespace tsadapt::cli {

/**
 * @brief Per-trial test error of the identity, PCA and closed-form adapters
 * around one random frozen linear forecaster.
 */
struct LinearTrialRow {
    std::size_t trial = 0;
    double mse_identity = 0.0;
    double mse_pca = 0.0;
    double mse_closed = 0.0;
};

struct LinearExperimentSummary {
    std::string mode;  // "uncorrelated" or "correlated"
    std::vector<LinearTrialRow> rows;
    double median_identity = 0.0;
    double median_pca = 0.0;
    double median_closed = 0.0;
};

/**
 * @brief Sweep over random frozen linear forecasters on one synthetic series.
 *
 * Each trial draws a Glorot-uniform linear forecaster, fits the closed-form
 * transform on the train windows and scores all three adapters on the test
 * windows. The dataset, the PCA rotation (5 components) and the trial
 * forecasters all derive from the given seed.
 */
LinearExperimentSummary run_linear_experiment(data::SyntheticMode mode, std::size_t n_trials,
                                              std::uint64_t seed, std::size_t L, std::size_t H);

std::string to_csv(const LinearExperimentSummary& s);

/// Enforces the expected qualitative ordering of the medians; throws with the
/// measured values when it fails. Uncorrelated: closed-form at least 5x below
/// identity and PCA within 5% of identity. Correlated: PCA within 2x of
/// closed-form and both strictly below identity.
void check_orderings(const LinearExperimentSummary& s);

/**
 * @brief Reproducible artifact of one training run. Carries the exact
 * resolved config and no wall-clock data, so identical config + seed
 * reproduces the record byte-identically.
 */
struct RunRecord {
    std::string command;
    std::string config_hash;
    std::string config_text;  // canonical serialization of the resolved config
    std::uint64_t seed = 0;
    std::string adapter_kind;
    eval::MetricsReport metrics;  // test split, deterministic forecast path
    std::optional<eval::ReliabilityTable> reliability;  // stochastic kinds
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> train_nll;  // variational kinds
    std::vector<double> train_kl;
    std::size_t best_epoch = 0;
    double identity_mse = 0.0;  // no-adapter baseline on the same test windows
};

std::string to_json(const RunRecord& r);

/// Minimal reproduction record for commands that produce CSV grids: the
/// command name plus the exact resolved config and its hash.
std::string command_record_json(const std::string& command, const ExperimentConfig& cfg);

/// Mean per-cell test-forecast error of the trained-or-fit adapter on k
/// contiguous temporal folds of the train region: each fold is held out for
/// validation while the remaining windows train the adapter. The sweep
/// commands use it as their hyperparameter-selection score.
double kfold_cv_mse(const ExperimentConfig& cfg);

/// Builds the configured dataset (synthetic or CSV), raw space.
data::TimeSeriesDataset build_dataset(const ExperimentConfig& cfg);

struct TrainOutcome {
    RunRecord record;
    io::Checkpoint checkpoint;
};

/// Full pipeline: dataset, preprocessing, frozen forecaster, adapter fit or
/// training, test-split evaluation, checkpoint assembly.
TrainOutcome run_training(const ExperimentConfig& cfg);

struct EvalOutcome {
    eval::MetricsReport metrics;
    std::optional<eval::ReliabilityTable> reliability;
};

/// Evaluates a stored checkpoint on the dataset described by cfg, using the
/// checkpoint's own preprocessing statistics.
EvalOutcome run_evaluation(const io::Checkpoint& ckpt, const ExperimentConfig& cfg,
                           std::size_t s_samples);

/// One training run per latent width; "identity" baseline row first.
/// An empty list sweeps 1..D. The cv_mse column is the k-fold selection score.
std::string sweep_components_csv(const ExperimentConfig& cfg, std::vector<std::size_t> widths);

/// Full (beta, log sigma2) grid for a variational kind, plus learned-variance
/// rows when include_auto is set; columns mse, ece, final KL and the k-fold
/// selection score.
std::string sweep_beta_sigma_csv(const ExperimentConfig& cfg);

/// Encodes train and test windows, projects the flattened latent codes onto
/// their top two principal components and emits (x, y, split, window) rows.
std::string export_latent_csv(const io::Checkpoint& ckpt, const ExperimentConfig& cfg);

}  // namespace tsadapt::cli
