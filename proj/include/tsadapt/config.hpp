#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tsadapt::cli {

/**
 * @brief Full experiment configuration with one struct per file section.
 *
 * Every field has a default; a config file only lists the keys it overrides.
 * Parsing rejects unknown sections and keys, and serialize/parse round-trips
 * every field losslessly (doubles use 17 significant digits).
 */
struct RunSection {
    std::uint64_t seed = 0;
    std::string out_dir = "runs";
    std::size_t s_samples = 100;  // Monte-Carlo paths for probabilistic eval
};

struct DataSection {
    std::string source = "synthetic";  // "synthetic" or "csv"
    std::string synthetic_mode = "correlated";
    std::size_t length = 1600;  // synthetic series length T
    double signal_scale = 0.2;
    double test_offset = 0.0;
    std::string csv_path;
    bool date_column = true;
    std::size_t context = 96;  // L
    std::size_t horizon = 24;  // H
    std::size_t train_stride = 2;
    std::size_t eval_stride = 1;
    std::string scaler = "none";  // "standard", "minmax" or "none"
    bool pca = false;             // full-rotation PCA in the pipeline
};

struct ForecasterSection {
    std::string type = "linear";  // "linear" or "mlp"
    std::uint64_t seed = 7;
    std::size_t hidden = 64;  // mlp only
};

struct AdapterSection {
    std::string kind = "linear_ae";
    std::size_t d_latent = 0;  // 0 resolves to the channel count
    double dropout_p = 0.1;
    std::size_t hidden = 128;
    std::size_t layers = 2;
    double beta = 0.5;
    double sigma2 = 1.0;
    bool sigma2_auto = false;
};

struct TrainingSection {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::string scheduler = "plateau";  // "constant", "one_cycle" or "plateau"
    std::size_t patience = 5;
    double factor = 0.5;
    double min_lr = 1e-5;
    bool revin = true;
    std::size_t k_folds = 3;  // contiguous temporal folds for sweep selection
};

struct ExperimentSection {
    std::size_t n_trials = 1000;
    std::vector<std::size_t> component_sweep;              // empty = 1..D
    std::vector<double> beta_sweep = {0.0, 0.5, 1.0, 4.0};
    std::vector<double> log_sigma2_sweep = {-2.0, -1.0, 0.0, 1.0};
    bool include_auto = true;
};

struct ExperimentConfig {
    RunSection run;
    DataSection data;
    ForecasterSection forecaster;
    AdapterSection adapter;
    TrainingSection training;
    ExperimentSection experiment;
};

/// Parses "[section]\nkey = value" text; '#' starts a comment. Unknown
/// sections or keys and malformed values throw with the offending line.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// Canonical text form: every section, every key, stable order.
std::string serialize_config(const ExperimentConfig& cfg);

/// 16 lowercase hex digits over the canonical serialization.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace tsadapt::cli
