#pragma once

#include <optional>
#include <vector>

#include "tsadapt/adapter.hpp"
#include "tsadapt/dataset.hpp"
#include "tsadapt/forecaster.hpp"
#include "tsadapt/tape.hpp"

namespace tsadapt::train {

using num::Matrix;
using num::Rng;

/**
 * @brief Loss configuration shared by the tape builder and the training loop.
 *
 * Deterministic kinds ignore beta/sigma2 and use the squared Frobenius residual
 * per window. Variational kinds use the Gaussian likelihood with either a fixed
 * sigma2 or a learned per-cell log-variance, plus beta times the KL to a unit
 * Gaussian prior (summed over latent cells). With beta = 0 and sigma2 = 0.5 the
 * two objectives differ by a constant and have identical gradients.
 */
struct LossSettings {
    double beta = 0.5;
    double sigma2 = 1.0;
    bool revin = true;
    double revin_eps = 1e-5;
};

/// One tape's shared leaves: adapter parameters plus the frozen forecaster
/// weights. Reused across every window of a minibatch.
struct GraphRefs {
    optim::Tape* tape = nullptr;
    std::vector<optim::Tape::NodeId> params;  // parallel to adapter.params()
    bool fm_is_mlp = false;
    optim::Tape::NodeId fm_wt = 0, fm_b = 0;                // linear forecaster
    optim::Tape::NodeId fm_w1t = 0, fm_b1 = 0, fm_w2t = 0, fm_b2 = 0;  // mlp
};

/// Creates parameter and forecaster leaves. Gradients reach the forecaster
/// leaves analytically but are never applied; only adapter params are trained.
/// Throws for forecaster types without a differentiable in-graph form.
GraphRefs make_graph(optim::Tape& t, const adapters::Adapter& ad,
                     const fm::FrozenForecaster& f);

struct WindowLossNodes {
    optim::Tape::NodeId total = 0;
    optim::Tape::NodeId nll = 0;
    std::optional<optim::Tape::NodeId> kl;
};

/// Appends one window's forward pass and loss to the graph. Stochastic inputs
/// are pinned through `noise`; empty noise selects the mean path.
WindowLossNodes build_window_loss(GraphRefs& g, const adapters::Adapter& ad,
                                  const Matrix& x, const Matrix& y,
                                  const adapters::PassNoise& noise, const LossSettings& s);

struct ElboParts {
    double total = 0.0;
    double nll = 0.0;
    double kl = 0.0;
};

/// Single-sample evidence bound for a variational adapter on one window
/// (no per-window normalization, adapter-level spaces).
ElboParts vae_elbo_loss(const adapters::Adapter& ad, const fm::FrozenForecaster& f,
                        const Matrix& x, const Matrix& y, double beta, double sigma2,
                        Rng& rng);

enum class SchedulerKind { constant, one_cycle, reduce_on_plateau };

struct TrainingConfig {
    std::size_t epochs = 50;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    SchedulerKind scheduler = SchedulerKind::reduce_on_plateau;
    std::size_t patience = 5;
    double factor = 0.5;
    double min_lr = 1e-5;
    LossSettings loss;
};

struct TrainResult {
    adapters::Adapter adapter;
    std::vector<double> train_loss;  // per epoch, mean over windows
    std::vector<double> val_loss;    // per epoch, deterministic pass
    std::vector<double> train_nll;   // variational kinds only
    std::vector<double> train_kl;
    std::size_t best_epoch = 0;
};

/**
 * @brief Minibatch Adam training with best-validation selection.
 *
 * Kinds without gradient-trainable parameters (identity, pca, closed-form)
 * return unchanged. Validation uses the deterministic path every epoch; the
 * returned adapter carries the parameters of the best validation epoch. An
 * empty validation batch falls back to selecting on the training loss.
 */
TrainResult train_adapter(adapters::Adapter ad, const fm::FrozenForecaster& f,
                          const data::WindowBatch& train, const data::WindowBatch& val,
                          const TrainingConfig& cfg, const Rng& rng);

}  // namespace tsadapt::train
