#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tsadapt/matrix.hpp"

namespace tsadapt::optim {

/// Named trainable tensor. `grad` always mirrors the shape of `value`.
struct Param {
    std::string name;
    num::Matrix value;
    num::Matrix grad;

    Param() = default;
    Param(std::string name_, num::Matrix value_)
        : name(std::move(name_)),
          value(std::move(value_)),
          grad(value.rows(), value.cols(), 0.0) {}

    void zero_grad() { grad = num::Matrix(value.rows(), value.cols(), 0.0); }
};

/**
 * @brief Adam with bias correction.
 *
 * Moment buffers are keyed by parameter index and allocated lazily on the first
 * step, so one optimizer instance must always see the same parameter list.
 */
class Adam {
public:
    explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8);

    /// One update over all params. Throws if any gradient is non-finite
    /// (diverged training must stop rather than poison the weights).
    void step(std::vector<Param>& params);

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long step_count() const { return t_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<num::Matrix> m_, v_;
};

/**
 * @brief One-cycle schedule: cosine ramp from base/25 up to the peak rate at
 * 30% of the run, then cosine anneal down to base/25/1e4.
 */
class OneCycle {
public:
    OneCycle(double peak_lr, std::size_t total_epochs, double pct_start = 0.3);

    double lr_at(std::size_t epoch) const;
    std::size_t peak_epoch() const { return peak_epoch_; }

private:
    double peak_lr_, start_lr_, final_lr_;
    std::size_t total_epochs_, peak_epoch_;
};

/**
 * @brief Reduce-on-plateau: after more than `patience` consecutive epochs
 * without strict validation improvement, multiply lr by `factor` (floored at
 * `min_lr`) and restart the count.
 */
class ReduceOnPlateau {
public:
    ReduceOnPlateau(double base_lr, std::size_t patience = 5, double factor = 0.5,
                    double min_lr = 1e-5);

    /// Feed one epoch's validation loss; returns the lr to use next.
    double observe(double val_loss);
    double lr() const { return lr_; }

private:
    double lr_, factor_, min_lr_;
    std::size_t patience_, bad_ = 0;
    double best_;
};

}  // namespace tsadapt::optim
