#include "tsadapt/optimizer.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tsadapt::optim {

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (lr <= 0.0) throw std::invalid_argument("adam: lr must be positive");
}

void Adam::step(std::vector<Param>& params) {
    if (m_.empty()) {
        for (const Param& p : params) {
            m_.emplace_back(p.value.rows(), p.value.cols(), 0.0);
            v_.emplace_back(p.value.rows(), p.value.cols(), 0.0);
        }
    }
    if (m_.size() != params.size()) {
        throw std::invalid_argument("adam: parameter list changed between steps");
    }
    for (const Param& p : params) {
        if (!p.grad.all_finite()) {
            throw std::runtime_error("adam: non-finite gradient in '" + p.name +
                                     "', training diverged");
        }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        num::Matrix& w = params[k].value;
        const num::Matrix& g = params[k].grad;
        num::Matrix& m = m_[k];
        num::Matrix& v = v_[k];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            for (std::size_t j = 0; j < w.cols(); ++j) {
                m(i, j) = beta1_ * m(i, j) + (1.0 - beta1_) * g(i, j);
                v(i, j) = beta2_ * v(i, j) + (1.0 - beta2_) * g(i, j) * g(i, j);
                const double mhat = m(i, j) / bc1;
                const double vhat = v(i, j) / bc2;
                w(i, j) -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }
}

OneCycle::OneCycle(double peak_lr, std::size_t total_epochs, double pct_start)
    : peak_lr_(peak_lr),
      start_lr_(peak_lr / 25.0),
      final_lr_(peak_lr / 25.0 / 1e4),
      total_epochs_(total_epochs) {
    if (peak_lr <= 0.0) throw std::invalid_argument("one_cycle: peak lr must be positive");
    if (total_epochs == 0) throw std::invalid_argument("one_cycle: total epochs must be >= 1");
    if (pct_start <= 0.0 || pct_start >= 1.0) {
        throw std::invalid_argument("one_cycle: pct_start must be in (0, 1)");
    }
    const double p = pct_start * static_cast<double>(total_epochs - 1);
    peak_epoch_ = static_cast<std::size_t>(std::llround(p));
    if (peak_epoch_ == 0 && total_epochs > 1) peak_epoch_ = 1;
}

double OneCycle::lr_at(std::size_t epoch) const {
    if (epoch >= total_epochs_) epoch = total_epochs_ - 1;
    constexpr double kPi = 3.14159265358979323846;
    if (total_epochs_ == 1) return peak_lr_;
    if (epoch <= peak_epoch_) {
        const double t = static_cast<double>(epoch) / static_cast<double>(peak_epoch_);
        return start_lr_ + (peak_lr_ - start_lr_) * 0.5 * (1.0 - std::cos(kPi * t));
    }
    const double span = static_cast<double>(total_epochs_ - 1 - peak_epoch_);
    const double t = static_cast<double>(epoch - peak_epoch_) / span;
    return final_lr_ + (peak_lr_ - final_lr_) * 0.5 * (1.0 + std::cos(kPi * t));
}

ReduceOnPlateau::ReduceOnPlateau(double base_lr, std::size_t patience, double factor,
                                 double min_lr)
    : lr_(base_lr),
      factor_(factor),
      min_lr_(min_lr),
      patience_(patience),
      best_(std::numeric_limits<double>::infinity()) {
    if (base_lr <= 0.0) throw std::invalid_argument("reduce_on_plateau: lr must be positive");
    if (factor <= 0.0 || factor >= 1.0) {
        throw std::invalid_argument("reduce_on_plateau: factor must be in (0, 1)");
    }
}

double ReduceOnPlateau::observe(double val_loss) {
    if (val_loss < best_) {
        best_ = val_loss;
        bad_ = 0;
    } else {
        ++bad_;
        if (bad_ > patience_) {
            lr_ = std::max(lr_ * factor_, min_lr_);
            bad_ = 0;
        }
    }
    return lr_;
}

}  // namespace tsadapt::optim
