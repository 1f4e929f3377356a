#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsadapt/dataset.hpp"
#include "tsadapt/forecaster.hpp"
#include "tsadapt/matrix.hpp"
#include "tsadapt/optimizer.hpp"
#include "tsadapt/pca.hpp"
#include "tsadapt/rng.hpp"

namespace tsadapt::adapters {

using num::Matrix;
using num::Rng;

enum class AdapterKind {
    identity,
    pca,
    closed_form_linear,
    linear_ae,
    linear_enc_only,
    linear_dec_only,
    dropout_linear_ae,
    linear_vae,
    deep_vae,
};

AdapterKind adapter_kind_from_string(const std::string& s);
std::string to_string(AdapterKind k);

struct AdapterConfig {
    AdapterKind kind = AdapterKind::identity;
    std::size_t d_in = 1;
    std::size_t d_latent = 1;
    double dropout_p = 0.1;   // dropout_linear_ae only
    std::size_t hidden = 128;  // deep_vae only
    std::size_t layers = 2;    // deep_vae affine depth including the head
    bool sigma2_auto = false;  // decoder also emits per-cell log-variance
};

/// Posterior parameters and the reparameterized draw for one context window.
struct LatentCode {
    Matrix mu;       // L x D'
    Matrix log_var;  // L x D'
    Matrix z;        // mu + exp(0.5 log_var) .* eps
    Matrix eps;      // the injected standard normal noise
};

/// All stochastic inputs of one forward pass, pinned so a pass can be replayed.
/// Empty optionals select the mean path (dropout off, z = mu).
struct PassNoise {
    std::optional<Matrix> vae_eps;   // L x D'
    std::optional<Matrix> enc_mask;  // L x D', entries in {0, 1/(1-p)}
    std::optional<Matrix> dec_mask;  // H x D'
};

/**
 * @brief Feature-space transformation wrapped around a frozen forecaster.
 *
 * Rows of a window are transformed independently: encode maps L x D to
 * L x d_latent, the forecaster runs channel-independently in latent space, and
 * decode maps H x d_latent back to H x D. Parameters are plain named tensors so
 * optimizers and checkpoints handle every kind uniformly.
 */
class Adapter {
public:
    Adapter(AdapterConfig cfg, const Rng& rng);

    const AdapterConfig& config() const { return cfg_; }
    AdapterKind kind() const { return cfg_.kind; }
    std::size_t d_in() const { return cfg_.d_in; }
    std::size_t d_latent() const { return cfg_.d_latent; }

    /// True for kinds whose forward pass injects randomness.
    bool stochastic() const;

    std::vector<optim::Param>& params() { return params_; }
    const std::vector<optim::Param>& params() const { return params_; }
    std::size_t param_index(const std::string& name) const;
    optim::Param& param(const std::string& name);
    const optim::Param& param(const std::string& name) const;

    /// Replaces parameter values; names and shapes must match exactly.
    void load_params(const std::vector<optim::Param>& params);

    /// Mean-path encoder (VAE kinds return the posterior mean).
    Matrix encode(const Matrix& x) const;
    /// Mean-path decoder.
    Matrix decode(const Matrix& z) const;

    /// Posterior parameters plus one reparameterized sample.
    LatentCode vae_encode(const Matrix& x, Rng& rng) const;

    /// encode -> channel-independent forecast -> decode with pinned noise.
    Matrix forward_with_noise(const fm::FrozenForecaster& f, const Matrix& x,
                              const PassNoise& noise) const;

    /// Stochastic kinds draw fresh noise from rng; deterministic kinds ignore it.
    Matrix forward(const fm::FrozenForecaster& f, const Matrix& x, Rng& rng) const;

    /// Dropout off, z = mu.
    Matrix forward_mean(const fm::FrozenForecaster& f, const Matrix& x) const;

private:
    void init_params(const Rng& rng);
    void require_input(const Matrix& x) const;

    AdapterConfig cfg_;
    std::vector<optim::Param> params_;
};

/// Fresh per-pass noise for the adapter's kind (empty for deterministic kinds).
PassNoise sample_pass_noise(const Adapter& ad, std::size_t L, std::size_t H, Rng& rng);

Adapter make_identity_adapter(std::size_t d);

/// PCA rotation fit on the given rows (train split), orthonormal columns.
Adapter make_pca_adapter(const Matrix& train_values, std::size_t d_latent);

/**
 * @brief Closed-form linear fit around a frozen linear forecaster.
 *
 * With residual A = Y - W^T X and bias block B = b 1^T, the recorded optimal
 * transform is (B^T A)^+ B^T B (lambda = 0) or (B^T A + lambda I)^{-1} B^T B
 * (lambda > 0). m_star = (B^T B)^+ B^T A is the stationary point of the
 * convex quadratic ||A - B M||_F^2 over decoder matrices M, and is what the
 * realized adapter is built from.
 */
struct ClosedFormFit {
    Matrix w_star;
    Matrix m_star;
    bool degenerate_bias = false;
};

ClosedFormFit fit_closed_form(const Matrix& x, const Matrix& y, const fm::LinearFm& f,
                              double lambda = 0.0);
/// Pooled fit over a window batch; equals the single-window formula applied to
/// the batch-mean residual because B is window-independent.
ClosedFormFit fit_closed_form(const data::WindowBatch& batch, const fm::LinearFm& f,
                              double lambda = 0.0);

/**
 * @brief Invertible realization of a closed-form fit.
 *
 * m_star is rank-deficient whenever D > 1, so the decoder is m_star + eps I
 * with eps = 1e-5 (1 + ||m_star||_F) and the encoder its exact inverse; the
 * composition reaches the optimal loss up to eps^2 ||B||_F^2. eps grows
 * tenfold on the rare singular draw.
 */
Adapter make_closed_form_adapter(const ClosedFormFit& fit);

/**
 * @brief Ensemble of forecast paths with per-cell quantile extraction.
 */
struct ForecastDistribution {
    std::vector<Matrix> samples;  // each H x D

    Matrix mean() const;
    /// Per-cell quantile by linear interpolation on the sorted samples.
    Matrix quantile(double q) const;
};

/// s forward passes with independent child generators; deterministic adapters
/// yield s identical paths.
ForecastDistribution mc_predict(const Adapter& ad, const fm::FrozenForecaster& f,
                                const Matrix& x, std::size_t s, Rng& rng);

}  // namespace tsadapt::adapters
