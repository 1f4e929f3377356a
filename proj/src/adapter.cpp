#include "tsadapt/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "tsadapt/linalg.hpp"

namespace tsadapt::adapters {

AdapterKind adapter_kind_from_string(const std::string& s) {
    if (s == "identity") return AdapterKind::identity;
    if (s == "pca") return AdapterKind::pca;
    if (s == "closed_form_linear") return AdapterKind::closed_form_linear;
    if (s == "linear_ae") return AdapterKind::linear_ae;
    if (s == "linear_enc_only") return AdapterKind::linear_enc_only;
    if (s == "linear_dec_only") return AdapterKind::linear_dec_only;
    if (s == "dropout_linear_ae") return AdapterKind::dropout_linear_ae;
    if (s == "linear_vae") return AdapterKind::linear_vae;
    if (s == "deep_vae") return AdapterKind::deep_vae;
    throw std::invalid_argument("unknown adapter kind '" + s + "'");
}

std::string to_string(AdapterKind k) {
    switch (k) {
        case AdapterKind::identity: return "identity";
        case AdapterKind::pca: return "pca";
        case AdapterKind::closed_form_linear: return "closed_form_linear";
        case AdapterKind::linear_ae: return "linear_ae";
        case AdapterKind::linear_enc_only: return "linear_enc_only";
        case AdapterKind::linear_dec_only: return "linear_dec_only";
        case AdapterKind::dropout_linear_ae: return "dropout_linear_ae";
        case AdapterKind::linear_vae: return "linear_vae";
        case AdapterKind::deep_vae: return "deep_vae";
    }
    throw std::logic_error("unreachable");
}

namespace {

bool is_vae_kind(AdapterKind k) {
    return k == AdapterKind::linear_vae || k == AdapterKind::deep_vae;
}

Matrix add_row(const Matrix& x, const Matrix& row) {
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) += row(0, j);
    return out;
}

Matrix sub_row(const Matrix& x, const Matrix& row) {
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) -= row(0, j);
    return out;
}

Matrix relu_mat(Matrix x) {
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            if (x(i, j) < 0.0) x(i, j) = 0.0;
    return x;
}

}  // namespace

Adapter::Adapter(AdapterConfig cfg, const Rng& rng) : cfg_(cfg) {
    if (cfg_.d_in == 0) throw std::invalid_argument("adapter: d_in must be >= 1");
    if (cfg_.kind == AdapterKind::identity) cfg_.d_latent = cfg_.d_in;
    if (cfg_.d_latent == 0) throw std::invalid_argument("adapter: d_latent must be >= 1");
    if (cfg_.d_latent > cfg_.d_in) {
        throw std::invalid_argument("adapter: d_latent " + std::to_string(cfg_.d_latent) +
                                    " must not exceed d_in " + std::to_string(cfg_.d_in));
    }
    if ((cfg_.kind == AdapterKind::linear_enc_only ||
         cfg_.kind == AdapterKind::linear_dec_only) &&
        cfg_.d_latent != cfg_.d_in) {
        throw std::invalid_argument(
            "adapter: one-sided linear kinds keep the channel count, so d_latent must "
            "equal d_in");
    }
    if (cfg_.kind == AdapterKind::dropout_linear_ae &&
        (cfg_.dropout_p < 0.0 || cfg_.dropout_p >= 1.0)) {
        throw std::invalid_argument("adapter: dropout_p must lie in [0, 1)");
    }
    if (cfg_.kind == AdapterKind::deep_vae) {
        if (cfg_.layers < 2) throw std::invalid_argument("adapter: deep_vae needs layers >= 2");
        if (cfg_.hidden == 0) throw std::invalid_argument("adapter: hidden must be >= 1");
    }
    if (cfg_.sigma2_auto && !is_vae_kind(cfg_.kind)) {
        throw std::invalid_argument(
            "adapter: learned observation noise requires a variational kind");
    }
    init_params(rng);
}

void Adapter::init_params(const Rng& rng) {
    const std::size_t D = cfg_.d_in, Dl = cfg_.d_latent;
    Rng r = rng.split(7);
    auto glorot = [&r](std::size_t fi, std::size_t fo) {
        return num::glorot_uniform(r, fi, fo);
    };
    auto zeros = [](std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 0.0); };

    switch (cfg_.kind) {
        case AdapterKind::identity:
            break;
        case AdapterKind::pca: {
            Matrix comps(D, Dl, 0.0);
            for (std::size_t j = 0; j < Dl; ++j) comps(j, j) = 1.0;
            params_.emplace_back("mean", zeros(1, D));
            params_.emplace_back("components", std::move(comps));
            break;
        }
        case AdapterKind::closed_form_linear:
            params_.emplace_back("enc.w", Matrix::identity(D));
            params_.emplace_back("dec.w", Matrix::identity(D));
            break;
        case AdapterKind::linear_ae:
        case AdapterKind::dropout_linear_ae:
            params_.emplace_back("enc.w", glorot(D, Dl));
            params_.emplace_back("dec.w", glorot(Dl, D));
            break;
        case AdapterKind::linear_enc_only:
            params_.emplace_back("enc.w", glorot(D, D));
            break;
        case AdapterKind::linear_dec_only:
            params_.emplace_back("dec.w", glorot(D, D));
            break;
        case AdapterKind::linear_vae:
            params_.emplace_back("enc.mu.w", glorot(D, Dl));
            params_.emplace_back("enc.lv.w", zeros(D, Dl));
            params_.emplace_back("dec.w", glorot(Dl, D));
            if (cfg_.sigma2_auto) params_.emplace_back("dec.lv.w", zeros(Dl, D));
            break;
        case AdapterKind::deep_vae: {
            const std::size_t Hn = cfg_.hidden;
            std::size_t in = D;
            for (std::size_t i = 0; i + 1 < cfg_.layers; ++i) {
                params_.emplace_back("enc.w" + std::to_string(i), glorot(in, Hn));
                params_.emplace_back("enc.b" + std::to_string(i), zeros(1, Hn));
                in = Hn;
            }
            params_.emplace_back("enc.mu.w", glorot(Hn, Dl));
            params_.emplace_back("enc.mu.b", zeros(1, Dl));
            params_.emplace_back("enc.lv.w", zeros(Hn, Dl));
            params_.emplace_back("enc.lv.b", zeros(1, Dl));
            in = Dl;
            for (std::size_t i = 0; i + 1 < cfg_.layers; ++i) {
                params_.emplace_back("dec.w" + std::to_string(i), glorot(in, Hn));
                params_.emplace_back("dec.b" + std::to_string(i), zeros(1, Hn));
                in = Hn;
            }
            params_.emplace_back("dec.mu.w", glorot(Hn, D));
            params_.emplace_back("dec.mu.b", zeros(1, D));
            if (cfg_.sigma2_auto) {
                params_.emplace_back("dec.lv.w", zeros(Hn, D));
                params_.emplace_back("dec.lv.b", zeros(1, D));
            }
            break;
        }
    }
}

bool Adapter::stochastic() const {
    return cfg_.kind == AdapterKind::dropout_linear_ae || is_vae_kind(cfg_.kind);
}

std::size_t Adapter::param_index(const std::string& name) const {
    for (std::size_t i = 0; i < params_.size(); ++i)
        if (params_[i].name == name) return i;
    throw std::invalid_argument("adapter: no parameter named '" + name + "'");
}

optim::Param& Adapter::param(const std::string& name) { return params_[param_index(name)]; }

const optim::Param& Adapter::param(const std::string& name) const {
    return params_[param_index(name)];
}

void Adapter::load_params(const std::vector<optim::Param>& params) {
    if (params.size() != params_.size()) {
        throw std::invalid_argument("adapter: expected " + std::to_string(params_.size()) +
                                    " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (params[i].name != params_[i].name ||
            params[i].value.rows() != params_[i].value.rows() ||
            params[i].value.cols() != params_[i].value.cols()) {
            throw std::invalid_argument("adapter: parameter " + std::to_string(i) +
                                        " mismatch: have '" + params_[i].name + "' " +
                                        params_[i].value.shape_str() + ", got '" +
                                        params[i].name + "' " + params[i].value.shape_str());
        }
        params_[i].value = params[i].value;
        params_[i].zero_grad();
    }
}

void Adapter::require_input(const Matrix& x) const {
    if (x.cols() != cfg_.d_in) {
        throw std::invalid_argument("adapter: input has " + std::to_string(x.cols()) +
                                    " channels, adapter expects " + std::to_string(cfg_.d_in));
    }
}

namespace {

/// layers-1 ReLU stages with the given name prefix ("enc." or "dec.").
Matrix deep_trunk(const Adapter& ad, const Matrix& x, const char* prefix) {
    Matrix h = x;
    for (std::size_t i = 0; i + 1 < ad.config().layers; ++i) {
        const std::string tag = std::string(prefix) + "w" + std::to_string(i);
        const std::string btag = std::string(prefix) + "b" + std::to_string(i);
        h = relu_mat(add_row(num::matmul(h, ad.param(tag).value), ad.param(btag).value));
    }
    return h;
}

struct Posterior {
    Matrix mu, log_var;
};

Posterior posterior_of(const Adapter& ad, const Matrix& x) {
    if (ad.kind() == AdapterKind::linear_vae) {
        return {num::matmul(x, ad.param("enc.mu.w").value),
                num::matmul(x, ad.param("enc.lv.w").value)};
    }
    Matrix h = deep_trunk(ad, x, "enc.");
    return {add_row(num::matmul(h, ad.param("enc.mu.w").value), ad.param("enc.mu.b").value),
            add_row(num::matmul(h, ad.param("enc.lv.w").value), ad.param("enc.lv.b").value)};
}

}  // namespace

Matrix Adapter::encode(const Matrix& x) const {
    require_input(x);
    switch (cfg_.kind) {
        case AdapterKind::identity:
        case AdapterKind::linear_dec_only:
            return x;
        case AdapterKind::pca:
            return num::matmul(sub_row(x, param("mean").value), param("components").value);
        case AdapterKind::closed_form_linear:
        case AdapterKind::linear_ae:
        case AdapterKind::dropout_linear_ae:
        case AdapterKind::linear_enc_only:
            return num::matmul(x, param("enc.w").value);
        case AdapterKind::linear_vae:
        case AdapterKind::deep_vae:
            return posterior_of(*this, x).mu;
    }
    throw std::logic_error("unreachable");
}

Matrix Adapter::decode(const Matrix& z) const {
    if (z.cols() != cfg_.d_latent) {
        throw std::invalid_argument("adapter: latent has " + std::to_string(z.cols()) +
                                    " channels, adapter expects " +
                                    std::to_string(cfg_.d_latent));
    }
    switch (cfg_.kind) {
        case AdapterKind::identity:
        case AdapterKind::linear_enc_only:
            return z;
        case AdapterKind::pca:
            return add_row(num::matmul(z, param("components").value.transpose()),
                           param("mean").value);
        case AdapterKind::closed_form_linear:
        case AdapterKind::linear_ae:
        case AdapterKind::dropout_linear_ae:
        case AdapterKind::linear_dec_only:
        case AdapterKind::linear_vae:
            return num::matmul(z, param("dec.w").value);
        case AdapterKind::deep_vae: {
            Matrix h = deep_trunk(*this, z, "dec.");
            return add_row(num::matmul(h, param("dec.mu.w").value), param("dec.mu.b").value);
        }
    }
    throw std::logic_error("unreachable");
}

LatentCode Adapter::vae_encode(const Matrix& x, Rng& rng) const {
    if (!is_vae_kind(cfg_.kind)) {
        throw std::invalid_argument("vae_encode: adapter kind '" + to_string(cfg_.kind) +
                                    "' has no posterior");
    }
    require_input(x);
    Posterior p = posterior_of(*this, x);
    LatentCode code;
    code.eps = Matrix(p.mu.rows(), p.mu.cols(), 0.0);
    for (std::size_t i = 0; i < code.eps.rows(); ++i)
        for (std::size_t j = 0; j < code.eps.cols(); ++j) code.eps(i, j) = rng.normal();
    code.z = p.mu;
    for (std::size_t i = 0; i < code.z.rows(); ++i)
        for (std::size_t j = 0; j < code.z.cols(); ++j)
            code.z(i, j) += std::exp(0.5 * p.log_var(i, j)) * code.eps(i, j);
    code.mu = std::move(p.mu);
    code.log_var = std::move(p.log_var);
    return code;
}

Matrix Adapter::forward_with_noise(const fm::FrozenForecaster& f, const Matrix& x,
                                   const PassNoise& noise) const {
    require_input(x);
    Matrix z;
    if (is_vae_kind(cfg_.kind)) {
        Posterior p = posterior_of(*this, x);
        z = std::move(p.mu);
        if (noise.vae_eps) {
            const Matrix& eps = *noise.vae_eps;
            if (eps.rows() != z.rows() || eps.cols() != z.cols()) {
                throw std::invalid_argument("adapter forward: noise shape " + eps.shape_str() +
                                            " does not match latent " + z.shape_str());
            }
            for (std::size_t i = 0; i < z.rows(); ++i)
                for (std::size_t j = 0; j < z.cols(); ++j)
                    z(i, j) += std::exp(0.5 * p.log_var(i, j)) * eps(i, j);
        }
    } else {
        z = encode(x);
        if (noise.enc_mask) z = num::hadamard(z, *noise.enc_mask);
    }
    Matrix fmo = fm::apply_channel_independent(f, z);
    if (!is_vae_kind(cfg_.kind) && noise.dec_mask) fmo = num::hadamard(fmo, *noise.dec_mask);
    return decode(fmo);
}

Matrix Adapter::forward(const fm::FrozenForecaster& f, const Matrix& x, Rng& rng) const {
    return forward_with_noise(f, x, sample_pass_noise(*this, x.rows(), f.horizon(), rng));
}

Matrix Adapter::forward_mean(const fm::FrozenForecaster& f, const Matrix& x) const {
    return forward_with_noise(f, x, PassNoise{});
}

PassNoise sample_pass_noise(const Adapter& ad, std::size_t L, std::size_t H, Rng& rng) {
    PassNoise noise;
    const std::size_t Dl = ad.d_latent();
    if (ad.kind() == AdapterKind::dropout_linear_ae) {
        const double p = ad.config().dropout_p;
        const double keep_scale = 1.0 / (1.0 - p);
        auto draw_mask = [&](std::size_t rows) {
            Matrix m(rows, Dl, 0.0);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < Dl; ++j)
                    m(i, j) = rng.next_double() >= p ? keep_scale : 0.0;
            return m;
        };
        noise.enc_mask = draw_mask(L);
        noise.dec_mask = draw_mask(H);
    } else if (ad.kind() == AdapterKind::linear_vae || ad.kind() == AdapterKind::deep_vae) {
        Matrix eps(L, Dl, 0.0);
        for (std::size_t i = 0; i < L; ++i)
            for (std::size_t j = 0; j < Dl; ++j) eps(i, j) = rng.normal();
        noise.vae_eps = std::move(eps);
    }
    return noise;
}

Adapter make_identity_adapter(std::size_t d) {
    AdapterConfig cfg;
    cfg.kind = AdapterKind::identity;
    cfg.d_in = d;
    cfg.d_latent = d;
    return Adapter(cfg, Rng(0));
}

Adapter make_pca_adapter(const Matrix& train_values, std::size_t d_latent) {
    num::PcaModel model = num::pca_fit(train_values, d_latent);
    AdapterConfig cfg;
    cfg.kind = AdapterKind::pca;
    cfg.d_in = train_values.cols();
    cfg.d_latent = d_latent;
    Adapter ad(cfg, Rng(0));
    ad.param("mean").value = model.mean;
    ad.param("components").value = model.components;
    return ad;
}

namespace {

ClosedFormFit fit_from_residual(const Matrix& a, const Matrix& b, double lambda) {
    const std::size_t D = a.cols();
    if (lambda < 0.0) throw std::invalid_argument("fit_closed_form: lambda must be >= 0");
    if (b.max_abs() == 0.0) {
        std::cerr << "warning: forecaster bias is zero, so the loss does not depend on the "
                     "transform; returning identity\n";
        return {Matrix::identity(D), Matrix::identity(D), true};
    }
    Matrix big_b(a.rows(), D, 0.0);
    for (std::size_t h = 0; h < a.rows(); ++h)
        for (std::size_t d = 0; d < D; ++d) big_b(h, d) = b(h, 0);
    const Matrix bta = num::matmul(big_b.transpose(), a);
    const Matrix btb = num::matmul(big_b.transpose(), big_b);
    ClosedFormFit fit;
    fit.m_star = num::matmul(num::pinv(btb), bta);
    fit.w_star = lambda == 0.0 ? num::matmul(num::pinv(bta), btb)
                               : num::matmul(num::regularized_inverse(bta, lambda), btb);
    return fit;
}

Matrix residual(const Matrix& x, const Matrix& y, const fm::LinearFm& f) {
    if (x.rows() != f.context_length() || y.rows() != f.horizon() || x.cols() != y.cols()) {
        throw std::invalid_argument("fit_closed_form: window " + x.shape_str() + " -> " +
                                    y.shape_str() + " does not match forecaster " +
                                    std::to_string(f.context_length()) + " -> " +
                                    std::to_string(f.horizon()));
    }
    Matrix a = y;
    a -= num::matmul(f.w().transpose(), x);
    return a;
}

}  // namespace

ClosedFormFit fit_closed_form(const Matrix& x, const Matrix& y, const fm::LinearFm& f,
                              double lambda) {
    return fit_from_residual(residual(x, y, f), f.b(), lambda);
}

ClosedFormFit fit_closed_form(const data::WindowBatch& batch, const fm::LinearFm& f,
                              double lambda) {
    if (batch.empty()) throw std::invalid_argument("fit_closed_form: empty window batch");
    Matrix mean_a = residual(batch.contexts[0], batch.targets[0], f);
    for (std::size_t i = 1; i < batch.size(); ++i) {
        mean_a += residual(batch.contexts[i], batch.targets[i], f);
    }
    mean_a *= 1.0 / static_cast<double>(batch.size());
    return fit_from_residual(mean_a, f.b(), lambda);
}

Adapter make_closed_form_adapter(const ClosedFormFit& fit) {
    const std::size_t D = fit.m_star.rows();
    if (fit.m_star.cols() != D) {
        throw std::invalid_argument("make_closed_form_adapter: m_star must be square");
    }
    AdapterConfig cfg;
    cfg.kind = AdapterKind::closed_form_linear;
    cfg.d_in = D;
    cfg.d_latent = D;
    Adapter ad(cfg, Rng(0));

    double eps = 1e-5 * (1.0 + fit.m_star.frobenius_norm());
    for (int attempt = 0; attempt < 8; ++attempt) {
        Matrix dec = fit.m_star;
        for (std::size_t i = 0; i < D; ++i) dec(i, i) += eps;
        try {
            Matrix enc = num::solve(dec, Matrix::identity(D));
            ad.param("enc.w").value = std::move(enc);
            ad.param("dec.w").value = std::move(dec);
            return ad;
        } catch (const std::runtime_error&) {
            eps *= 10.0;
        }
    }
    throw std::runtime_error("make_closed_form_adapter: decoder stayed singular");
}

Matrix ForecastDistribution::mean() const {
    if (samples.empty()) throw std::logic_error("forecast distribution: no samples");
    Matrix out(samples[0].rows(), samples[0].cols(), 0.0);
    for (const Matrix& s : samples) out += s;
    out *= 1.0 / static_cast<double>(samples.size());
    return out;
}

Matrix ForecastDistribution::quantile(double q) const {
    if (samples.empty()) throw std::logic_error("forecast distribution: no samples");
    if (q < 0.0 || q > 1.0) {
        throw std::invalid_argument("quantile level must lie in [0, 1]");
    }
    const std::size_t S = samples.size();
    const double pos = q * static_cast<double>(S - 1);
    const std::size_t k = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    Matrix out(samples[0].rows(), samples[0].cols(), 0.0);
    std::vector<double> cell(S);
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t j = 0; j < out.cols(); ++j) {
            for (std::size_t s = 0; s < S; ++s) cell[s] = samples[s](i, j);
            std::sort(cell.begin(), cell.end());
            out(i, j) = k + 1 < S ? (1.0 - frac) * cell[k] + frac * cell[k + 1] : cell[k];
        }
    }
    return out;
}

ForecastDistribution mc_predict(const Adapter& ad, const fm::FrozenForecaster& f,
                                const Matrix& x, std::size_t s, Rng& rng) {
    if (s == 0) throw std::invalid_argument("mc_predict: s must be >= 1");
    ForecastDistribution dist;
    dist.samples.reserve(s);
    Rng base = rng.split(rng.next_u64());
    for (std::size_t i = 0; i < s; ++i) {
        Rng child = base.split(i);
        dist.samples.push_back(
            ad.forward_with_noise(f, x, sample_pass_noise(ad, x.rows(), f.horizon(), child)));
    }
    return dist;
}

}  // namespace tsadapt::adapters
