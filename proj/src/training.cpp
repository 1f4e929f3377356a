#include "tsadapt/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "tsadapt/optimizer.hpp"
#include "tsadapt/preprocess.hpp"

namespace tsadapt::train {

namespace {

using adapters::Adapter;
using adapters::AdapterKind;
using optim::Tape;

constexpr double kLog2Pi = 1.83787706640934548356;
constexpr double kObsLogVarLimit = 8.0;

bool is_vae_kind(AdapterKind k) {
    return k == AdapterKind::linear_vae || k == AdapterKind::deep_vae;
}

bool gradient_trainable(AdapterKind k) {
    switch (k) {
        case AdapterKind::identity:
        case AdapterKind::pca:
        case AdapterKind::closed_form_linear:
            return false;
        default:
            return true;
    }
}

Tape::NodeId pleaf(const GraphRefs& g, const Adapter& ad, const char* name) {
    return g.params[ad.param_index(name)];
}

Tape::NodeId fm_on_tape(GraphRefs& g, Tape::NodeId z) {
    Tape& t = *g.tape;
    if (!g.fm_is_mlp) {
        return t.add_col_broadcast(t.matmul(g.fm_wt, z), g.fm_b);
    }
    Tape::NodeId h = t.relu(t.add_col_broadcast(t.matmul(g.fm_w1t, z), g.fm_b1));
    return t.add_col_broadcast(t.matmul(g.fm_w2t, h), g.fm_b2);
}

/// layers-1 ReLU stages mirroring Adapter's deep trunk.
Tape::NodeId deep_trunk_on_tape(GraphRefs& g, const Adapter& ad, Tape::NodeId x,
                                const std::string& prefix) {
    Tape& t = *g.tape;
    Tape::NodeId h = x;
    for (std::size_t i = 0; i + 1 < ad.config().layers; ++i) {
        const Tape::NodeId w = pleaf(g, ad, (prefix + "w" + std::to_string(i)).c_str());
        const Tape::NodeId b = pleaf(g, ad, (prefix + "b" + std::to_string(i)).c_str());
        h = t.relu(t.add_row_broadcast(t.matmul(h, w), b));
    }
    return h;
}

struct PosteriorNodes {
    Tape::NodeId mu = 0, lv = 0;
};

PosteriorNodes posterior_on_tape(GraphRefs& g, const Adapter& ad, Tape::NodeId ctx) {
    Tape& t = *g.tape;
    if (ad.kind() == AdapterKind::linear_vae) {
        return {t.matmul(ctx, pleaf(g, ad, "enc.mu.w")),
                t.matmul(ctx, pleaf(g, ad, "enc.lv.w"))};
    }
    Tape::NodeId h = deep_trunk_on_tape(g, ad, ctx, "enc.");
    return {t.add_row_broadcast(t.matmul(h, pleaf(g, ad, "enc.mu.w")),
                                pleaf(g, ad, "enc.mu.b")),
            t.add_row_broadcast(t.matmul(h, pleaf(g, ad, "enc.lv.w")),
                                pleaf(g, ad, "enc.lv.b"))};
}

Tape::NodeId encode_on_tape(GraphRefs& g, const Adapter& ad, Tape::NodeId ctx) {
    Tape& t = *g.tape;
    switch (ad.kind()) {
        case AdapterKind::identity:
        case AdapterKind::linear_dec_only:
            return ctx;
        case AdapterKind::pca:
            return t.matmul(t.add_row_broadcast(ctx, t.scale(pleaf(g, ad, "mean"), -1.0)),
                            pleaf(g, ad, "components"));
        case AdapterKind::closed_form_linear:
        case AdapterKind::linear_ae:
        case AdapterKind::dropout_linear_ae:
        case AdapterKind::linear_enc_only:
            return t.matmul(ctx, pleaf(g, ad, "enc.w"));
        default:
            throw std::logic_error("encode_on_tape: variational kinds use posterior_on_tape");
    }
}

struct DecodeNodes {
    Tape::NodeId y = 0;
    std::optional<Tape::NodeId> obs_lv;  // clamped per-cell log-variance
};

DecodeNodes decode_on_tape(GraphRefs& g, const Adapter& ad, Tape::NodeId z) {
    Tape& t = *g.tape;
    const bool auto_noise = ad.config().sigma2_auto;
    switch (ad.kind()) {
        case AdapterKind::identity:
        case AdapterKind::linear_enc_only:
            return {z, std::nullopt};
        case AdapterKind::pca:
            return {t.add_row_broadcast(t.matmul(z, t.transpose(pleaf(g, ad, "components"))),
                                        pleaf(g, ad, "mean")),
                    std::nullopt};
        case AdapterKind::closed_form_linear:
        case AdapterKind::linear_ae:
        case AdapterKind::dropout_linear_ae:
        case AdapterKind::linear_dec_only:
            return {t.matmul(z, pleaf(g, ad, "dec.w")), std::nullopt};
        case AdapterKind::linear_vae: {
            DecodeNodes out;
            out.y = t.matmul(z, pleaf(g, ad, "dec.w"));
            if (auto_noise) {
                out.obs_lv = t.clamp(t.matmul(z, pleaf(g, ad, "dec.lv.w")),
                                     -kObsLogVarLimit, kObsLogVarLimit);
            }
            return out;
        }
        case AdapterKind::deep_vae: {
            Tape::NodeId h = deep_trunk_on_tape(g, ad, z, "dec.");
            DecodeNodes out;
            out.y = t.add_row_broadcast(t.matmul(h, pleaf(g, ad, "dec.mu.w")),
                                        pleaf(g, ad, "dec.mu.b"));
            if (auto_noise) {
                out.obs_lv = t.clamp(
                    t.add_row_broadcast(t.matmul(h, pleaf(g, ad, "dec.lv.w")),
                                        pleaf(g, ad, "dec.lv.b")),
                    -kObsLogVarLimit, kObsLogVarLimit);
            }
            return out;
        }
    }
    throw std::logic_error("unreachable");
}

}  // namespace

GraphRefs make_graph(optim::Tape& t, const adapters::Adapter& ad,
                     const fm::FrozenForecaster& f) {
    GraphRefs g;
    g.tape = &t;
    for (const optim::Param& p : ad.params()) g.params.push_back(t.leaf(p.value));
    if (const auto* lin = dynamic_cast<const fm::LinearFm*>(&f)) {
        g.fm_is_mlp = false;
        g.fm_wt = t.leaf(lin->w().transpose());
        g.fm_b = t.leaf(lin->b());
    } else if (const auto* mlp = dynamic_cast<const fm::MlpFm*>(&f)) {
        g.fm_is_mlp = true;
        g.fm_w1t = t.leaf(mlp->w1().transpose());
        g.fm_b1 = t.leaf(mlp->b1());
        g.fm_w2t = t.leaf(mlp->w2().transpose());
        g.fm_b2 = t.leaf(mlp->b2());
    } else {
        throw std::runtime_error("gradient training requires a linear or mlp forecaster, got '" +
                                 f.name() + "'");
    }
    return g;
}

WindowLossNodes build_window_loss(GraphRefs& g, const adapters::Adapter& ad,
                                  const Matrix& x, const Matrix& y,
                                  const adapters::PassNoise& noise, const LossSettings& s) {
    Tape& t = *g.tape;
    const bool vae = is_vae_kind(ad.kind());
    if (vae && !ad.config().sigma2_auto && s.sigma2 <= 0.0) {
        throw std::invalid_argument("loss: sigma2 must be positive");
    }
    if (vae && s.beta < 0.0) throw std::invalid_argument("loss: beta must be >= 0");

    Matrix ctx_values = x;
    data::RevinState rev;
    if (s.revin) {
        auto norm = data::revin_normalize(x, s.revin_eps);
        ctx_values = std::move(norm.first);
        rev = std::move(norm.second);
    }
    const Tape::NodeId ctx = t.leaf(std::move(ctx_values));

    Tape::NodeId z = 0;
    PosteriorNodes post;
    if (vae) {
        post = posterior_on_tape(g, ad, ctx);
        z = noise.vae_eps ? t.gaussian_sample(post.mu, post.lv, *noise.vae_eps) : post.mu;
    } else {
        z = encode_on_tape(g, ad, ctx);
        if (noise.enc_mask) z = t.mul(z, t.leaf(*noise.enc_mask));
    }

    Tape::NodeId fmo = fm_on_tape(g, z);
    if (!vae && noise.dec_mask) fmo = t.mul(fmo, t.leaf(*noise.dec_mask));

    DecodeNodes dec = decode_on_tape(g, ad, fmo);
    Tape::NodeId yhat = dec.y;
    std::optional<Tape::NodeId> obs_lv = dec.obs_lv;
    if (s.revin) {
        yhat = t.add_row_broadcast(t.mul_row_broadcast(yhat, t.leaf(rev.std)),
                                   t.leaf(rev.mean));
        if (obs_lv) {
            Matrix log_std2(1, rev.std.cols(), 0.0);
            for (std::size_t d = 0; d < rev.std.cols(); ++d)
                log_std2(0, d) = 2.0 * std::log(rev.std(0, d));
            obs_lv = t.add_row_broadcast(*obs_lv, t.leaf(std::move(log_std2)));
        }
    }

    const Tape::NodeId res = t.sub(t.leaf(y), yhat);
    const Tape::NodeId sq = t.mul(res, res);

    WindowLossNodes out;
    const double cells = static_cast<double>(y.rows() * y.cols());
    if (!vae) {
        out.nll = t.sum(sq);
        out.total = out.nll;
        return out;
    }
    if (obs_lv) {
        const Tape::NodeId weighted = t.sum(t.mul(sq, t.exp(t.scale(*obs_lv, -1.0))));
        out.nll = t.add_scalar(t.scale(t.add(t.sum(*obs_lv), weighted), 0.5),
                               0.5 * cells * kLog2Pi);
    } else {
        out.nll = t.add_scalar(t.scale(t.sum(sq), 1.0 / (2.0 * s.sigma2)),
                               0.5 * cells * std::log(2.0 * 3.14159265358979323846 * s.sigma2));
    }
    const Tape::NodeId kl_cells =
        t.sub(t.add_scalar(t.add(t.mul(post.mu, post.mu), t.exp(post.lv)), -1.0), post.lv);
    out.kl = t.scale(t.sum(kl_cells), 0.5);
    out.total = t.add(out.nll, t.scale(*out.kl, s.beta));
    return out;
}

ElboParts vae_elbo_loss(const adapters::Adapter& ad, const fm::FrozenForecaster& f,
                        const Matrix& x, const Matrix& y, double beta, double sigma2,
                        Rng& rng) {
    if (!is_vae_kind(ad.kind())) {
        throw std::invalid_argument("vae_elbo_loss: adapter kind '" + to_string(ad.kind()) +
                                    "' has no evidence bound");
    }
    optim::Tape t;
    GraphRefs g = make_graph(t, ad, f);
    LossSettings s;
    s.beta = beta;
    s.sigma2 = sigma2;
    s.revin = false;
    adapters::PassNoise noise = adapters::sample_pass_noise(ad, x.rows(), f.horizon(), rng);
    WindowLossNodes nodes = build_window_loss(g, ad, x, y, noise, s);
    ElboParts parts;
    parts.total = t.value(nodes.total)(0, 0);
    parts.nll = t.value(nodes.nll)(0, 0);
    parts.kl = nodes.kl ? t.value(*nodes.kl)(0, 0) : 0.0;
    return parts;
}

namespace {

struct EpochEval {
    double loss = 0.0, nll = 0.0, kl = 0.0;
};

EpochEval deterministic_eval(const Adapter& ad, const fm::FrozenForecaster& f,
                             const data::WindowBatch& batch, const LossSettings& s) {
    EpochEval ev;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        optim::Tape t;
        GraphRefs g = make_graph(t, ad, f);
        WindowLossNodes nodes =
            build_window_loss(g, ad, batch.contexts[i], batch.targets[i], {}, s);
        ev.loss += t.value(nodes.total)(0, 0);
        ev.nll += t.value(nodes.nll)(0, 0);
        if (nodes.kl) ev.kl += t.value(*nodes.kl)(0, 0);
    }
    const double n = static_cast<double>(batch.size());
    ev.loss /= n;
    ev.nll /= n;
    ev.kl /= n;
    return ev;
}

}  // namespace

TrainResult train_adapter(adapters::Adapter ad, const fm::FrozenForecaster& f,
                          const data::WindowBatch& train, const data::WindowBatch& val,
                          const TrainingConfig& cfg, const Rng& rng) {
    if (!gradient_trainable(ad.kind())) {
        return TrainResult{std::move(ad), {}, {}, {}, {}, 0};
    }
    if (train.empty()) throw std::invalid_argument("train_adapter: empty training stream");
    if (cfg.batch_size == 0) throw std::invalid_argument("train_adapter: batch_size must be >= 1");
    if (cfg.epochs == 0) throw std::invalid_argument("train_adapter: epochs must be >= 1");

    const std::uint64_t fm_checksum = f.weight_checksum();
    const bool vae = is_vae_kind(ad.kind());
    const std::size_t n = train.size();
    const std::size_t L = train.contexts[0].rows();
    const std::size_t H = train.targets[0].rows();

    optim::Adam adam(cfg.lr);
    optim::OneCycle one_cycle(cfg.lr, cfg.epochs);
    optim::ReduceOnPlateau plateau(cfg.lr, cfg.patience, cfg.factor, cfg.min_lr);

    Rng shuffle_rng = rng.split(11);
    Rng noise_rng = rng.split(13);

    TrainResult result{std::move(ad), {}, {}, {}, {}, 0};
    Adapter& model = result.adapter;
    std::vector<optim::Param> best_params = model.params();
    double best_val = std::numeric_limits<double>::infinity();

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.scheduler == SchedulerKind::one_cycle) adam.set_lr(one_cycle.lr_at(epoch));

        Rng es = shuffle_rng.split(epoch);
        for (std::size_t i = n; i-- > 1;) {
            const std::size_t j = es.next_u64() % (i + 1);
            std::swap(order[i], order[j]);
        }
        Rng en = noise_rng.split(epoch);

        double epoch_loss = 0.0, epoch_nll = 0.0, epoch_kl = 0.0;
        for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
            const std::size_t hi = std::min(lo + cfg.batch_size, n);
            optim::Tape t;
            GraphRefs g = make_graph(t, model, f);
            optim::Tape::NodeId batch_total = 0;
            bool first = true;
            for (std::size_t k = lo; k < hi; ++k) {
                const std::size_t w = order[k];
                adapters::PassNoise noise = adapters::sample_pass_noise(model, L, H, en);
                WindowLossNodes nodes = build_window_loss(
                    g, model, train.contexts[w], train.targets[w], noise, cfg.loss);
                epoch_loss += t.value(nodes.total)(0, 0);
                epoch_nll += t.value(nodes.nll)(0, 0);
                if (nodes.kl) epoch_kl += t.value(*nodes.kl)(0, 0);
                batch_total = first ? nodes.total : t.add(batch_total, nodes.total);
                first = false;
            }
            batch_total = t.scale(batch_total, 1.0 / static_cast<double>(hi - lo));
            t.backward(batch_total);
            for (std::size_t p = 0; p < model.params().size(); ++p) {
                model.params()[p].grad = t.grad(g.params[p]);
            }
            adam.step(model.params());
        }
        epoch_loss /= static_cast<double>(n);
        epoch_nll /= static_cast<double>(n);
        epoch_kl /= static_cast<double>(n);

        if (!std::isfinite(epoch_loss)) {
            throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                     std::to_string(epoch));
        }

        EpochEval vl = val.empty() ? EpochEval{epoch_loss, epoch_nll, epoch_kl}
                                   : deterministic_eval(model, f, val, cfg.loss);
        if (!std::isfinite(vl.loss)) {
            throw std::runtime_error("training diverged: non-finite validation loss at epoch " +
                                     std::to_string(epoch));
        }

        result.train_loss.push_back(epoch_loss);
        result.val_loss.push_back(vl.loss);
        if (vae) {
            result.train_nll.push_back(epoch_nll);
            result.train_kl.push_back(epoch_kl);
        }

        if (vl.loss < best_val) {
            best_val = vl.loss;
            best_params = model.params();
            result.best_epoch = epoch;
        }
        if (cfg.scheduler == SchedulerKind::reduce_on_plateau) {
            adam.set_lr(plateau.observe(vl.loss));
        }
    }

    model.load_params(best_params);
    if (f.weight_checksum() != fm_checksum) {
        throw std::logic_error("train_adapter: frozen forecaster weights changed");
    }
    return result;
}

}  // namespace tsadapt::train
