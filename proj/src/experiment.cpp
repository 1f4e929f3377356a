#include "tsadapt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <utility>

#include <json.hpp>

#include "tsadapt/adapter.hpp"
#include "tsadapt/forecaster.hpp"
#include "tsadapt/preprocess.hpp"
#include "tsadapt/training.hpp"

namespace tsadapt::cli {

using adapters::Adapter;
using adapters::AdapterConfig;
using adapters::AdapterKind;
using adapters::ForecastDistribution;
using data::Pipeline;
using data::Split;
using data::TimeSeriesDataset;
using data::WindowBatch;
using fm::FrozenForecaster;
using fm::LinearFm;
using fm::MlpFm;
using num::Matrix;
using num::Rng;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Matrix row_slice(const Matrix& m, std::size_t lo, std::size_t hi) {
    Matrix out(hi - lo, m.cols(), 0.0);
    for (std::size_t i = lo; i < hi; ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i - lo, j) = m(i, j);
    return out;
}

/// Rows [0, lo) and [hi, end) stacked, skipping the held-out block.
Matrix rows_outside(const Matrix& m, std::size_t lo, std::size_t hi, std::size_t end) {
    Matrix out(lo + (end - hi), m.cols(), 0.0);
    for (std::size_t i = 0; i < lo; ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
    for (std::size_t i = hi; i < end; ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(lo + i - hi, j) = m(i, j);
    return out;
}

/// Deterministic forecast with the same per-window normalization protocol the
/// training loss used.
Matrix predict_mean(const Adapter& ad, const FrozenForecaster& f, const Matrix& x, bool revin,
                    double eps) {
    if (!revin) return ad.forward_mean(f, x);
    const auto [xn, st] = data::revin_normalize(x, eps);
    return data::revin_denormalize(ad.forward_mean(f, xn), st);
}

ForecastDistribution predict_dist(const Adapter& ad, const FrozenForecaster& f, const Matrix& x,
                                  std::size_t s, Rng& rng, bool revin, double eps) {
    if (!revin) return adapters::mc_predict(ad, f, x, s, rng);
    const auto [xn, st] = data::revin_normalize(x, eps);
    ForecastDistribution dist = adapters::mc_predict(ad, f, xn, s, rng);
    for (Matrix& sample : dist.samples) sample = data::revin_denormalize(sample, st);
    return dist;
}

double batch_mse(const Adapter& ad, const FrozenForecaster& f, const WindowBatch& batch,
                 bool revin, double eps) {
    double acc = 0.0;
    std::size_t cells = 0;
    for (std::size_t w = 0; w < batch.size(); ++w) {
        const Matrix res =
            batch.targets[w] - predict_mean(ad, f, batch.contexts[w], revin, eps);
        const double fro = res.frobenius_norm();
        acc += fro * fro;
        cells += res.rows() * res.cols();
    }
    return acc / static_cast<double>(cells);
}

struct Prepared {
    TimeSeriesDataset ds;  // model-space values
    Pipeline pipe;
};

Prepared prepare(const ExperimentConfig& cfg) {
    Prepared p{build_dataset(cfg), {}};
    const bool use_scaler = cfg.data.scaler != "none";
    const data::ScalerKind kind =
        cfg.data.scaler == "minmax" ? data::ScalerKind::minmax : data::ScalerKind::standard;
    p.pipe = data::fit_pipeline(p.ds.values, p.ds.split.train_end, use_scaler, kind,
                                cfg.data.pca, cfg.training.revin);
    p.ds.values = data::pipeline_apply(p.pipe, p.ds.values);
    return p;
}

std::unique_ptr<FrozenForecaster> build_forecaster(const ExperimentConfig& cfg) {
    if (cfg.forecaster.type == "mlp") {
        return std::make_unique<MlpFm>(Rng(cfg.forecaster.seed), cfg.data.context,
                                       cfg.data.horizon, cfg.forecaster.hidden);
    }
    return std::make_unique<LinearFm>(
        fm::random_linear_fm(Rng(cfg.forecaster.seed), cfg.data.context, cfg.data.horizon));
}

Adapter build_adapter(const ExperimentConfig& cfg, const Prepared& p, const WindowBatch& train,
                      const FrozenForecaster& f) {
    const std::size_t d = p.ds.channels();
    const std::size_t dl = cfg.adapter.d_latent == 0 ? d : cfg.adapter.d_latent;
    const AdapterKind kind = adapters::adapter_kind_from_string(cfg.adapter.kind);
    if (kind == AdapterKind::identity) return adapters::make_identity_adapter(d);
    if (kind == AdapterKind::pca) {
        return adapters::make_pca_adapter(row_slice(p.ds.values, 0, p.ds.split.train_end), dl);
    }
    if (kind == AdapterKind::closed_form_linear) {
        const auto* lin = dynamic_cast<const LinearFm*>(&f);
        if (lin == nullptr) {
            throw std::invalid_argument(
                "closed-form adapter requires a linear forecaster, got '" + f.name() + "'");
        }
        return adapters::make_closed_form_adapter(adapters::fit_closed_form(train, *lin));
    }
    AdapterConfig acfg;
    acfg.kind = kind;
    acfg.d_in = d;
    acfg.d_latent = dl;
    acfg.dropout_p = cfg.adapter.dropout_p;
    acfg.hidden = cfg.adapter.hidden;
    acfg.layers = cfg.adapter.layers;
    acfg.sigma2_auto = cfg.adapter.sigma2_auto;
    return Adapter(acfg, Rng(cfg.run.seed));
}

train::TrainingConfig training_config(const ExperimentConfig& cfg) {
    train::TrainingConfig t;
    t.epochs = cfg.training.epochs;
    t.batch_size = cfg.training.batch_size;
    t.lr = cfg.training.lr;
    if (cfg.training.scheduler == "constant") t.scheduler = train::SchedulerKind::constant;
    else if (cfg.training.scheduler == "one_cycle") t.scheduler = train::SchedulerKind::one_cycle;
    else t.scheduler = train::SchedulerKind::reduce_on_plateau;
    t.patience = cfg.training.patience;
    t.factor = cfg.training.factor;
    t.min_lr = cfg.training.min_lr;
    t.loss.beta = cfg.adapter.beta;
    t.loss.sigma2 = cfg.adapter.sigma2;
    t.loss.revin = cfg.training.revin;
    return t;
}

EvalOutcome evaluate_adapter(const Adapter& ad, const FrozenForecaster& f,
                             const WindowBatch& test, bool revin, double eps,
                             std::size_t s_samples, std::uint64_t seed) {
    if (test.empty()) throw std::invalid_argument("evaluation: test split yields no windows");
    std::vector<Matrix> preds;
    preds.reserve(test.size());
    for (std::size_t w = 0; w < test.size(); ++w)
        preds.push_back(predict_mean(ad, f, test.contexts[w], revin, eps));

    EvalOutcome out;
    out.metrics = eval::evaluate_forecasts(preds, test.targets);
    if (ad.stochastic() && s_samples >= 20) {
        Rng mc = Rng(seed).split(17);
        std::vector<ForecastDistribution> dists;
        dists.reserve(test.size());
        for (std::size_t w = 0; w < test.size(); ++w)
            dists.push_back(predict_dist(ad, f, test.contexts[w], s_samples, mc, revin, eps));
        out.reliability =
            eval::empirical_coverage(dists, test.targets, eval::default_quantile_levels());
    }
    return out;
}

}  // namespace

TimeSeriesDataset build_dataset(const ExperimentConfig& cfg) {
    if (cfg.data.source == "csv") {
        if (cfg.data.csv_path.empty()) {
            throw std::invalid_argument("config: [data] csv_path is required when source = csv");
        }
        return data::load_csv(cfg.data.csv_path, cfg.data.date_column);
    }
    const auto mode = cfg.data.synthetic_mode == "uncorrelated"
                          ? data::SyntheticMode::uncorrelated
                          : data::SyntheticMode::correlated;
    return data::generate_synthetic(Rng(cfg.run.seed), mode, cfg.data.length,
                                    cfg.data.signal_scale, cfg.data.test_offset);
}

LinearExperimentSummary run_linear_experiment(data::SyntheticMode mode, std::size_t n_trials,
                                              std::uint64_t seed, std::size_t L, std::size_t H) {
    if (n_trials == 0) throw std::invalid_argument("linear experiment: n_trials must be >= 1");
    const bool uncorrelated = mode == data::SyntheticMode::uncorrelated;
    // Weak-amplitude regime keeps the untransformed forecaster error dominated
    // by the transform mismatch rather than by the noise floor.
    const double scale = uncorrelated ? 0.05 : 0.2;
    const Rng root(seed);

    const TimeSeriesDataset ds = data::generate_synthetic(root.split(1), mode, 1600, scale);
    const WindowBatch train = data::make_windows(ds, Split::train, L, H, 2);
    const WindowBatch test = data::make_windows(ds, Split::test, L, H, 1);

    const Adapter identity = adapters::make_identity_adapter(ds.channels());
    const Adapter pca =
        adapters::make_pca_adapter(row_slice(ds.values, 0, ds.split.train_end), 5);

    LinearExperimentSummary s;
    s.mode = uncorrelated ? "uncorrelated" : "correlated";
    s.rows.reserve(n_trials);
    std::vector<double> mi, mp, mc;
    mi.reserve(n_trials);
    mp.reserve(n_trials);
    mc.reserve(n_trials);
    for (std::size_t t = 0; t < n_trials; ++t) {
        const LinearFm f = fm::random_linear_fm(root.split(1000 + t), L, H);
        const Adapter closed =
            adapters::make_closed_form_adapter(adapters::fit_closed_form(train, f));
        LinearTrialRow row;
        row.trial = t;
        row.mse_identity = batch_mse(identity, f, test, false, 0.0);
        row.mse_pca = batch_mse(pca, f, test, false, 0.0);
        row.mse_closed = batch_mse(closed, f, test, false, 0.0);
        mi.push_back(row.mse_identity);
        mp.push_back(row.mse_pca);
        mc.push_back(row.mse_closed);
        s.rows.push_back(row);
    }
    s.median_identity = median(std::move(mi));
    s.median_pca = median(std::move(mp));
    s.median_closed = median(std::move(mc));
    return s;
}

std::string to_csv(const LinearExperimentSummary& s) {
    std::string out = "trial,mse_identity,mse_pca,mse_closed\n";
    for (const LinearTrialRow& r : s.rows) {
        out += std::to_string(r.trial) + "," + fmt(r.mse_identity) + "," + fmt(r.mse_pca) + "," +
               fmt(r.mse_closed) + "\n";
    }
    out += "median," + fmt(s.median_identity) + "," + fmt(s.median_pca) + "," +
           fmt(s.median_closed) + "\n";
    return out;
}

void check_orderings(const LinearExperimentSummary& s) {
    const std::string values = " (identity " + fmt(s.median_identity) + ", pca " +
                               fmt(s.median_pca) + ", closed-form " + fmt(s.median_closed) + ")";
    if (s.mode == "uncorrelated") {
        if (!(s.median_closed <= s.median_identity / 5.0)) {
            throw std::runtime_error(
                "linear experiment: closed-form median is not 5x below identity" + values);
        }
        if (!(std::abs(s.median_pca - s.median_identity) <= 0.05 * s.median_identity)) {
            throw std::runtime_error(
                "linear experiment: pca median deviates more than 5% from identity" + values);
        }
        return;
    }
    if (!(s.median_closed < s.median_identity && s.median_pca < s.median_identity)) {
        throw std::runtime_error(
            "linear experiment: adapters do not both beat the identity median" + values);
    }
    if (!(s.median_pca <= 2.0 * s.median_closed)) {
        throw std::runtime_error(
            "linear experiment: pca median is not within 2x of closed-form" + values);
    }
}

std::string to_json(const RunRecord& r) {
    nlohmann::ordered_json j;
    j["command"] = r.command;
    j["config_hash"] = r.config_hash;
    j["config"] = r.config_text;
    j["seed"] = r.seed;
    j["adapter_kind"] = r.adapter_kind;
    j["best_epoch"] = r.best_epoch;
    j["identity_mse"] = r.identity_mse;
    j["metrics"] = nlohmann::ordered_json::parse(eval::to_json(r.metrics));
    if (r.reliability.has_value()) {
        j["reliability"] = nlohmann::ordered_json::parse(eval::to_json(*r.reliability));
    } else {
        j["reliability"] = nullptr;
    }
    j["train_loss"] = r.train_loss;
    j["val_loss"] = r.val_loss;
    j["train_nll"] = r.train_nll;
    j["train_kl"] = r.train_kl;
    return j.dump(2) + "\n";
}

std::string command_record_json(const std::string& command, const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["config_hash"] = config_hash(cfg);
    j["config"] = serialize_config(cfg);
    return j.dump(2) + "\n";
}

double kfold_cv_mse(const ExperimentConfig& cfg) {
    const std::size_t k = cfg.training.k_folds;
    if (k < 2) {
        throw std::invalid_argument("k-fold selection: k_folds must be >= 2, got " +
                                    std::to_string(k));
    }
    const Prepared p = prepare(cfg);
    const auto f = build_forecaster(cfg);
    const std::size_t L = cfg.data.context, H = cfg.data.horizon;
    const WindowBatch pool_train =
        data::make_windows(p.ds, Split::train, L, H, cfg.data.train_stride);
    const WindowBatch pool_val = data::make_windows(p.ds, Split::train, L, H,
                                                    cfg.data.eval_stride);
    const std::size_t train_len = p.ds.split.train_end;
    const train::TrainingConfig tcfg = training_config(cfg);
    const AdapterKind kind = adapters::adapter_kind_from_string(cfg.adapter.kind);
    const std::size_t dl =
        cfg.adapter.d_latent == 0 ? p.ds.channels() : cfg.adapter.d_latent;

    const auto select = [&](const WindowBatch& pool, auto keep) {
        WindowBatch out;
        for (std::size_t w = 0; w < pool.size(); ++w) {
            if (!keep(pool.starts[w], pool.starts[w] + L + H)) continue;
            out.contexts.push_back(pool.contexts[w]);
            out.targets.push_back(pool.targets[w]);
            out.starts.push_back(pool.starts[w]);
        }
        return out;
    };

    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t lo = i * train_len / k;
        const std::size_t hi = (i + 1) * train_len / k;
        const WindowBatch fold_train = select(
            pool_train, [&](std::size_t s, std::size_t e) { return e <= lo || s >= hi; });
        const WindowBatch fold_val = select(
            pool_val, [&](std::size_t s, std::size_t e) { return s >= lo && e <= hi; });
        if (fold_train.empty() || fold_val.empty()) {
            throw std::invalid_argument(
                "k-fold selection: fold " + std::to_string(i) +
                " yields no windows; the train region is too short for " + std::to_string(k) +
                " folds");
        }

        // Row-fit kinds must not see the held-out fold either.
        Adapter ad = kind == AdapterKind::pca
                         ? adapters::make_pca_adapter(
                               rows_outside(p.ds.values, lo, hi, train_len), dl)
                         : build_adapter(cfg, p, fold_train, *f);
        train::TrainResult res = train::train_adapter(std::move(ad), *f, fold_train, fold_val,
                                                      tcfg, Rng(cfg.run.seed).split(9000 + i));
        acc += batch_mse(res.adapter, *f, fold_val, cfg.training.revin, tcfg.loss.revin_eps);
    }
    return acc / static_cast<double>(k);
}

TrainOutcome run_training(const ExperimentConfig& cfg) {
    const Prepared p = prepare(cfg);
    const std::size_t L = cfg.data.context, H = cfg.data.horizon;
    const auto f = build_forecaster(cfg);
    const WindowBatch train = data::make_windows(p.ds, Split::train, L, H, cfg.data.train_stride);
    const WindowBatch val = data::make_windows(p.ds, Split::val, L, H, cfg.data.eval_stride);
    const WindowBatch test = data::make_windows(p.ds, Split::test, L, H, cfg.data.eval_stride);

    Adapter ad = build_adapter(cfg, p, train, *f);
    const train::TrainingConfig tcfg = training_config(cfg);
    train::TrainResult tr =
        train::train_adapter(std::move(ad), *f, train, val, tcfg, Rng(cfg.run.seed));

    RunRecord rec;
    rec.command = "train";
    rec.config_hash = config_hash(cfg);
    rec.config_text = serialize_config(cfg);
    rec.seed = cfg.run.seed;
    rec.adapter_kind = cfg.adapter.kind;
    rec.train_loss = std::move(tr.train_loss);
    rec.val_loss = std::move(tr.val_loss);
    rec.train_nll = std::move(tr.train_nll);
    rec.train_kl = std::move(tr.train_kl);
    rec.best_epoch = tr.best_epoch;

    const bool revin = cfg.training.revin;
    const double eps = tcfg.loss.revin_eps;
    EvalOutcome ev =
        evaluate_adapter(tr.adapter, *f, test, revin, eps, cfg.run.s_samples, cfg.run.seed);
    rec.metrics = std::move(ev.metrics);
    rec.reliability = std::move(ev.reliability);
    rec.identity_mse = batch_mse(adapters::make_identity_adapter(p.ds.channels()), *f, test,
                                 revin, eps);

    TrainOutcome out{std::move(rec),
                     io::make_checkpoint(tr.adapter, *f, p.pipe, config_hash(cfg))};
    return out;
}

EvalOutcome run_evaluation(const io::Checkpoint& ckpt, const ExperimentConfig& cfg,
                           std::size_t s_samples) {
    TimeSeriesDataset ds = build_dataset(cfg);
    if (ds.channels() != ckpt.adapter.d_in) {
        throw std::invalid_argument("evaluation: checkpoint expects " +
                                    std::to_string(ckpt.adapter.d_in) + " channels, dataset has " +
                                    std::to_string(ds.channels()));
    }
    ds.values = data::pipeline_apply(ckpt.pipeline, ds.values);
    const Adapter ad = io::restore_adapter(ckpt);
    const auto f = io::restore_forecaster(ckpt);
    const WindowBatch test = data::make_windows(ds, Split::test, cfg.data.context,
                                                cfg.data.horizon, cfg.data.eval_stride);
    return evaluate_adapter(ad, *f, test, ckpt.pipeline.revin, ckpt.pipeline.revin_eps,
                            s_samples, cfg.run.seed);
}

std::string sweep_components_csv(const ExperimentConfig& cfg, std::vector<std::size_t> widths) {
    if (widths.empty()) {
        const std::size_t d = build_dataset(cfg).channels();
        for (std::size_t v = 1; v <= d; ++v) widths.push_back(v);
    }
    for (const std::size_t v : widths) {
        if (v == 0) throw std::invalid_argument("component sweep: widths must be >= 1");
    }
    std::sort(widths.begin(), widths.end());
    widths.erase(std::unique(widths.begin(), widths.end()), widths.end());

    // Identity reference uses the same data, forecaster and protocol.
    ExperimentConfig base = cfg;
    base.adapter.kind = "identity";
    base.adapter.d_latent = 0;
    const TrainOutcome id = run_training(base);
    std::string out = "d_latent,mse,mae,cv_mse\n";
    out += "identity," + fmt(id.record.metrics.mse) + "," + fmt(id.record.metrics.mae) + "," +
           fmt(kfold_cv_mse(base)) + "\n";
    for (const std::size_t v : widths) {
        ExperimentConfig c = cfg;
        c.adapter.d_latent = v;
        const TrainOutcome t = run_training(c);
        out += std::to_string(v) + "," + fmt(t.record.metrics.mse) + "," +
               fmt(t.record.metrics.mae) + "," + fmt(kfold_cv_mse(c)) + "\n";
    }
    return out;
}

std::string sweep_beta_sigma_csv(const ExperimentConfig& cfg) {
    const AdapterKind kind = adapters::adapter_kind_from_string(cfg.adapter.kind);
    if (kind != AdapterKind::linear_vae && kind != AdapterKind::deep_vae) {
        throw std::invalid_argument("beta/sigma sweep requires a variational adapter kind, got '" +
                                    cfg.adapter.kind + "'");
    }
    std::vector<double> betas = cfg.experiment.beta_sweep;
    std::vector<double> logs = cfg.experiment.log_sigma2_sweep;
    std::sort(betas.begin(), betas.end());
    std::sort(logs.begin(), logs.end());

    std::string out = "beta,log_sigma2,mse,ece,final_kl,cv_mse\n";
    for (const double beta : betas) {
        for (const double ls : logs) {
            ExperimentConfig c = cfg;
            c.adapter.beta = beta;
            c.adapter.sigma2 = std::exp(ls);
            c.adapter.sigma2_auto = false;
            const TrainOutcome t = run_training(c);
            const double ece = t.record.reliability ? t.record.reliability->ece : -1.0;
            const double kl = t.record.train_kl.empty() ? 0.0 : t.record.train_kl.back();
            out += fmt(beta) + "," + fmt(ls) + "," + fmt(t.record.metrics.mse) + "," + fmt(ece) +
                   "," + fmt(kl) + "," + fmt(kfold_cv_mse(c)) + "\n";
        }
        if (cfg.experiment.include_auto) {
            ExperimentConfig c = cfg;
            c.adapter.beta = beta;
            c.adapter.sigma2_auto = true;
            const TrainOutcome t = run_training(c);
            const double ece = t.record.reliability ? t.record.reliability->ece : -1.0;
            const double kl = t.record.train_kl.empty() ? 0.0 : t.record.train_kl.back();
            out += fmt(beta) + ",auto," + fmt(t.record.metrics.mse) + "," + fmt(ece) + "," +
                   fmt(kl) + "," + fmt(kfold_cv_mse(c)) + "\n";
        }
    }
    return out;
}

std::string export_latent_csv(const io::Checkpoint& ckpt, const ExperimentConfig& cfg) {
    TimeSeriesDataset ds = build_dataset(cfg);
    if (ds.channels() != ckpt.adapter.d_in) {
        throw std::invalid_argument("latent export: checkpoint expects " +
                                    std::to_string(ckpt.adapter.d_in) + " channels, dataset has " +
                                    std::to_string(ds.channels()));
    }
    ds.values = data::pipeline_apply(ckpt.pipeline, ds.values);
    const Adapter ad = io::restore_adapter(ckpt);
    const std::size_t L = cfg.data.context, H = cfg.data.horizon;
    const WindowBatch train = data::make_windows(ds, Split::train, L, H, cfg.data.train_stride);
    const WindowBatch test = data::make_windows(ds, Split::test, L, H, cfg.data.eval_stride);

    const std::size_t n = train.size() + test.size();
    const std::size_t width = L * ad.d_latent();
    Matrix flat(n, width, 0.0);
    auto encode_into = [&](const WindowBatch& batch, std::size_t at) {
        for (std::size_t w = 0; w < batch.size(); ++w) {
            Matrix x = batch.contexts[w];
            if (ckpt.pipeline.revin) {
                x = data::revin_normalize(x, ckpt.pipeline.revin_eps).first;
            }
            const Matrix z = ad.encode(x);
            for (std::size_t i = 0; i < z.rows(); ++i)
                for (std::size_t j = 0; j < z.cols(); ++j)
                    flat(at + w, i * z.cols() + j) = z(i, j);
        }
    };
    encode_into(train, 0);
    encode_into(test, train.size());

    const num::PcaModel proj = num::pca_fit(flat, 2);
    const Matrix coords = num::pca_transform(proj, flat);

    std::string out = "x,y,split,window\n";
    for (std::size_t w = 0; w < train.size(); ++w) {
        out += fmt(coords(w, 0)) + "," + fmt(coords(w, 1)) + ",train," +
               std::to_string(train.starts[w]) + "\n";
    }
    for (std::size_t w = 0; w < test.size(); ++w) {
        out += fmt(coords(train.size() + w, 0)) + "," + fmt(coords(train.size() + w, 1)) +
               ",test," + std::to_string(test.starts[w]) + "\n";
    }
    return out;
}

}  // namespace tsadapt::cli
