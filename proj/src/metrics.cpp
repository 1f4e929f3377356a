#include "tsadapt/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <json.hpp>

namespace tsadapt::eval {

namespace {

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    }
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

double mse(const Matrix& pred, const Matrix& target) {
    require_same_shape("mse", pred, target);
    double acc = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            const double d = pred(r, c) - target(r, c);
            acc += d * d;
        }
    }
    return acc / static_cast<double>(pred.rows() * pred.cols());
}

double mae(const Matrix& pred, const Matrix& target) {
    require_same_shape("mae", pred, target);
    double acc = 0.0;
    for (std::size_t r = 0; r < pred.rows(); ++r) {
        for (std::size_t c = 0; c < pred.cols(); ++c) {
            acc += std::abs(pred(r, c) - target(r, c));
        }
    }
    return acc / static_cast<double>(pred.rows() * pred.cols());
}

MetricsReport evaluate_forecasts(const std::vector<Matrix>& preds,
                                 const std::vector<Matrix>& targets) {
    if (preds.size() != targets.size()) {
        throw std::invalid_argument("evaluate_forecasts: " + std::to_string(preds.size()) +
                                    " predictions vs " + std::to_string(targets.size()) +
                                    " targets");
    }
    if (preds.empty()) throw std::invalid_argument("evaluate_forecasts: no windows");

    const std::size_t H = preds[0].rows();
    const std::size_t D = preds[0].cols();
    MetricsReport rep;
    rep.n_windows = preds.size();
    rep.mse_per_step.assign(H, 0.0);
    rep.mae_per_step.assign(H, 0.0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        require_same_shape("evaluate_forecasts", preds[i], targets[i]);
        require_same_shape("evaluate_forecasts", preds[i], preds[0]);
        for (std::size_t h = 0; h < H; ++h) {
            for (std::size_t d = 0; d < D; ++d) {
                const double diff = preds[i](h, d) - targets[i](h, d);
                rep.mse_per_step[h] += diff * diff;
                rep.mae_per_step[h] += std::abs(diff);
            }
        }
    }
    const double per_step_cells = static_cast<double>(preds.size() * D);
    for (std::size_t h = 0; h < H; ++h) {
        rep.mse_per_step[h] /= per_step_cells;
        rep.mae_per_step[h] /= per_step_cells;
        rep.mse += rep.mse_per_step[h];
        rep.mae += rep.mae_per_step[h];
    }
    rep.mse /= static_cast<double>(H);
    rep.mae /= static_cast<double>(H);
    return rep;
}

std::vector<double> default_quantile_levels() {
    std::vector<double> q(10);
    for (std::size_t i = 0; i < 10; ++i) q[i] = 0.05 + 0.1 * static_cast<double>(i);
    return q;
}

ReliabilityTable empirical_coverage(const std::vector<adapters::ForecastDistribution>& dists,
                                    const std::vector<Matrix>& targets,
                                    const std::vector<double>& q_levels) {
    if (dists.size() != targets.size() || dists.empty()) {
        throw std::invalid_argument("empirical_coverage: " + std::to_string(dists.size()) +
                                    " distributions vs " + std::to_string(targets.size()) +
                                    " targets");
    }
    if (q_levels.empty()) throw std::invalid_argument("empirical_coverage: no quantile levels");
    for (std::size_t i = 0; i < q_levels.size(); ++i) {
        if (q_levels[i] <= 0.0 || q_levels[i] >= 1.0 ||
            (i > 0 && q_levels[i] <= q_levels[i - 1])) {
            throw std::invalid_argument(
                "empirical_coverage: levels must be strictly increasing inside (0, 1)");
        }
    }
    for (const auto& d : dists) {
        if (d.samples.size() < 20) {
            throw std::invalid_argument("empirical_coverage: needs at least 20 samples, got " +
                                        std::to_string(d.samples.size()));
        }
    }

    const std::size_t H = targets[0].rows();
    const std::size_t D = targets[0].cols();
    ReliabilityTable table;
    table.levels = q_levels;
    table.coverage.assign(q_levels.size(), 0.0);
    table.coverage_per_step.assign(q_levels.size(), std::vector<double>(H, 0.0));

    for (std::size_t qi = 0; qi < q_levels.size(); ++qi) {
        for (std::size_t i = 0; i < dists.size(); ++i) {
            require_same_shape("empirical_coverage", targets[i], targets[0]);
            const Matrix qm = dists[i].quantile(q_levels[qi]);
            require_same_shape("empirical_coverage", qm, targets[i]);
            for (std::size_t h = 0; h < H; ++h) {
                for (std::size_t d = 0; d < D; ++d) {
                    if (targets[i](h, d) <= qm(h, d)) {
                        table.coverage_per_step[qi][h] += 1.0;
                    }
                }
            }
        }
        double total = 0.0;
        for (std::size_t h = 0; h < H; ++h) {
            total += table.coverage_per_step[qi][h];
            table.coverage_per_step[qi][h] /= static_cast<double>(dists.size() * D);
        }
        table.coverage[qi] = total / static_cast<double>(dists.size() * H * D);
        table.ece += std::abs(table.coverage[qi] - q_levels[qi]);
    }
    table.ece /= static_cast<double>(q_levels.size());
    return table;
}

std::string to_csv(const MetricsReport& r) {
    std::string out = "metric,step,value\n";
    out += "mse,all," + fmt(r.mse) + "\n";
    out += "mae,all," + fmt(r.mae) + "\n";
    for (std::size_t h = 0; h < r.mse_per_step.size(); ++h) {
        out += "mse," + std::to_string(h) + "," + fmt(r.mse_per_step[h]) + "\n";
    }
    for (std::size_t h = 0; h < r.mae_per_step.size(); ++h) {
        out += "mae," + std::to_string(h) + "," + fmt(r.mae_per_step[h]) + "\n";
    }
    return out;
}

std::string to_csv(const ReliabilityTable& t) {
    std::string out = "level,step,coverage\n";
    for (std::size_t qi = 0; qi < t.levels.size(); ++qi) {
        out += fmt(t.levels[qi]) + ",all," + fmt(t.coverage[qi]) + "\n";
        for (std::size_t h = 0; h < t.coverage_per_step[qi].size(); ++h) {
            out += fmt(t.levels[qi]) + "," + std::to_string(h) + "," +
                   fmt(t.coverage_per_step[qi][h]) + "\n";
        }
    }
    out += "ece,all," + fmt(t.ece) + "\n";
    return out;
}

std::string to_json(const MetricsReport& r) {
    nlohmann::ordered_json j;
    j["mse"] = r.mse;
    j["mae"] = r.mae;
    j["mse_per_step"] = r.mse_per_step;
    j["mae_per_step"] = r.mae_per_step;
    j["n_windows"] = r.n_windows;
    return j.dump(2);
}

std::string to_json(const ReliabilityTable& t) {
    nlohmann::ordered_json j;
    j["levels"] = t.levels;
    j["coverage"] = t.coverage;
    j["coverage_per_step"] = t.coverage_per_step;
    j["ece"] = t.ece;
    return j.dump(2);
}

}  // namespace tsadapt::eval
