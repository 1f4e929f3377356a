#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tsadapt/adapter.hpp"
#include "tsadapt/matrix.hpp"
#include "tsadapt/metrics.hpp"
#include "tsadapt/rng.hpp"

using tsadapt::adapters::ForecastDistribution;
using tsadapt::eval::default_quantile_levels;
using tsadapt::eval::empirical_coverage;
using tsadapt::eval::evaluate_forecasts;
using tsadapt::eval::mae;
using tsadapt::eval::MetricsReport;
using tsadapt::eval::mse;
using tsadapt::eval::ReliabilityTable;
using tsadapt::eval::to_csv;
using tsadapt::eval::to_json;
using tsadapt::num::Matrix;
using tsadapt::num::Rng;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
    Matrix m(r, c, 0.0);
    for (auto& v : m.data()) v = rng.uniform(-3.0, 3.0);
    return m;
}

/// Gaussian sampling setup shared by the calibration tests: iid N(0,1)
/// targets, predictive samples N(0, sample_std^2).
ReliabilityTable gaussian_table(double sample_std, std::size_t n_windows, std::size_t s) {
    Rng rng(100);
    std::vector<ForecastDistribution> dists(n_windows);
    std::vector<Matrix> targets;
    targets.reserve(n_windows);
    for (std::size_t w = 0; w < n_windows; ++w) {
        Matrix tgt(4, 3, 0.0);
        for (auto& v : tgt.data()) v = rng.normal();
        targets.push_back(tgt);
        for (std::size_t k = 0; k < s; ++k) {
            Matrix smp(4, 3, 0.0);
            for (auto& v : smp.data()) v = sample_std * rng.normal();
            dists[w].samples.push_back(smp);
        }
    }
    return empirical_coverage(dists, targets, default_quantile_levels());
}

}  // namespace

TEST_CASE("error metrics have exact closed-form values") {
    Rng rng(1);
    const Matrix a = random_matrix(rng, 5, 4);
    CHECK(mse(a, a) == 0.0);
    CHECK(mae(a, a) == 0.0);

    const Matrix ones(5, 4, 1.0);
    CHECK(mse(a + ones, a) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(mae(a + ones, a) == doctest::Approx(1.0).epsilon(1e-15));

    const Matrix pred = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    const Matrix zero(2, 2, 0.0);
    CHECK(mse(pred, zero) == doctest::Approx(7.5).epsilon(1e-15));  // (1+4+9+16)/4
    CHECK(mae(pred, zero) == doctest::Approx(2.5).epsilon(1e-15));

    CHECK_THROWS_WITH_AS(mse(Matrix(2, 2, 0.0), Matrix(2, 3, 0.0)),
                         doctest::Contains("shape mismatch"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(mae(Matrix(2, 2, 0.0), Matrix(3, 2, 0.0)),
                         doctest::Contains("shape mismatch"), std::invalid_argument);
}

TEST_CASE("mse is invariant under a permutation of the cells") {
    Rng rng(2);
    const Matrix pred = random_matrix(rng, 3, 4);
    const Matrix tgt = random_matrix(rng, 3, 4);

    std::vector<double> pd = pred.data(), td = tgt.data();
    std::vector<std::size_t> perm(pd.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    Rng shuffle(3);
    for (std::size_t i = perm.size(); i-- > 1;) std::swap(perm[i], perm[shuffle.next_u64() % (i + 1)]);

    Matrix pred2(3, 4, 0.0), tgt2(3, 4, 0.0);
    for (std::size_t i = 0; i < perm.size(); ++i) {
        pred2.data()[i] = pd[perm[i]];
        tgt2.data()[i] = td[perm[i]];
    }
    CHECK(mse(pred2, tgt2) == doctest::Approx(mse(pred, tgt)).epsilon(1e-12));
    CHECK(mae(pred2, tgt2) == doctest::Approx(mae(pred, tgt)).epsilon(1e-12));
}

TEST_CASE("forecast reports aggregate per-step means") {
    Rng rng(4);
    std::vector<Matrix> preds, targets;
    for (int w = 0; w < 6; ++w) {
        preds.push_back(random_matrix(rng, 3, 2));
        targets.push_back(random_matrix(rng, 3, 2));
    }
    const MetricsReport r = evaluate_forecasts(preds, targets);
    CHECK(r.n_windows == 6);
    REQUIRE(r.mse_per_step.size() == 3);
    REQUIRE(r.mae_per_step.size() == 3);

    // Per-step value equals the mean over windows and channels of that row.
    for (std::size_t h = 0; h < 3; ++h) {
        double acc = 0.0;
        for (int w = 0; w < 6; ++w)
            for (std::size_t d = 0; d < 2; ++d) {
                const double diff = preds[w](h, d) - targets[w](h, d);
                acc += diff * diff;
            }
        CHECK(r.mse_per_step[h] == doctest::Approx(acc / 12.0).epsilon(1e-12));
    }

    double step_mean = 0.0;
    for (const double v : r.mse_per_step) step_mean += v;
    CHECK(r.mse == doctest::Approx(step_mean / 3.0).epsilon(1e-12));
    double mae_mean = 0.0;
    for (const double v : r.mae_per_step) mae_mean += v;
    CHECK(r.mae == doctest::Approx(mae_mean / 3.0).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(evaluate_forecasts({}, {}), doctest::Contains("no windows"),
                         std::invalid_argument);
    CHECK_THROWS_WITH_AS(evaluate_forecasts(preds, {targets[0]}),
                         doctest::Contains("predictions vs"), std::invalid_argument);
}

TEST_CASE("coverage of a degenerate underestimating distribution is zero") {
    // All samples sit strictly below every target: no quantile ever covers.
    std::vector<ForecastDistribution> dists(3);
    std::vector<Matrix> targets;
    for (int w = 0; w < 3; ++w) {
        for (int k = 0; k < 25; ++k) dists[w].samples.push_back(Matrix(2, 2, -5.0 - k));
        targets.push_back(Matrix(2, 2, 1.0));
    }
    const ReliabilityTable t = empirical_coverage(dists, targets, default_quantile_levels());
    REQUIRE(t.levels.size() == 10);
    double level_mean = 0.0;
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(t.coverage[i] == 0.0);
        level_mean += t.levels[i];
    }
    CHECK(t.ece == doctest::Approx(level_mean / 10.0).epsilon(1e-12));  // = 0.5
}

TEST_CASE("well-specified gaussian samples are calibrated") {
    const ReliabilityTable t = gaussian_table(1.0, 900, 100);
    CHECK(t.ece < 0.02);
    // Coverage grows with the nominal level.
    for (std::size_t i = 1; i < t.levels.size(); ++i)
        CHECK(t.coverage[i] >= t.coverage[i - 1]);
    REQUIRE(!t.coverage_per_step.empty());
    CHECK(t.coverage_per_step[0].size() == 4);
}

TEST_CASE("underdispersed samples are flagged by coverage and ece") {
    const ReliabilityTable half = gaussian_table(0.5, 900, 100);
    const std::vector<double> levels = default_quantile_levels();
    const std::size_t i90 = 9;  // level 0.95
    CHECK(levels[i90] == doctest::Approx(0.95));
    CHECK(half.coverage[i90] < 0.90);

    const ReliabilityTable quarter = gaussian_table(0.25, 900, 100);
    CHECK(quarter.ece > 0.10);
    CHECK(quarter.ece > half.ece);
}

TEST_CASE("reliability inputs are validated") {
    std::vector<ForecastDistribution> dists(1);
    for (int k = 0; k < 19; ++k) dists[0].samples.push_back(Matrix(1, 1, 0.0));
    const std::vector<Matrix> targets = {Matrix(1, 1, 0.0)};
    CHECK_THROWS_WITH_AS(empirical_coverage(dists, targets, default_quantile_levels()),
                         doctest::Contains("at least 20 samples"), std::invalid_argument);

    dists[0].samples.push_back(Matrix(1, 1, 0.0));
    CHECK_THROWS_WITH_AS(empirical_coverage(dists, targets, {0.5, 0.5}),
                         doctest::Contains("strictly increasing"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(empirical_coverage(dists, targets, {0.0, 0.5}),
                         doctest::Contains("strictly increasing"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(empirical_coverage(dists, targets, {}),
                         doctest::Contains("no quantile levels"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(empirical_coverage(dists, {}, {0.5}),
                         doctest::Contains("distributions vs"), std::invalid_argument);
}

TEST_CASE("reports serialize to parseable csv and json") {
    Rng rng(5);
    const std::vector<Matrix> preds = {random_matrix(rng, 2, 2)};
    const std::vector<Matrix> targets = {random_matrix(rng, 2, 2)};
    const MetricsReport r = evaluate_forecasts(preds, targets);

    const std::string csv = to_csv(r);
    CHECK(csv.find("metric,step,value") == 0);
    CHECK(csv.find("mse") != std::string::npos);
    CHECK(csv.find("mae") != std::string::npos);

    const std::string js = to_json(r);
    CHECK(js.find("\"mse\"") != std::string::npos);
    CHECK(js.find("\"n_windows\"") != std::string::npos);

    const ReliabilityTable t = gaussian_table(1.0, 30, 25);
    const std::string tcsv = to_csv(t);
    CHECK(tcsv.find("level,step,coverage") == 0);
    CHECK(tcsv.find("ece,all,") != std::string::npos);
    const std::string tjs = to_json(t);
    CHECK(tjs.find("\"ece\"") != std::string::npos);
    CHECK(tjs.find("\"levels\"") != std::string::npos);
}
