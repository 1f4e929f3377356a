#include "tsadapt/preprocess.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace tsadapt::data {

std::pair<Matrix, RevinState> revin_normalize(const Matrix& x, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("revin_normalize: eps must be positive");
    if (x.rows() == 0) throw std::invalid_argument("revin_normalize: empty context");
    const std::size_t L = x.rows(), D = x.cols();
    RevinState st;
    st.eps = eps;
    st.mean = Matrix(1, D, 0.0);
    st.std = Matrix(1, D, 0.0);
    for (std::size_t d = 0; d < D; ++d) {
        double m = 0.0;
        for (std::size_t i = 0; i < L; ++i) m += x(i, d);
        m /= static_cast<double>(L);
        double var = 0.0;
        for (std::size_t i = 0; i < L; ++i) {
            const double c = x(i, d) - m;
            var += c * c;
        }
        var /= static_cast<double>(L);
        st.mean(0, d) = m;
        st.std(0, d) = std::max(std::sqrt(var), eps);
    }
    Matrix out(L, D, 0.0);
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t d = 0; d < D; ++d)
            out(i, d) = (x(i, d) - st.mean(0, d)) / st.std(0, d);
    return {std::move(out), std::move(st)};
}

Matrix revin_denormalize(const Matrix& y, const RevinState& state) {
    if (y.cols() != state.mean.cols()) {
        throw std::invalid_argument("revin_denormalize: channel count mismatch, forecast " +
                                    y.shape_str() + " vs stats 1x" +
                                    std::to_string(state.mean.cols()));
    }
    Matrix out(y.rows(), y.cols(), 0.0);
    for (std::size_t i = 0; i < y.rows(); ++i)
        for (std::size_t d = 0; d < y.cols(); ++d)
            out(i, d) = y(i, d) * state.std(0, d) + state.mean(0, d);
    return out;
}

Scaler fit_scaler(ScalerKind kind, const Matrix& train_values) {
    if (train_values.rows() == 0) throw std::invalid_argument("fit_scaler: empty train split");
    const std::size_t n = train_values.rows(), D = train_values.cols();
    Scaler s;
    s.kind = kind;
    s.offset = Matrix(1, D, 0.0);
    s.divisor = Matrix(1, D, 1.0);
    for (std::size_t d = 0; d < D; ++d) {
        if (kind == ScalerKind::standard) {
            double m = 0.0;
            for (std::size_t i = 0; i < n; ++i) m += train_values(i, d);
            m /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double c = train_values(i, d) - m;
                var += c * c;
            }
            var /= static_cast<double>(n);
            s.offset(0, d) = m;
            s.divisor(0, d) = std::sqrt(var);
        } else {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
                lo = std::min(lo, train_values(i, d));
                hi = std::max(hi, train_values(i, d));
            }
            s.offset(0, d) = lo;
            s.divisor(0, d) = hi - lo;
        }
        if (s.divisor(0, d) <= 0.0) {
            std::cerr << "warning: channel " << d
                      << " has zero spread on the train split; scaling it by 1\n";
            s.divisor(0, d) = 1.0;
        }
    }
    return s;
}

namespace {

void require_channels(const Scaler& s, const Matrix& x, const char* who) {
    if (x.cols() != s.offset.cols()) {
        throw std::invalid_argument(std::string(who) + ": channel count mismatch, data " +
                                    x.shape_str() + " vs scaler 1x" +
                                    std::to_string(s.offset.cols()));
    }
}

}  // namespace

Matrix scaler_apply(const Scaler& s, const Matrix& x) {
    require_channels(s, x, "scaler_apply");
    Matrix out(x.rows(), x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t d = 0; d < x.cols(); ++d)
            out(i, d) = (x(i, d) - s.offset(0, d)) / s.divisor(0, d);
    return out;
}

Matrix scaler_invert(const Scaler& s, const Matrix& x) {
    require_channels(s, x, "scaler_invert");
    Matrix out(x.rows(), x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t d = 0; d < x.cols(); ++d)
            out(i, d) = x(i, d) * s.divisor(0, d) + s.offset(0, d);
    return out;
}

Pipeline fit_pipeline(const Matrix& values, std::size_t train_end, bool use_scaler,
                      ScalerKind kind, bool use_pca, bool use_revin) {
    if (train_end == 0 || train_end > values.rows()) {
        throw std::invalid_argument("fit_pipeline: train_end out of range");
    }
    Matrix train(train_end, values.cols(), 0.0);
    for (std::size_t i = 0; i < train_end; ++i)
        for (std::size_t d = 0; d < values.cols(); ++d) train(i, d) = values(i, d);

    Pipeline p;
    p.revin = use_revin;
    if (use_scaler) {
        p.scaler = fit_scaler(kind, train);
        train = scaler_apply(*p.scaler, train);
    }
    if (use_pca) {
        p.pca = num::pca_fit(train, values.cols());
    }
    return p;
}

Matrix pipeline_apply(const Pipeline& p, const Matrix& values) {
    Matrix out = values;
    if (p.scaler) out = scaler_apply(*p.scaler, out);
    if (p.pca) out = num::pca_transform(*p.pca, out);
    return out;
}

}  // namespace tsadapt::data
