#include "tsadapt/forecaster.hpp"

#include <stdexcept>

#include "tsadapt/hash.hpp"

namespace tsadapt::fm {

namespace {

std::uint64_t checksum_matrices(std::initializer_list<const Matrix*> ms) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const Matrix* m : ms) {
        for (std::size_t i = 0; i < m->rows(); ++i) {
            for (std::size_t j = 0; j < m->cols(); ++j) {
                const double v = (*m)(i, j);
                h = fnv1a64(&v, sizeof v, h);
            }
        }
    }
    return h;
}

void require_context(const FrozenForecaster& f, std::size_t got) {
    if (got != f.context_length()) {
        throw std::invalid_argument("forecast_one: context length " + std::to_string(got) +
                                    " does not match model context length " +
                                    std::to_string(f.context_length()));
    }
}

}  // namespace

LinearFm::LinearFm(Matrix w, Matrix b) : w_(std::move(w)), b_(std::move(b)) {
    if (b_.cols() != 1 || b_.rows() != w_.cols()) {
        throw std::invalid_argument("linear forecaster: bias must be " +
                                    std::to_string(w_.cols()) + "x1, got " + b_.shape_str());
    }
    if (w_.rows() == 0 || w_.cols() == 0) {
        throw std::invalid_argument("linear forecaster: empty weight matrix");
    }
}

std::vector<double> LinearFm::forecast_one(const std::vector<double>& context) const {
    require_context(*this, context.size());
    const std::size_t L = w_.rows(), H = w_.cols();
    std::vector<double> out(H);
    for (std::size_t h = 0; h < H; ++h) {
        double acc = b_(h, 0);
        for (std::size_t l = 0; l < L; ++l) acc += w_(l, h) * context[l];
        out[h] = acc;
    }
    return out;
}

std::uint64_t LinearFm::weight_checksum() const { return checksum_matrices({&w_, &b_}); }

LinearFm random_linear_fm(const Rng& rng, std::size_t L, std::size_t H) {
    if (L == 0 || H == 0) throw std::invalid_argument("random_linear_fm: L and H must be >= 1");
    Rng wr = rng.split(0);
    Rng br = rng.split(1);
    return LinearFm(num::glorot_uniform(wr, L, H), num::glorot_uniform(br, H, 1));
}

MlpFm::MlpFm(const Rng& rng, std::size_t L, std::size_t H, std::size_t hidden) {
    if (L == 0 || H == 0 || hidden == 0) {
        throw std::invalid_argument("mlp forecaster: L, H and hidden must be >= 1");
    }
    Rng r1 = rng.split(0), r2 = rng.split(1), r3 = rng.split(2), r4 = rng.split(3);
    w1_ = num::glorot_uniform(r1, L, hidden);
    b1_ = num::glorot_uniform(r2, hidden, 1);
    w2_ = num::glorot_uniform(r3, hidden, H);
    b2_ = num::glorot_uniform(r4, H, 1);
}

MlpFm::MlpFm(Matrix w1, Matrix b1, Matrix w2, Matrix b2)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {
    if (w1_.rows() == 0 || w1_.cols() == 0 || w2_.cols() == 0) {
        throw std::invalid_argument("mlp forecaster: empty weight matrix");
    }
    if (b1_.cols() != 1 || b1_.rows() != w1_.cols() || w2_.rows() != w1_.cols() ||
        b2_.cols() != 1 || b2_.rows() != w2_.cols()) {
        throw std::invalid_argument("mlp forecaster: inconsistent weight shapes " +
                                    w1_.shape_str() + ", " + b1_.shape_str() + ", " +
                                    w2_.shape_str() + ", " + b2_.shape_str());
    }
}

std::vector<double> MlpFm::forecast_one(const std::vector<double>& context) const {
    require_context(*this, context.size());
    const std::size_t L = w1_.rows(), M = w1_.cols(), H = w2_.cols();
    std::vector<double> hid(M);
    for (std::size_t m = 0; m < M; ++m) {
        double acc = b1_(m, 0);
        for (std::size_t l = 0; l < L; ++l) acc += w1_(l, m) * context[l];
        hid[m] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> out(H);
    for (std::size_t h = 0; h < H; ++h) {
        double acc = b2_(h, 0);
        for (std::size_t m = 0; m < M; ++m) acc += w2_(m, h) * hid[m];
        out[h] = acc;
    }
    return out;
}

std::uint64_t MlpFm::weight_checksum() const {
    return checksum_matrices({&w1_, &b1_, &w2_, &b2_});
}

Matrix apply_channel_independent(const FrozenForecaster& f, const Matrix& x) {
    if (x.rows() != f.context_length()) {
        throw std::invalid_argument("apply_channel_independent: context has " +
                                    std::to_string(x.rows()) + " rows, model expects " +
                                    std::to_string(f.context_length()));
    }
    if (!x.all_finite()) {
        throw std::invalid_argument("apply_channel_independent: non-finite context");
    }
    const std::size_t L = x.rows(), D = x.cols(), H = f.horizon();
    Matrix out(H, D, 0.0);
    std::vector<double> chan(L);
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t l = 0; l < L; ++l) chan[l] = x(l, d);
        std::vector<double> fc;
        try {
            fc = f.forecast_one(chan);
        } catch (const std::exception& e) {
            throw std::runtime_error("channel " + std::to_string(d) + ": " + e.what());
        }
        if (fc.size() != H) {
            throw std::runtime_error("channel " + std::to_string(d) +
                                     ": forecaster returned wrong horizon length");
        }
        for (std::size_t h = 0; h < H; ++h) out(h, d) = fc[h];
    }
    return out;
}

}  // namespace tsadapt::fm
