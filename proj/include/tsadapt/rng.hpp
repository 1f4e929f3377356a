#pragma once

#include <cstdint>

#include "tsadapt/matrix.hpp"

namespace tsadapt::num {

/**
 * @brief Counter-based splittable pseudo-random generator.
 *
 * Each output is a pure 64-bit mix of (seed, counter), so a given seed yields a
 * bit-identical stream on every platform and the generator can be copied freely.
 * split(k) derives an independent child stream keyed by k; children with distinct
 * keys never overlap with each other or with the parent.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double next_double();

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);

    /// Standard normal via Box-Muller (two fresh uniforms per draw).
    double normal();

    /// Independent child stream keyed by `stream`; does not advance this generator.
    Rng split(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/**
 * @brief Glorot-uniform matrix: entries iid uniform on [-g, g], g = sqrt(6 / (fan_in + fan_out)).
 *
 * Row-major fill order is part of the contract so seeded draws are reproducible.
 */
Matrix glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out);

}  // namespace tsadapt::num
