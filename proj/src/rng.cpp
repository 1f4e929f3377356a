#include "tsadapt/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tsadapt::num {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() { return mix64(seed_ + (++counter_) * kGolden); }

double Rng::next_double() {
    // 53 high bits -> [0, 1) with full double resolution.
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

double Rng::normal() {
    // u1 in (0, 1] keeps the log finite.
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Rng Rng::split(std::uint64_t stream) const {
    return Rng(mix64(seed_ ^ mix64(0x8E9ABD4A35FD7C11ull + stream * kGolden)));
}

Matrix glorot_uniform(Rng& rng, std::size_t fan_in, std::size_t fan_out) {
    if (fan_in + fan_out == 0) throw std::invalid_argument("glorot_uniform: zero fan sum");
    const double g = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix m(fan_in, fan_out);
    for (double& v : m.data()) v = rng.uniform(-g, g);
    return m;
}

}  // namespace tsadapt::num
