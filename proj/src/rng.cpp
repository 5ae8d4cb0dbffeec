#include "lsg/rng.hpp"

#include <cmath>
#include <numbers>

namespace lsg {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
    : key_(splitmix64(seed ^ splitmix64(stream))) {}

std::uint64_t CounterRng::bits(std::uint64_t index) const noexcept {
    return splitmix64(key_ + index * 0x9E3779B97F4A7C15ULL);
}

double CounterRng::uniform(std::uint64_t index) const noexcept {
    return (static_cast<double>(bits(index) >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t index) const noexcept {
    const double u1 = uniform(2 * index);
    const double u2 = uniform(2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ScalarField CounterRng::normal_field(std::size_t width, std::size_t height) const {
    ScalarField f(width, height);
    for (std::size_t i = 0; i < f.size(); ++i) {
        f[i] = normal(i);
    }
    return f;
}

CounterRng CounterRng::derive(std::uint64_t stream) const noexcept {
    CounterRng child(0, 0);
    child.key_ = splitmix64(key_ ^ splitmix64(stream + 0xD1B54A32D192ED03ULL));
    return child;
}

}  // namespace lsg
