#pragma once

#include <cstdint>
#include <string_view>

#include "lsg/field.hpp"

namespace lsg {

/// Counter-based generator. Every draw is a pure function of
/// (seed, stream, index), so results never depend on call order.
///
/// Algorithm "splitmix64-ctr/box-muller", version 1:
///   key    = splitmix64(seed ^ splitmix64(stream))
///   bits_i = splitmix64(key + i * 0x9E3779B97F4A7C15)
///   uniform(i) = ((bits_i >> 11) + 0.5) * 2^-53         in (0, 1)
///   normal(i)  = sqrt(-2 ln uniform(2i)) * cos(2 pi uniform(2i+1))
class CounterRng {
public:
    static constexpr std::string_view kAlgorithm = "splitmix64-ctr/box-muller";
    static constexpr int kVersion = 1;

    CounterRng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    [[nodiscard]] std::uint64_t bits(std::uint64_t index) const noexcept;
    [[nodiscard]] double uniform(std::uint64_t index) const noexcept;
    [[nodiscard]] double normal(std::uint64_t index) const noexcept;

    /// Field of independent standard normals, draw index = pixel index.
    [[nodiscard]] ScalarField normal_field(std::size_t width, std::size_t height) const;

    /// Child generator for a derived purpose (ensemble member, reverse step, ...).
    [[nodiscard]] CounterRng derive(std::uint64_t stream) const noexcept;

private:
    std::uint64_t key_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

}  // namespace lsg
