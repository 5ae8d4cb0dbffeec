#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "lsg/field.hpp"

namespace lsg {

enum class PhantomKind { TwoDisks, RingWithHole, CShape, TwoRects };

/// Parses "two-disks", "ring-with-hole", "c-shape", "two-rects".
PhantomKind parse_phantom_kind(std::string_view name);
std::string_view to_string(PhantomKind kind);

struct PhantomSpec {
    PhantomKind kind = PhantomKind::TwoDisks;
    std::size_t size = 64;
    double foreground = 0.8;
    double background = 0.2;
    double noise_sigma = 0.0;
    /// Separate noise level inside the object; falls back to noise_sigma.
    /// Gives a two-texture phantom when it differs.
    std::optional<double> foreground_noise_sigma;
    std::uint64_t seed = 0;
};

struct Phantom {
    ScalarField image;
    ScalarField mask;
};

/// image = fg * mask + bg * (1 - mask) + N(0, sigma^2), mask in {0, 1}.
/// Pure function of the spec; noise comes from CounterRng(seed).
Phantom make_phantom(const PhantomSpec& spec);

/// Binary mask of the phantom geometry alone (no image).
ScalarField phantom_mask(PhantomKind kind, std::size_t size);

/// Axis-aligned box mask covering [x0, x1) x [y0, y1).
ScalarField box_mask(std::size_t width, std::size_t height, std::size_t x0, std::size_t y0,
                     std::size_t x1, std::size_t y1);

/// Disk mask: pixels whose centre lies within `radius` of (cx, cy).
ScalarField disk_mask(std::size_t width, std::size_t height, double cx, double cy,
                      double radius);

}  // namespace lsg
