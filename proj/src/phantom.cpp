#include "lsg/phantom.hpp"

#include <cmath>
#include <numbers>

#include "lsg/rng.hpp"

namespace lsg {

PhantomKind parse_phantom_kind(std::string_view name) {
    if (name == "two-disks") return PhantomKind::TwoDisks;
    if (name == "ring-with-hole") return PhantomKind::RingWithHole;
    if (name == "c-shape") return PhantomKind::CShape;
    if (name == "two-rects") return PhantomKind::TwoRects;
    throw InvalidInput("unknown phantom kind '" + std::string(name) + "'");
}

std::string_view to_string(PhantomKind kind) {
    switch (kind) {
        case PhantomKind::TwoDisks: return "two-disks";
        case PhantomKind::RingWithHole: return "ring-with-hole";
        case PhantomKind::CShape: return "c-shape";
        case PhantomKind::TwoRects: return "two-rects";
    }
    return "unknown";
}

ScalarField box_mask(std::size_t width, std::size_t height, std::size_t x0, std::size_t y0,
                     std::size_t x1, std::size_t y1) {
    ScalarField m(width, height);
    for (std::size_t y = y0; y < y1 && y < height; ++y) {
        for (std::size_t x = x0; x < x1 && x < width; ++x) {
            m(x, y) = 1.0;
        }
    }
    return m;
}

ScalarField disk_mask(std::size_t width, std::size_t height, double cx, double cy,
                      double radius) {
    ScalarField m(width, height);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
            if (std::hypot(static_cast<double>(x) - cx, static_cast<double>(y) - cy) <= radius) {
                m(x, y) = 1.0;
            }
        }
    }
    return m;
}

ScalarField phantom_mask(PhantomKind kind, std::size_t size) {
    const double n = static_cast<double>(size);
    const double c = 0.5 * (n - 1.0);
    ScalarField m(size, size);
    for (std::size_t y = 0; y < size; ++y) {
        for (std::size_t x = 0; x < size; ++x) {
            const double px = static_cast<double>(x);
            const double py = static_cast<double>(y);
            bool inside = false;
            switch (kind) {
                case PhantomKind::TwoDisks: {
                    const double r = 0.15 * n;
                    inside = std::hypot(px - 0.3 * n, py - c) <= r ||
                             std::hypot(px - 0.7 * n, py - c) <= r;
                    break;
                }
                case PhantomKind::RingWithHole: {
                    const double d = std::hypot(px - c, py - c);
                    inside = d <= 0.35 * n && d >= 0.15 * n;
                    break;
                }
                case PhantomKind::CShape: {
                    const double d = std::hypot(px - c, py - c);
                    const double angle = std::atan2(py - c, px - c);
                    inside = d <= 0.35 * n && d >= 0.18 * n &&
                             std::abs(angle) > std::numbers::pi / 4.0;
                    break;
                }
                case PhantomKind::TwoRects: {
                    const bool rows = py >= 0.25 * n && py < 0.75 * n;
                    inside = rows && ((px >= 0.15 * n && px < 0.4 * n) ||
                                      (px >= 0.6 * n && px < 0.85 * n));
                    break;
                }
            }
            m(x, y) = inside ? 1.0 : 0.0;
        }
    }
    return m;
}

Phantom make_phantom(const PhantomSpec& spec) {
    if (spec.size < 32) {
        throw InvalidInput("make_phantom: size must be >= 32");
    }
    if (!(std::abs(spec.foreground - spec.background) > 0.0)) {
        throw InvalidInput("make_phantom: foreground and background intensities must differ");
    }
    const double fg_sigma = spec.foreground_noise_sigma.value_or(spec.noise_sigma);
    if (spec.noise_sigma < 0.0 || fg_sigma < 0.0) {
        throw InvalidInput("make_phantom: noise sigma must be >= 0");
    }
    Phantom p{ScalarField(spec.size, spec.size), phantom_mask(spec.kind, spec.size)};
    const CounterRng rng(spec.seed, /*stream=*/0x5048414E544F4DULL);
    for (std::size_t i = 0; i < p.image.size(); ++i) {
        const bool fg = p.mask[i] > 0.5;
        const double sigma = fg ? fg_sigma : spec.noise_sigma;
        const double base = fg ? spec.foreground : spec.background;
        p.image[i] = sigma > 0.0 ? base + sigma * rng.normal(i) : base;
    }
    return p;
}

}  // namespace lsg
