#include "lsg/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace lsg {

ScalarField speed_field(const ScalarField& image, const SpeedParams& sp,
                        const std::optional<ScalarField>& edge_term) {
    if (!(sp.eps_d > 0.0)) {
        throw InvalidInput("speed_field: eps_d must be > 0");
    }
    if (sp.beta_g < 0.0 || sp.nu < 0.0) {
        throw InvalidInput("speed_field: beta_g and nu must be >= 0");
    }
    if (edge_term) {
        require_same_shape(image, *edge_term, "speed_field");
    }
    const Gradient g = gradient(image);
    ScalarField f(image.width(), image.height());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double v = sp.eps_d + sp.beta_g * (g.dx[i] * g.dx[i] + g.dy[i] * g.dy[i]);
        if (edge_term) {
            v += sp.nu * (*edge_term)[i];
        }
        f[i] = v;
    }
    return f;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-pixel Godunov update for |grad u| = f with unit spacing, given the
// smaller neighbour value along each axis.
double godunov_update(double a, double b, double f) {
    if (a > b) {
        std::swap(a, b);
    }
    if (a == kInf) {
        return kInf;
    }
    if (b - a >= f) {
        return a + f;
    }
    const double diff = b - a;
    return 0.5 * (a + b + std::sqrt(2.0 * f * f - diff * diff));
}

// Straight-line travel time from the nearest seed-boundary pixel for every
// pixel within `radius` of the seed (speed integrated by the trapezoid rule
// at unit sub-steps). Exact for uniform speed, an upper bound otherwise.
void initialize_near_seed(const ScalarField& speed, const ScalarField& seed, double radius,
                          ScalarField& u) {
    if (!(radius > 0.0)) {
        return;
    }
    const auto w = static_cast<long>(speed.width());
    const auto h = static_cast<long>(speed.height());
    auto is_seed = [&](long x, long y) {
        return x >= 0 && y >= 0 && x < w && y < h && seed[static_cast<std::size_t>(y * w + x)] > 0.5;
    };
    std::vector<std::pair<long, long>> boundary;
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            if (is_seed(x, y) && !(is_seed(x - 1, y) && is_seed(x + 1, y) &&
                                   is_seed(x, y - 1) && is_seed(x, y + 1))) {
                boundary.emplace_back(x, y);
            }
        }
    }
    auto speed_at = [&](double x, double y) {
        // Bilinear sample.
        const double fx = std::clamp(x, 0.0, static_cast<double>(w - 1));
        const double fy = std::clamp(y, 0.0, static_cast<double>(h - 1));
        const long x0 = std::min(static_cast<long>(fx), w - 2 < 0 ? 0 : w - 2);
        const long y0 = std::min(static_cast<long>(fy), h - 2 < 0 ? 0 : h - 2);
        const long x1 = std::min(x0 + 1, w - 1);
        const long y1 = std::min(y0 + 1, h - 1);
        const double tx = fx - static_cast<double>(x0);
        const double ty = fy - static_cast<double>(y0);
        auto s = [&](long xx, long yy) { return speed[static_cast<std::size_t>(yy * w + xx)]; };
        return (1 - ty) * ((1 - tx) * s(x0, y0) + tx * s(x1, y0)) +
               ty * ((1 - tx) * s(x0, y1) + tx * s(x1, y1));
    };
    const long r = static_cast<long>(std::ceil(radius));
    for (const auto& [sx, sy] : boundary) {
        for (long y = std::max(0L, sy - r); y <= std::min(h - 1, sy + r); ++y) {
            for (long x = std::max(0L, sx - r); x <= std::min(w - 1, sx + r); ++x) {
                const auto i = static_cast<std::size_t>(y * w + x);
                if (seed[i] > 0.5) {
                    continue;
                }
                const double len = std::hypot(static_cast<double>(x - sx), static_cast<double>(y - sy));
                if (len > radius) {
                    continue;
                }
                const auto pieces = static_cast<long>(std::ceil(len));
                double integral = 0.0;
                double prev = speed_at(sx, sy);
                for (long k = 1; k <= pieces; ++k) {
                    const double t = static_cast<double>(k) / static_cast<double>(pieces);
                    const double cur = speed_at(sx + t * (x - sx), sy + t * (y - sy));
                    integral += 0.5 * (prev + cur);
                    prev = cur;
                }
                integral *= len / static_cast<double>(pieces);
                u[i] = std::min(u[i], integral);
            }
        }
    }
}

}  // namespace

ScalarField solve_eikonal_raw(const ScalarField& speed, const ScalarField& seed,
                              const EikonalOptions& opts) {
    require_same_shape(speed, seed, "solve_eikonal");
    bool any_seed = false;
    for (std::size_t i = 0; i < speed.size(); ++i) {
        if (!(speed[i] > 0.0) || !std::isfinite(speed[i])) {
            throw InvalidInput("solve_eikonal: speed must be finite and > 0 everywhere");
        }
        any_seed = any_seed || seed[i] > 0.5;
    }
    if (!any_seed) {
        throw InvalidInput("solve_eikonal: seed region is empty");
    }
    const auto w = static_cast<long>(speed.width());
    const auto h = static_cast<long>(speed.height());
    ScalarField u(speed.width(), speed.height(), kInf);
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (seed[i] > 0.5) {
            u[i] = 0.0;
        }
    }
    auto value = [&](long x, long y) { return u[static_cast<std::size_t>(y * w + x)]; };
    initialize_near_seed(speed, seed, opts.init_radius, u);

    constexpr int kOrders[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
    for (std::size_t pass = 0; pass < opts.max_passes; ++pass) {
        double max_change = 0.0;
        for (const auto& order : kOrders) {
            const long x0 = order[0] > 0 ? 0 : w - 1;
            const long y0 = order[1] > 0 ? 0 : h - 1;
            for (long y = y0; y >= 0 && y < h; y += order[1]) {
                for (long x = x0; x >= 0 && x < w; x += order[0]) {
                    const auto i = static_cast<std::size_t>(y * w + x);
                    if (seed[i] > 0.5) {
                        continue;
                    }
                    double a = kInf;
                    if (x > 0) a = value(x - 1, y);
                    if (x < w - 1) a = std::min(a, value(x + 1, y));
                    double b = kInf;
                    if (y > 0) b = value(x, y - 1);
                    if (y < h - 1) b = std::min(b, value(x, y + 1));
                    const double cand = godunov_update(a, b, speed[i]);
                    if (cand < u[i]) {
                        const double change = u[i] == kInf ? kInf : u[i] - cand;
                        max_change = std::max(max_change, change);
                        u[i] = cand;
                    }
                }
            }
        }
        const double top = u.max();
        if (max_change != kInf && max_change <= opts.tolerance * top) {
            break;
        }
    }
    if (!u.all_finite()) {
        throw NumericalError("solve_eikonal: did not converge");
    }
    return u;
}

ScalarField normalize_distance(const ScalarField& raw) {
    const double top = raw.max();
    ScalarField out = raw;
    if (top > 0.0) {
        for (double& v : out.values()) {
            v /= top;
        }
    }
    return out;
}

DistanceMap solve_eikonal(const ScalarField& speed, const ScalarField& seed,
                          const EikonalOptions& opts) {
    DistanceMap map;
    const ScalarField raw = solve_eikonal_raw(speed, seed, opts);
    map.raw_max = raw.max();
    map.all_zero = !(map.raw_max > 0.0);
    map.values = normalize_distance(raw);
    map.seed = ScalarField(seed.width(), seed.height());
    for (std::size_t i = 0; i < seed.size(); ++i) {
        map.seed[i] = seed[i] > 0.5 ? 1.0 : 0.0;
    }
    return map;
}

DistanceMap distance_for_mask(const ScalarField& image, const ScalarField& mask,
                              const SpeedParams& sp, const std::optional<ScalarField>& edge_term) {
    require_same_shape(image, mask, "distance_for_mask");
    return solve_eikonal(speed_field(image, sp, edge_term), mask);
}

}  // namespace lsg
