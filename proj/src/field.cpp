#include "lsg/field.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lsg {

ScalarField::ScalarField(std::size_t width, std::size_t height, double fill)
    : width_(width), height_(height) {
    if (width == 0 || height == 0) {
        throw InvalidInput("ScalarField: width and height must be >= 1");
    }
    data_.assign(width * height, fill);
}

ScalarField::ScalarField(std::size_t width, std::size_t height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
    if (width == 0 || height == 0) {
        throw InvalidInput("ScalarField: width and height must be >= 1");
    }
    if (data_.size() != width * height) {
        throw InvalidInput("ScalarField: data length " + std::to_string(data_.size()) +
                           " does not match " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
}

double ScalarField::sum() const noexcept {
    return std::accumulate(data_.begin(), data_.end(), 0.0);
}

double ScalarField::min() const noexcept {
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double ScalarField::max() const noexcept {
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

bool ScalarField::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_same_shape(const ScalarField& a, const ScalarField& b, const char* what) {
    if (!a.same_shape(b)) {
        throw InvalidInput(std::string(what) + ": shape mismatch (" + std::to_string(a.width()) +
                           "x" + std::to_string(a.height()) + " vs " +
                           std::to_string(b.width()) + "x" + std::to_string(b.height()) + ")");
    }
}

namespace {

void require_stencil_grid(const ScalarField& f, const char* what) {
    if (f.width() < 2 || f.height() < 2) {
        throw InvalidInput(std::string(what) + ": grid must be at least 2x2");
    }
}

}  // namespace

Gradient gradient(const ScalarField& f) {
    require_stencil_grid(f, "gradient");
    const std::size_t w = f.width();
    const std::size_t h = f.height();
    Gradient g{ScalarField(w, h), ScalarField(w, h)};
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            if (x == 0) {
                g.dx(x, y) = f(1, y) - f(0, y);
            } else if (x == w - 1) {
                g.dx(x, y) = f(w - 1, y) - f(w - 2, y);
            } else {
                g.dx(x, y) = 0.5 * (f(x + 1, y) - f(x - 1, y));
            }
            if (y == 0) {
                g.dy(x, y) = f(x, 1) - f(x, 0);
            } else if (y == h - 1) {
                g.dy(x, y) = f(x, h - 1) - f(x, h - 2);
            } else {
                g.dy(x, y) = 0.5 * (f(x, y + 1) - f(x, y - 1));
            }
        }
    }
    return g;
}

ScalarField gradient_adjoint(const ScalarField& px, const ScalarField& py) {
    require_same_shape(px, py, "gradient_adjoint");
    require_stencil_grid(px, "gradient_adjoint");
    const std::size_t w = px.width();
    const std::size_t h = px.height();
    ScalarField out(w, h);
    // Scatter each stencil coefficient back onto the pixel it read from.
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double a = px(x, y);
            if (x == 0) {
                out(1, y) += a;
                out(0, y) -= a;
            } else if (x == w - 1) {
                out(w - 1, y) += a;
                out(w - 2, y) -= a;
            } else {
                out(x + 1, y) += 0.5 * a;
                out(x - 1, y) -= 0.5 * a;
            }
            const double b = py(x, y);
            if (y == 0) {
                out(x, 1) += b;
                out(x, 0) -= b;
            } else if (y == h - 1) {
                out(x, h - 1) += b;
                out(x, h - 2) -= b;
            } else {
                out(x, y + 1) += 0.5 * b;
                out(x, y - 1) -= 0.5 * b;
            }
        }
    }
    return out;
}

ScalarField divergence_of_normalized_gradient(const ScalarField& phi, double grad_floor) {
    if (!(grad_floor > 0.0)) {
        throw InvalidInput("divergence_of_normalized_gradient: grad_floor must be > 0");
    }
    Gradient g = gradient(phi);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double norm = std::max(std::hypot(g.dx[i], g.dy[i]), grad_floor);
        g.dx[i] /= norm;
        g.dy[i] /= norm;
    }
    const Gradient gx = gradient(g.dx);
    const Gradient gy = gradient(g.dy);
    ScalarField kappa(phi.width(), phi.height());
    for (std::size_t i = 0; i < phi.size(); ++i) {
        kappa[i] = gx.dx[i] + gy.dy[i];
    }
    return kappa;
}

ScalarField window_intensity(const ScalarField& f, double level, double width) {
    if (!(width > 0.0)) {
        throw InvalidInput("window_intensity: window width must be > 0");
    }
    const double lo = level - 0.5 * width;
    ScalarField out(f.width(), f.height());
    for (std::size_t i = 0; i < f.size(); ++i) {
        out[i] = std::clamp((f[i] - lo) / width, 0.0, 1.0);
    }
    return out;
}

std::vector<std::uint8_t> binarize(const ScalarField& f, double threshold) {
    std::vector<std::uint8_t> b(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        b[i] = f[i] >= threshold ? 1 : 0;
    }
    return b;
}

std::size_t count_components(const ScalarField& f, double threshold, Connectivity conn) {
    const auto w = static_cast<long>(f.width());
    const auto h = static_cast<long>(f.height());
    std::vector<std::uint8_t> fg = binarize(f, threshold);
    std::vector<std::uint8_t> seen(fg.size(), 0);
    std::vector<long> stack;
    std::size_t count = 0;
    for (long start = 0; start < w * h; ++start) {
        if (!fg[start] || seen[start]) {
            continue;
        }
        ++count;
        seen[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const long i = stack.back();
            stack.pop_back();
            const long x = i % w;
            const long y = i / w;
            for (long dy = -1; dy <= 1; ++dy) {
                for (long dx = -1; dx <= 1; ++dx) {
                    if ((dx == 0 && dy == 0) ||
                        (conn == Connectivity::Four && dx != 0 && dy != 0)) {
                        continue;
                    }
                    const long nx = x + dx;
                    const long ny = y + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h) {
                        continue;
                    }
                    const long j = ny * w + nx;
                    if (fg[j] && !seen[j]) {
                        seen[j] = 1;
                        stack.push_back(j);
                    }
                }
            }
        }
    }
    return count;
}

long euler_characteristic(const ScalarField& f, double threshold, Connectivity conn) {
    const auto w = static_cast<long>(f.width());
    const auto h = static_cast<long>(f.height());
    const std::vector<std::uint8_t> fg = binarize(f, threshold);
    auto at = [&](long x, long y) -> int {
        return (x < 0 || y < 0 || x >= w || y >= h) ? 0 : fg[y * w + x];
    };
    long q1 = 0;
    long q3 = 0;
    long qd = 0;
    // Every 2x2 window overlapping the padded image.
    for (long y = -1; y < h; ++y) {
        for (long x = -1; x < w; ++x) {
            const int a = at(x, y);
            const int b = at(x + 1, y);
            const int c = at(x, y + 1);
            const int d = at(x + 1, y + 1);
            const int n = a + b + c + d;
            if (n == 1) {
                ++q1;
            } else if (n == 3) {
                ++q3;
            } else if (n == 2 && a == d) {
                ++qd;
            }
        }
    }
    const long numer = conn == Connectivity::Eight ? (q1 - q3 - 2 * qd) : (q1 - q3 + 2 * qd);
    return numer / 4;
}

}  // namespace lsg
