#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lsg {

/// Raised when an argument violates an operation's precondition.
class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure cannot produce a finite result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Row-major 2-D grid of doubles. Serves as image, level set, mask,
/// distance map and topological-derivative field alike.
class ScalarField {
public:
    ScalarField() = default;
    ScalarField(std::size_t width, std::size_t height, double fill = 0.0);
    ScalarField(std::size_t width, std::size_t height, std::vector<double> data);

    [[nodiscard]] std::size_t width() const noexcept { return width_; }
    [[nodiscard]] std::size_t height() const noexcept { return height_; }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
    [[nodiscard]] bool empty() const noexcept { return data_.empty(); }

    [[nodiscard]] double operator()(std::size_t x, std::size_t y) const noexcept {
        return data_[y * width_ + x];
    }
    double& operator()(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }

    [[nodiscard]] double operator[](std::size_t i) const noexcept { return data_[i]; }
    double& operator[](std::size_t i) noexcept { return data_[i]; }

    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
    [[nodiscard]] std::span<double> values() noexcept { return data_; }

    [[nodiscard]] bool same_shape(const ScalarField& other) const noexcept {
        return width_ == other.width_ && height_ == other.height_;
    }

    [[nodiscard]] double sum() const noexcept;
    [[nodiscard]] double min() const noexcept;
    [[nodiscard]] double max() const noexcept;
    [[nodiscard]] bool all_finite() const noexcept;

    friend bool operator==(const ScalarField&, const ScalarField&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

/// Throws InvalidInput naming `what` unless both fields share a shape.
void require_same_shape(const ScalarField& a, const ScalarField& b, const char* what);

struct Gradient {
    ScalarField dx;
    ScalarField dy;
};

/// Central differences in the interior, one-sided differences on the border
/// rows/columns. Requires width, height >= 2.
Gradient gradient(const ScalarField& f);

/// Transpose of the linear map f -> (dx, dy) computed by gradient().
/// Used to form exact gradients of energies built on gradient().
ScalarField gradient_adjoint(const ScalarField& px, const ScalarField& py);

inline constexpr double kDefaultGradFloor = 1e-8;

/// div( grad(phi) / max(|grad(phi)|, grad_floor) ), both operators from gradient().
ScalarField divergence_of_normalized_gradient(const ScalarField& phi,
                                              double grad_floor = kDefaultGradFloor);

/// Maps [level - width/2, level + width/2] linearly onto [0, 1], clamping outside.
ScalarField window_intensity(const ScalarField& f, double level, double width);

/// Binary view of a field: value >= threshold counts as foreground.
std::vector<std::uint8_t> binarize(const ScalarField& f, double threshold = 0.5);

enum class Connectivity { Four, Eight };

/// Number of connected foreground components of {f >= threshold}.
std::size_t count_components(const ScalarField& f, double threshold = 0.5,
                             Connectivity conn = Connectivity::Eight);

/// Euler characteristic (components minus holes) of {f >= threshold} using
/// bit-quad counting; `conn` is the foreground connectivity.
long euler_characteristic(const ScalarField& f, double threshold = 0.5,
                          Connectivity conn = Connectivity::Eight);

}  // namespace lsg
