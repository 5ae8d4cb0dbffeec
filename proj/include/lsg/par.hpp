#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "lsg/field.hpp"

namespace lsg {

/// Neighbour offsets (dx, dy) in kernel slot order.
inline constexpr std::array<std::array<int, 2>, 8> kNeighbourOffsets{{
    {-1, -1}, {0, -1}, {1, -1}, {-1, 0}, {1, 0}, {-1, 1}, {0, 1}, {1, 1}}};

enum class ParFeature {
    Intensity,
    /// Intensity plus pixel position; position_weight scales the offset.
    IntensityPosition,
};

struct ParParams {
    std::size_t tau = 10;
    double sigma_floor = 1e-4;
    ParFeature feature = ParFeature::Intensity;
    double position_weight = 0.0;
};

/// Per-pixel weights over the 8 neighbours in kNeighbourOffsets order.
/// Missing neighbours at the border carry weight 0.
class AffinityKernel {
public:
    AffinityKernel(std::size_t width, std::size_t height);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::array<double, 8>& at(std::size_t x, std::size_t y) { return w_[y * width_ + x]; }
    const std::array<double, 8>& at(std::size_t x, std::size_t y) const {
        return w_[y * width_ + x];
    }

private:
    std::size_t width_;
    std::size_t height_;
    std::vector<std::array<double, 8>> w_;
};

/// kappa(ij, kl) = softmax over existing neighbours kl of
/// -(|p_ij - p_kl| / sigma_ij)^2, with sigma_ij the standard deviation of
/// the image over the 3x3 window at ij, floored at sigma_floor.
AffinityKernel affinity_kernel(const ScalarField& image, const ParParams& pp);

/// tau rounds of y(ij) <- sum_kl kappa(ij, kl) y(kl). Self is excluded.
ScalarField refine(const ScalarField& mask, const AffinityKernel& kernel, std::size_t tau);

struct ParLoss {
    double sum = 0.0;
    double mean = 0.0;
};

/// L1 consistency: sum |mask - refined| (also per pixel).
ParLoss par_loss(const ScalarField& mask, const ScalarField& refined);

}  // namespace lsg
