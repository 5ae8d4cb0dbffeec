#pragma once

#include <cstddef>
#include <optional>

#include "lsg/field.hpp"

namespace lsg {

/// f = eps_d + beta_g |grad I|^2 + nu * D_E.
struct SpeedParams {
    double eps_d = 1e-3;
    double beta_g = 1e3;
    double nu = 0.0;
};

/// Edge-aware speed. `edge_term` is the optional externally supplied D_E
/// field; it is treated as zero when absent.
ScalarField speed_field(const ScalarField& image, const SpeedParams& sp,
                        const std::optional<ScalarField>& edge_term = std::nullopt);

struct EikonalOptions {
    /// Stop when the largest update of a full 4-sweep pass falls below
    /// tolerance * (largest finite value).
    double tolerance = 1e-6;
    std::size_t max_passes = 1000;
    /// Pixels within this distance of the seed boundary start from the
    /// straight-line travel time; 0 disables.
    double init_radius = 8.0;
};

/// Solution of |grad D| = speed off the seed, D = 0 on it (unit grid
/// spacing, Godunov upwind, Gauss-Seidel fast sweeping over 4 orderings).
/// Unreached pixels cannot occur on a connected grid.
ScalarField solve_eikonal_raw(const ScalarField& speed, const ScalarField& seed,
                              const EikonalOptions& opts = {});

struct DistanceMap {
    /// Normalized to [0, 1]; exactly 0 on the seed.
    ScalarField values;
    ScalarField seed;
    /// max of the unnormalized solution; 0 when the seed covers the domain.
    double raw_max = 0.0;
    /// Set when the unnormalized map was identically zero (nothing to scale).
    bool all_zero = false;
};

/// D / max(D); zero maps stay zero. Idempotent.
ScalarField normalize_distance(const ScalarField& raw);

/// Seed pixels are those with seed > 0.5. Throws InvalidInput when the
/// seed is empty or any speed is not strictly positive.
DistanceMap solve_eikonal(const ScalarField& speed, const ScalarField& seed,
                          const EikonalOptions& opts = {});

/// speed_field(image) then solve_eikonal with seed {mask > 0.5}.
DistanceMap distance_for_mask(const ScalarField& image, const ScalarField& mask,
                              const SpeedParams& sp,
                              const std::optional<ScalarField>& edge_term = std::nullopt);

}  // namespace lsg
