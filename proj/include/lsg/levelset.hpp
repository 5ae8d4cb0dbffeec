#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lsg/field.hpp"

namespace lsg {

/// Smoothing width of the arctan Heaviside, in level-set units.
struct HeavisideParams {
    double epsilon = 1.5;
};

/// H(s) = 1/2 (1 + 2/pi atan(s/eps))
double heaviside(double s, HeavisideParams p) noexcept;
/// delta(s) = dH/ds = eps / (pi (eps^2 + s^2))
double dirac(double s, HeavisideParams p) noexcept;
ScalarField heaviside(const ScalarField& phi, HeavisideParams p);
ScalarField dirac(const ScalarField& phi, HeavisideParams p);

/// How a soft mask y in [0, 1] becomes a level set function.
/// Offset puts the zero level at y = 0.5; Literal uses phi = y unchanged.
enum class PhiMapping { Offset, Literal };

ScalarField phi_from_mask(const ScalarField& mask, PhiMapping mapping = PhiMapping::Offset);
ScalarField mask_from_phi(const ScalarField& phi, PhiMapping mapping = PhiMapping::Offset);

inline constexpr double kDefaultVarFloor = 1e-6;

/// Raised when one side of the partition carries (almost) no Heaviside mass.
class DegenerateRegion : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Weighted moments of the image with weights H(phi) (inside) and
/// 1 - H(phi) (outside).
struct RegionStats {
    double mean_in = 0.0;
    double mean_out = 0.0;
    double var_in = 1.0;
    double var_out = 1.0;
    double mass_in = 0.0;
    double mass_out = 0.0;
    /// Variances before flooring; equal to var_* unless the floor was hit.
    double raw_var_in = 1.0;
    double raw_var_out = 1.0;
};

RegionStats region_stats(const ScalarField& image, const ScalarField& phi, HeavisideParams p,
                         double var_floor = kDefaultVarFloor);

/// Weights of the region, length, area and distance terms.
struct EnergyWeights {
    double region = 0.01;
    double length = 0.01;
    double area = 1e-4;
    double distance = 1e-3;
};

/// Target Heaviside masses of the inside (a1) and outside (a2).
struct AreaPrior {
    double a1 = 0.0;
    double a2 = 0.0;
    /// Set when a1 + a2 was deliberately chosen to differ from the pixel count.
    bool overridden = false;

    /// a1 = mass, a2 = pixel_count - mass.
    static AreaPrior from_inside_mass(double mass, std::size_t pixel_count);
    /// Both targets explicit; flags an override when they do not tile the domain.
    static AreaPrior explicit_targets(double a1, double a2, std::size_t pixel_count);
};

struct LevelSetConfig {
    HeavisideParams heaviside{};
    EnergyWeights weights{};
    double var_floor = kDefaultVarFloor;
    PhiMapping mapping = PhiMapping::Offset;
};

struct EnergyReport {
    double region = 0.0;
    double length = 0.0;
    double area = 0.0;
    double distance = 0.0;
    double total = 0.0;
};

/// Per-pixel Gaussian negative log-likelihoods e_in, e_out for given stats.
double region_nll_in(double intensity, const RegionStats& s) noexcept;
double region_nll_out(double intensity, const RegionStats& s) noexcept;

double energy_region(const ScalarField& image, const ScalarField& phi, HeavisideParams p,
                     const RegionStats& stats);
/// Sum over pixels of |grad H(phi)|, unit pixel area.
double energy_length(const ScalarField& phi, HeavisideParams p);
double energy_area(const ScalarField& phi, HeavisideParams p, const AreaPrior& prior);
double energy_distance(const ScalarField& phi, HeavisideParams p, const ScalarField& dist);

/// Weighted four-term energy. Region statistics are recomputed from phi
/// unless `frozen` is supplied. `dist` must be non-negative.
EnergyReport energy_total(const ScalarField& image, const ScalarField& phi,
                          const LevelSetConfig& cfg, const AreaPrior& prior,
                          const ScalarField& dist,
                          const std::optional<RegionStats>& frozen = std::nullopt);

/// Unweighted dE/dphi of each term; `total` applies the weights.
struct TermGradients {
    ScalarField region;
    ScalarField length;
    ScalarField area;
    ScalarField distance;
    ScalarField total;
};

/// Exact derivatives of the discrete energies above with respect to phi,
/// region statistics held at `stats`.
TermGradients energy_gradients_phi(const ScalarField& image, const ScalarField& phi,
                                   const LevelSetConfig& cfg, const AreaPrior& prior,
                                   const ScalarField& dist, const RegionStats& stats);

/// Derivative of the region energy through the closed-form statistics,
/// i.e. what is dropped when statistics are frozen. Vanishes analytically
/// at the closed-form optimum; returned per pixel with respect to phi.
ScalarField region_stats_backreaction(const ScalarField& image, const ScalarField& phi,
                                      HeavisideParams p, const RegionStats& stats);

/// dL/dy for a soft mask y, through phi = phi_from_mask(y).
/// freeze_stats = true treats the statistics as constants; false adds their
/// back-reaction so the result is the total derivative of energy_total.
ScalarField grad_energy_wrt_mask(const ScalarField& image, const ScalarField& mask,
                                 const LevelSetConfig& cfg, const AreaPrior& prior,
                                 const ScalarField& dist, bool freeze_stats);

/// Same, with caller-supplied frozen statistics.
ScalarField grad_energy_wrt_mask(const ScalarField& image, const ScalarField& mask,
                                 const LevelSetConfig& cfg, const AreaPrior& prior,
                                 const ScalarField& dist, const RegionStats& frozen);

struct EvolveParams {
    double dt = 0.1;
    std::size_t steps = 500;
    std::size_t stats_refresh = 1;
};

/// Raised when the evolution energy stops being finite.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& message, std::size_t step);
    [[nodiscard]] std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

struct EvolveResult {
    ScalarField phi;
    /// Energy after each step (statistics recomputed for the report).
    std::vector<EnergyReport> trace;
};

/// Explicit Euler descent phi <- phi - dt * dL/dphi, with region statistics
/// refreshed every `stats_refresh` steps.
EvolveResult evolve(const ScalarField& image, const ScalarField& phi0, const LevelSetConfig& cfg,
                    const AreaPrior& prior, const ScalarField& dist, const EvolveParams& params);

}  // namespace lsg
