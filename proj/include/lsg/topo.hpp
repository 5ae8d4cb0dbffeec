#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

#include "lsg/field.hpp"
#include "lsg/levelset.hpp"

namespace lsg {

/// Region model whose topological derivative is taken.
///   Cv:       piecewise-constant, e_i = (f - c_i)^2
///   Gaussian: e_i = log sigma_i^2 + (f - mu_i)^2 / sigma_i^2
enum class TdModel { Cv, Gaussian };

TdModel parse_td_model(std::string_view name);
std::string_view to_string(TdModel model);

/// T(x) = -e_in(x) + e_out(x): the first-order energy change per unit area
/// of moving a small ball at x from the inside to the outside region.
struct TdField {
    ScalarField values;
    TdModel model = TdModel::Cv;
};

/// The mask is mapped with phi_from_mask(.., Offset) and weighted by H(phi).
TdField td_field_cv(const ScalarField& image, const ScalarField& mask, HeavisideParams p);
TdField td_field_gaussian(const ScalarField& image, const ScalarField& mask, HeavisideParams p,
                          double var_floor = kDefaultVarFloor);
TdField td_field(const ScalarField& image, const ScalarField& mask, TdModel model,
                 HeavisideParams p, double var_floor = kDefaultVarFloor);

/// Whole-domain region energy of a mask for the chosen model, statistics
/// recomputed from the mask itself.
double region_model_energy(const ScalarField& image, const ScalarField& mask, TdModel model,
                           HeavisideParams p, double var_floor = kDefaultVarFloor);

enum class ProbeDirection { RemoveFromInside, AddToInside };

struct NucleationProbe {
    std::size_t cx = 0;
    std::size_t cy = 0;
    double radius = 1.0;
    ProbeDirection direction = ProbeDirection::RemoveFromInside;
};

/// Pixels whose centre lies within radius of the probe centre. Throws
/// InvalidInput if the disk leaves the grid.
std::size_t probe_pixel_count(const NucleationProbe& probe, std::size_t width,
                              std::size_t height);

/// Exact finite-size oracle: binarize the mask at 0.5, set the probe disk
/// to the target label, recompute statistics and return
/// [E(flipped) - E(original)] / |disk|.
double nucleation_delta(const ScalarField& image, const ScalarField& mask,
                        const NucleationProbe& probe, TdModel model, HeavisideParams p,
                        double var_floor = kDefaultVarFloor);

struct TdVerifyOptions {
    TdModel model = TdModel::Cv;
    double radius = 2.0;
    std::size_t samples = 200;
    std::uint64_t seed = 0;
    /// Heaviside width used for both the field and the oracle. The mask is
    /// binary here, so a small width keeps region membership crisp.
    HeavisideParams heaviside{1e-3};
    double var_floor = kDefaultVarFloor;
    /// |T| below tie_fraction * max|T| is excluded from the comparison.
    double tie_fraction = 1e-3;
};

struct TdVerifyReport {
    std::size_t requested = 0;
    std::size_t evaluated = 0;
    std::size_t excluded_ties = 0;
    /// Sign agreement and errors are undefined when every sample was a tie.
    std::optional<double> sign_agreement;
    std::optional<double> median_rel_err;
    std::optional<double> max_rel_err;
    double tie_threshold = 0.0;
};

/// Draws probe centres (at least `radius` from the border, disk entirely on
/// one side of the binarized mask), orients each probe to flip its pixels
/// into the other region and compares the oracle, signed so that it
/// estimates T, against the mean of T over the flipped pixels.
TdVerifyReport verify_td(const ScalarField& image, const ScalarField& mask,
                         const TdVerifyOptions& opts);

}  // namespace lsg
