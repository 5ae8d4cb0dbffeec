#include "lsg/topo.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lsg/rng.hpp"

namespace lsg {

TdModel parse_td_model(std::string_view name) {
    if (name == "cv") return TdModel::Cv;
    if (name == "gaussian") return TdModel::Gaussian;
    throw InvalidInput("unknown topological-derivative model '" + std::string(name) + "'");
}

std::string_view to_string(TdModel model) {
    return model == TdModel::Cv ? "cv" : "gaussian";
}

TdField td_field_cv(const ScalarField& image, const ScalarField& mask, HeavisideParams p) {
    require_same_shape(image, mask, "td_field_cv");
    const RegionStats s = region_stats(image, phi_from_mask(mask), p, kDefaultVarFloor);
    TdField td{ScalarField(image.width(), image.height()), TdModel::Cv};
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double d1 = image[i] - s.mean_in;
        const double d2 = image[i] - s.mean_out;
        td.values[i] = -d1 * d1 + d2 * d2;
    }
    return td;
}

TdField td_field_gaussian(const ScalarField& image, const ScalarField& mask, HeavisideParams p,
                          double var_floor) {
    require_same_shape(image, mask, "td_field_gaussian");
    const RegionStats s = region_stats(image, phi_from_mask(mask), p, var_floor);
    TdField td{ScalarField(image.width(), image.height()), TdModel::Gaussian};
    for (std::size_t i = 0; i < image.size(); ++i) {
        td.values[i] = -region_nll_in(image[i], s) + region_nll_out(image[i], s);
    }
    return td;
}

TdField td_field(const ScalarField& image, const ScalarField& mask, TdModel model,
                 HeavisideParams p, double var_floor) {
    return model == TdModel::Cv ? td_field_cv(image, mask, p)
                                : td_field_gaussian(image, mask, p, var_floor);
}

double region_model_energy(const ScalarField& image, const ScalarField& mask, TdModel model,
                           HeavisideParams p, double var_floor) {
    require_same_shape(image, mask, "region_model_energy");
    const ScalarField phi = phi_from_mask(mask);
    const RegionStats s = region_stats(image, phi, p, var_floor);
    if (model == TdModel::Gaussian) {
        return energy_region(image, phi, p, s);
    }
    double e = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double h = heaviside(phi[i], p);
        const double d1 = image[i] - s.mean_in;
        const double d2 = image[i] - s.mean_out;
        e += d1 * d1 * h + d2 * d2 * (1.0 - h);
    }
    return e;
}

namespace {

ScalarField binary_copy(const ScalarField& mask) {
    ScalarField b(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        b[i] = mask[i] >= 0.5 ? 1.0 : 0.0;
    }
    return b;
}

template <class Fn>
void for_each_disk_pixel(const NucleationProbe& probe, std::size_t width, std::size_t height,
                         Fn&& fn) {
    const double r = probe.radius;
    const auto reach = static_cast<std::size_t>(std::floor(r));
    if (!(r >= 1.0) || probe.cx < reach || probe.cy < reach || probe.cx + reach >= width ||
        probe.cy + reach >= height) {
        throw InvalidInput("nucleation probe must have radius >= 1 and lie inside the grid");
    }
    for (std::size_t y = probe.cy - reach; y <= probe.cy + reach; ++y) {
        for (std::size_t x = probe.cx - reach; x <= probe.cx + reach; ++x) {
            const double dx = static_cast<double>(x) - static_cast<double>(probe.cx);
            const double dy = static_cast<double>(y) - static_cast<double>(probe.cy);
            if (dx * dx + dy * dy <= r * r) {
                fn(y * width + x);
            }
        }
    }
}

double oracle_delta(const ScalarField& image, const ScalarField& binary, double base_energy,
                    const NucleationProbe& probe, TdModel model, HeavisideParams p,
                    double var_floor) {
    ScalarField flipped = binary;
    const double target = probe.direction == ProbeDirection::RemoveFromInside ? 0.0 : 1.0;
    std::size_t count = 0;
    for_each_disk_pixel(probe, binary.width(), binary.height(), [&](std::size_t i) {
        flipped[i] = target;
        ++count;
    });
    const double e = region_model_energy(image, flipped, model, p, var_floor);
    return (e - base_energy) / static_cast<double>(count);
}

}  // namespace

std::size_t probe_pixel_count(const NucleationProbe& probe, std::size_t width,
                              std::size_t height) {
    std::size_t count = 0;
    for_each_disk_pixel(probe, width, height, [&](std::size_t) { ++count; });
    return count;
}

double nucleation_delta(const ScalarField& image, const ScalarField& mask,
                        const NucleationProbe& probe, TdModel model, HeavisideParams p,
                        double var_floor) {
    require_same_shape(image, mask, "nucleation_delta");
    const ScalarField binary = binary_copy(mask);
    const double base = region_model_energy(image, binary, model, p, var_floor);
    return oracle_delta(image, binary, base, probe, model, p, var_floor);
}

TdVerifyReport verify_td(const ScalarField& image, const ScalarField& mask,
                         const TdVerifyOptions& opts) {
    require_same_shape(image, mask, "verify_td");
    const ScalarField binary = binary_copy(mask);
    const TdField td = td_field(image, binary, opts.model, opts.heaviside, opts.var_floor);
    const double base = region_model_energy(image, binary, opts.model, opts.heaviside,
                                            opts.var_floor);

    double max_abs_t = 0.0;
    for (double v : td.values.values()) {
        max_abs_t = std::max(max_abs_t, std::abs(v));
    }

    TdVerifyReport report;
    report.requested = opts.samples;
    report.tie_threshold = opts.tie_fraction * max_abs_t;

    // Candidate centres: disk inside the grid and entirely on one side.
    const auto reach = static_cast<std::size_t>(std::floor(opts.radius));
    const std::size_t w = image.width();
    const std::size_t h = image.height();
    std::vector<NucleationProbe> candidates;
    for (std::size_t y = reach; y + reach < h; ++y) {
        for (std::size_t x = reach; x + reach < w; ++x) {
            NucleationProbe probe{x, y, opts.radius, ProbeDirection::RemoveFromInside};
            const double side = binary(x, y);
            bool uniform = true;
            for_each_disk_pixel(probe, w, h,
                                [&](std::size_t i) { uniform = uniform && binary[i] == side; });
            if (!uniform) {
                continue;
            }
            probe.direction =
                side > 0.5 ? ProbeDirection::RemoveFromInside : ProbeDirection::AddToInside;
            candidates.push_back(probe);
        }
    }

    // Deterministic partial Fisher-Yates selection.
    const CounterRng rng(opts.seed, /*stream=*/0x7464);
    const std::size_t take = std::min(opts.samples, candidates.size());
    for (std::size_t k = 0; k < take; ++k) {
        const std::size_t j = k + rng.bits(k) % (candidates.size() - k);
        std::swap(candidates[k], candidates[j]);
    }

    std::vector<double> rel_errs;
    std::size_t agree = 0;
    for (std::size_t k = 0; k < take; ++k) {
        const NucleationProbe& probe = candidates[k];
        double t_mean = 0.0;
        std::size_t count = 0;
        for_each_disk_pixel(probe, w, h, [&](std::size_t i) {
            t_mean += td.values[i];
            ++count;
        });
        t_mean /= static_cast<double>(count);
        if (std::abs(t_mean) < report.tie_threshold || t_mean == 0.0) {
            ++report.excluded_ties;
            continue;
        }
        double delta =
            oracle_delta(image, binary, base, probe, opts.model, opts.heaviside, opts.var_floor);
        // Adding to the inside is the reverse move, so its rate estimates -T.
        if (probe.direction == ProbeDirection::AddToInside) {
            delta = -delta;
        }
        ++report.evaluated;
        if ((delta > 0.0) == (t_mean > 0.0)) {
            ++agree;
        }
        rel_errs.push_back(std::abs(delta - t_mean) / std::abs(t_mean));
    }

    if (report.evaluated > 0) {
        report.sign_agreement =
            static_cast<double>(agree) / static_cast<double>(report.evaluated);
        std::sort(rel_errs.begin(), rel_errs.end());
        const std::size_t n = rel_errs.size();
        report.median_rel_err =
            n % 2 ? rel_errs[n / 2] : 0.5 * (rel_errs[n / 2 - 1] + rel_errs[n / 2]);
        report.max_rel_err = rel_errs.back();
    }
    return report;
}

}  // namespace lsg
