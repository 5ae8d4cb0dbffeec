#include "lsg/levelset.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lsg {

double heaviside(double s, HeavisideParams p) noexcept {
    return 0.5 * (1.0 + (2.0 / std::numbers::pi) * std::atan(s / p.epsilon));
}

double dirac(double s, HeavisideParams p) noexcept {
    return (1.0 / std::numbers::pi) * p.epsilon / (p.epsilon * p.epsilon + s * s);
}

namespace {

void require_epsilon(HeavisideParams p) {
    if (!(p.epsilon > 0.0)) {
        throw InvalidInput("Heaviside epsilon must be > 0");
    }
}

template <class Fn>
ScalarField map_field(const ScalarField& f, Fn fn) {
    ScalarField out(f.width(), f.height());
    for (std::size_t i = 0; i < f.size(); ++i) {
        out[i] = fn(f[i]);
    }
    return out;
}

}  // namespace

ScalarField heaviside(const ScalarField& phi, HeavisideParams p) {
    require_epsilon(p);
    return map_field(phi, [p](double s) { return heaviside(s, p); });
}

ScalarField dirac(const ScalarField& phi, HeavisideParams p) {
    require_epsilon(p);
    return map_field(phi, [p](double s) { return dirac(s, p); });
}

ScalarField phi_from_mask(const ScalarField& mask, PhiMapping mapping) {
    const double offset = mapping == PhiMapping::Offset ? 0.5 : 0.0;
    return map_field(mask, [offset](double y) { return y - offset; });
}

ScalarField mask_from_phi(const ScalarField& phi, PhiMapping mapping) {
    const double offset = mapping == PhiMapping::Offset ? 0.5 : 0.0;
    return map_field(phi, [offset](double s) { return s + offset; });
}

RegionStats region_stats(const ScalarField& image, const ScalarField& phi, HeavisideParams p,
                         double var_floor) {
    require_same_shape(image, phi, "region_stats");
    require_epsilon(p);
    const ScalarField h = heaviside(phi, p);
    RegionStats s;
    double sum_in = 0.0;
    double sum_out = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        s.mass_in += h[i];
        s.mass_out += 1.0 - h[i];
        sum_in += h[i] * image[i];
        sum_out += (1.0 - h[i]) * image[i];
    }
    const double limit = 1e-12 * static_cast<double>(image.size());
    if (s.mass_in < limit) {
        throw DegenerateRegion("region_stats: inside region is empty (mass " +
                               std::to_string(s.mass_in) + ")");
    }
    if (s.mass_out < limit) {
        throw DegenerateRegion("region_stats: outside region is empty (mass " +
                               std::to_string(s.mass_out) + ")");
    }
    s.mean_in = sum_in / s.mass_in;
    s.mean_out = sum_out / s.mass_out;
    double sq_in = 0.0;
    double sq_out = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double di = image[i] - s.mean_in;
        const double dout = image[i] - s.mean_out;
        sq_in += h[i] * di * di;
        sq_out += (1.0 - h[i]) * dout * dout;
    }
    s.raw_var_in = sq_in / s.mass_in;
    s.raw_var_out = sq_out / s.mass_out;
    s.var_in = std::max(s.raw_var_in, var_floor);
    s.var_out = std::max(s.raw_var_out, var_floor);
    return s;
}

AreaPrior AreaPrior::from_inside_mass(double mass, std::size_t pixel_count) {
    return AreaPrior{mass, static_cast<double>(pixel_count) - mass, false};
}

AreaPrior AreaPrior::explicit_targets(double a1, double a2, std::size_t pixel_count) {
    if (a1 < 0.0 || a2 < 0.0) {
        throw InvalidInput("AreaPrior: targets must be >= 0");
    }
    const double n = static_cast<double>(pixel_count);
    return AreaPrior{a1, a2, std::abs(a1 + a2 - n) > 1e-9 * n};
}

double region_nll_in(double intensity, const RegionStats& s) noexcept {
    const double d = intensity - s.mean_in;
    return std::log(s.var_in) + d * d / s.var_in;
}

double region_nll_out(double intensity, const RegionStats& s) noexcept {
    const double d = intensity - s.mean_out;
    return std::log(s.var_out) + d * d / s.var_out;
}

double energy_region(const ScalarField& image, const ScalarField& phi, HeavisideParams p,
                     const RegionStats& stats) {
    require_same_shape(image, phi, "energy_region");
    require_epsilon(p);
    double e = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double h = heaviside(phi[i], p);
        e += region_nll_in(image[i], stats) * h + region_nll_out(image[i], stats) * (1.0 - h);
    }
    return e;
}

double energy_length(const ScalarField& phi, HeavisideParams p) {
    const Gradient g = gradient(heaviside(phi, p));
    double e = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        e += std::hypot(g.dx[i], g.dy[i]);
    }
    return e;
}

namespace {

struct Masses {
    double inside = 0.0;
    double outside = 0.0;
};

Masses heaviside_masses(const ScalarField& phi, HeavisideParams p) {
    require_epsilon(p);
    Masses m;
    for (double s : phi.values()) {
        const double h = heaviside(s, p);
        m.inside += h;
        m.outside += 1.0 - h;
    }
    return m;
}

void require_nonnegative_distance(const ScalarField& dist) {
    for (double d : dist.values()) {
        if (!(d >= 0.0)) {
            throw InvalidInput("distance map must be non-negative and finite");
        }
    }
}

}  // namespace

double energy_area(const ScalarField& phi, HeavisideParams p, const AreaPrior& prior) {
    const Masses m = heaviside_masses(phi, p);
    const double d1 = m.inside - prior.a1;
    const double d2 = m.outside - prior.a2;
    return d1 * d1 + d2 * d2;
}

double energy_distance(const ScalarField& phi, HeavisideParams p, const ScalarField& dist) {
    require_same_shape(phi, dist, "energy_distance");
    require_epsilon(p);
    require_nonnegative_distance(dist);
    double e = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        e += dist[i] * heaviside(phi[i], p);
    }
    return e;
}

EnergyReport energy_total(const ScalarField& image, const ScalarField& phi,
                          const LevelSetConfig& cfg, const AreaPrior& prior,
                          const ScalarField& dist, const std::optional<RegionStats>& frozen) {
    require_same_shape(image, phi, "energy_total");
    require_same_shape(image, dist, "energy_total");
    const auto& w = cfg.weights;
    EnergyReport r;
    if (w.region != 0.0) {
        const RegionStats s =
            frozen ? *frozen : region_stats(image, phi, cfg.heaviside, cfg.var_floor);
        r.region = energy_region(image, phi, cfg.heaviside, s);
    }
    r.length = energy_length(phi, cfg.heaviside);
    r.area = energy_area(phi, cfg.heaviside, prior);
    r.distance = energy_distance(phi, cfg.heaviside, dist);
    r.total = w.region * r.region + w.length * r.length + w.area * r.area +
              w.distance * r.distance;
    return r;
}

TermGradients energy_gradients_phi(const ScalarField& image, const ScalarField& phi,
                                   const LevelSetConfig& cfg, const AreaPrior& prior,
                                   const ScalarField& dist, const RegionStats& stats) {
    require_same_shape(image, phi, "energy_gradients_phi");
    require_same_shape(image, dist, "energy_gradients_phi");
    require_nonnegative_distance(dist);
    const HeavisideParams p = cfg.heaviside;
    const std::size_t w = phi.width();
    const std::size_t h = phi.height();
    const ScalarField delta = dirac(phi, p);
    const ScalarField hv = heaviside(phi, p);

    TermGradients g{ScalarField(w, h), ScalarField(w, h), ScalarField(w, h), ScalarField(w, h),
                    ScalarField(w, h)};

    // Length: d/dH sum |G H| = G^T (G H / |G H|), zero where the gradient vanishes.
    Gradient gh = gradient(hv);
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double n = std::hypot(gh.dx[i], gh.dy[i]);
        if (n > 0.0) {
            gh.dx[i] /= n;
            gh.dy[i] /= n;
        } else {
            gh.dx[i] = 0.0;
            gh.dy[i] = 0.0;
        }
    }
    const ScalarField length_dh = gradient_adjoint(gh.dx, gh.dy);

    double inside = 0.0;
    double outside = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        inside += hv[i];
        outside += 1.0 - hv[i];
    }
    const double area_dh = 2.0 * (inside - prior.a1) - 2.0 * (outside - prior.a2);

    const auto& wt = cfg.weights;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        const double d = delta[i];
        g.region[i] = d * (region_nll_in(image[i], stats) - region_nll_out(image[i], stats));
        g.length[i] = d * length_dh[i];
        g.area[i] = d * area_dh;
        g.distance[i] = d * dist[i];
        g.total[i] = wt.region * g.region[i] + wt.length * g.length[i] +
                     wt.area * g.area[i] + wt.distance * g.distance[i];
    }
    return g;
}

ScalarField region_stats_backreaction(const ScalarField& image, const ScalarField& phi,
                                      HeavisideParams p, const RegionStats& s) {
    require_same_shape(image, phi, "region_stats_backreaction");
    const ScalarField hv = heaviside(phi, p);
    // Partial derivatives of the region energy with respect to each statistic.
    double de_dmean_in = 0.0;
    double de_dmean_out = 0.0;
    double de_dvar_in = 0.0;
    double de_dvar_out = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double di = image[i] - s.mean_in;
        const double dout = image[i] - s.mean_out;
        de_dmean_in += hv[i] * (-2.0 * di / s.var_in);
        de_dmean_out += (1.0 - hv[i]) * (-2.0 * dout / s.var_out);
        de_dvar_in += hv[i] * (1.0 / s.var_in - di * di / (s.var_in * s.var_in));
        de_dvar_out += (1.0 - hv[i]) * (1.0 / s.var_out - dout * dout / (s.var_out * s.var_out));
    }
    // A floored variance is constant in H.
    const bool var_in_live = s.raw_var_in >= s.var_in;
    const bool var_out_live = s.raw_var_out >= s.var_out;
    ScalarField out(phi.width(), phi.height());
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double di = image[i] - s.mean_in;
        const double dout = image[i] - s.mean_out;
        double dh = de_dmean_in * di / s.mass_in - de_dmean_out * dout / s.mass_out;
        if (var_in_live) {
            dh += de_dvar_in * (di * di - s.raw_var_in) / s.mass_in;
        }
        if (var_out_live) {
            dh -= de_dvar_out * (dout * dout - s.raw_var_out) / s.mass_out;
        }
        out[i] = dirac(phi[i], p) * dh;
    }
    return out;
}

ScalarField grad_energy_wrt_mask(const ScalarField& image, const ScalarField& mask,
                                 const LevelSetConfig& cfg, const AreaPrior& prior,
                                 const ScalarField& dist, const RegionStats& frozen) {
    const ScalarField phi = phi_from_mask(mask, cfg.mapping);
    // d phi / d y = 1 for both mappings.
    return energy_gradients_phi(image, phi, cfg, prior, dist, frozen).total;
}

ScalarField grad_energy_wrt_mask(const ScalarField& image, const ScalarField& mask,
                                 const LevelSetConfig& cfg, const AreaPrior& prior,
                                 const ScalarField& dist, bool freeze_stats) {
    const ScalarField phi = phi_from_mask(mask, cfg.mapping);
    if (cfg.weights.region == 0.0) {
        const RegionStats unused;
        return energy_gradients_phi(image, phi, cfg, prior, dist, unused).total;
    }
    const RegionStats stats = region_stats(image, phi, cfg.heaviside, cfg.var_floor);
    ScalarField g = energy_gradients_phi(image, phi, cfg, prior, dist, stats).total;
    if (!freeze_stats) {
        const ScalarField back = region_stats_backreaction(image, phi, cfg.heaviside, stats);
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += cfg.weights.region * back[i];
        }
    }
    return g;
}

DivergenceError::DivergenceError(const std::string& message, std::size_t step)
    : NumericalError(message + " at step " + std::to_string(step)), step_(step) {}

EvolveResult evolve(const ScalarField& image, const ScalarField& phi0, const LevelSetConfig& cfg,
                    const AreaPrior& prior, const ScalarField& dist, const EvolveParams& params) {
    require_same_shape(image, phi0, "evolve");
    require_same_shape(image, dist, "evolve");
    if (!(params.dt >= 0.0)) {
        throw InvalidInput("evolve: dt must be >= 0");
    }
    if (params.steps == 0) {
        throw InvalidInput("evolve: steps must be >= 1");
    }
    const std::size_t refresh = params.stats_refresh == 0 ? 1 : params.stats_refresh;
    EvolveResult result{phi0, {}};
    result.trace.reserve(params.steps);
    ScalarField& phi = result.phi;
    RegionStats stats;
    const bool use_region = cfg.weights.region != 0.0;
    for (std::size_t step = 0; step < params.steps; ++step) {
        if (use_region && step % refresh == 0) {
            stats = region_stats(image, phi, cfg.heaviside, cfg.var_floor);
        }
        const TermGradients g = energy_gradients_phi(image, phi, cfg, prior, dist, stats);
        for (std::size_t i = 0; i < phi.size(); ++i) {
            phi[i] -= params.dt * g.total[i];
        }
        EnergyReport report;
        try {
            report = energy_total(image, phi, cfg, prior, dist);
        } catch (const DegenerateRegion& e) {
            throw DivergenceError(std::string("evolve: ") + e.what(), step + 1);
        }
        if (!std::isfinite(report.total) || !phi.all_finite()) {
            throw DivergenceError("evolve: energy became non-finite", step + 1);
        }
        result.trace.push_back(report);
    }
    return result;
}

}  // namespace lsg
