#include "lsg/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lsg/rng.hpp"

namespace lsg {

std::size_t DiffusionSchedule::index(std::size_t t) const {
    if (t < 1 || t > steps) {
        throw InvalidInput("diffusion step " + std::to_string(t) + " outside [1, " +
                           std::to_string(steps) + "]");
    }
    return t - 1;
}

DiffusionSchedule make_schedule(std::size_t steps, double beta1, double beta_t,
                                ScheduleKind kind) {
    if (steps < 1) {
        throw InvalidInput("make_schedule: need at least one step");
    }
    if (!(beta1 > 0.0) || !(beta1 <= beta_t) || !(beta_t < 1.0)) {
        throw InvalidInput("make_schedule: need 0 < beta1 <= betaT < 1");
    }
    (void)kind;
    DiffusionSchedule s;
    s.steps = steps;
    s.beta.resize(steps);
    s.alpha.resize(steps);
    s.alpha_bar.resize(steps);
    s.sigma.resize(steps);
    double prod = 1.0;
    for (std::size_t i = 0; i < steps; ++i) {
        const double frac =
            steps == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
        s.beta[i] = beta1 + (beta_t - beta1) * frac;
        s.alpha[i] = 1.0 - s.beta[i];
        prod *= s.alpha[i];
        s.alpha_bar[i] = prod;
        s.sigma[i] = i == 0 ? 0.0 : std::sqrt(s.beta[i]);
    }
    return s;
}

ScalarField forward_sample(const ScalarField& y0, std::size_t t, const DiffusionSchedule& s,
                           const ScalarField& noise) {
    require_same_shape(y0, noise, "forward_sample");
    const double a = std::sqrt(s.alpha_bar_at(t));
    const double b = std::sqrt(1.0 - s.alpha_bar_at(t));
    ScalarField out(y0.width(), y0.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a * y0[i] + b * noise[i];
    }
    return out;
}

ScalarField predict_y0(const ScalarField& yt, const ScalarField& eps_hat, std::size_t t,
                       const DiffusionSchedule& s) {
    require_same_shape(yt, eps_hat, "predict_y0");
    const double a = std::sqrt(s.alpha_bar_at(t));
    const double b = std::sqrt(1.0 - s.alpha_bar_at(t));
    ScalarField out(yt.width(), yt.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (yt[i] - b * eps_hat[i]) / a;
    }
    return out;
}

ScalarField reverse_step(const ScalarField& yt, const ScalarField& eps_hat, std::size_t t,
                         const DiffusionSchedule& s, const ScalarField& xi) {
    require_same_shape(yt, eps_hat, "reverse_step");
    require_same_shape(yt, xi, "reverse_step");
    const double inv = 1.0 / std::sqrt(s.alpha_at(t));
    const double c = s.beta_at(t) / std::sqrt(1.0 - s.alpha_bar_at(t));
    const double sig = s.sigma_at(t);
    ScalarField out(yt.width(), yt.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = inv * (yt[i] - c * eps_hat[i]) + sig * xi[i];
    }
    return out;
}

ScalarField reverse_step_score(const ScalarField& yt, const ScalarField& score, std::size_t t,
                               const DiffusionSchedule& s, const ScalarField& xi) {
    require_same_shape(yt, score, "reverse_step_score");
    require_same_shape(yt, xi, "reverse_step_score");
    const double inv = 1.0 / std::sqrt(s.alpha_at(t));
    const double beta = s.beta_at(t);
    const double sig = s.sigma_at(t);
    ScalarField out(yt.width(), yt.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = inv * (yt[i] + beta * score[i]) + sig * xi[i];
    }
    return out;
}

ScalarField eps_to_score(const ScalarField& eps, std::size_t t, const DiffusionSchedule& s) {
    const double b = std::sqrt(1.0 - s.alpha_bar_at(t));
    ScalarField out(eps.width(), eps.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = -eps[i] / b;
    }
    return out;
}

ScalarField score_to_eps(const ScalarField& score, std::size_t t, const DiffusionSchedule& s) {
    const double b = std::sqrt(1.0 - s.alpha_bar_at(t));
    ScalarField out(score.width(), score.height());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = -b * score[i];
    }
    return out;
}

GuidanceSchedule parse_guidance_schedule(std::string_view name) {
    if (name == "constant") return GuidanceSchedule::Constant;
    if (name == "noise-scaled") return GuidanceSchedule::NoiseScaled;
    throw InvalidInput("unknown guidance schedule '" + std::string(name) + "'");
}

std::string_view to_string(GuidanceSchedule g) {
    return g == GuidanceSchedule::Constant ? "constant" : "noise-scaled";
}

double gamma_eps(const GuidancePolicy& gp, std::size_t t, const DiffusionSchedule& s) {
    if (!(gp.gamma0 >= 0.0)) {
        throw InvalidInput("guidance gamma0 must be >= 0");
    }
    if (gp.schedule == GuidanceSchedule::Constant) {
        return gp.gamma0;
    }
    return gp.gamma0 * std::sqrt(1.0 - s.alpha_bar_at(t));
}

double gamma_score(const GuidancePolicy& gp, std::size_t t, const DiffusionSchedule& s) {
    return gamma_eps(gp, t, s) / std::sqrt(1.0 - s.alpha_bar_at(t));
}

ScalarField guided_eps(const ScalarField& eps_hat, std::size_t t, const DiffusionSchedule& s,
                       const ScalarField& grad_lsf, const GuidancePolicy& gp) {
    require_same_shape(eps_hat, grad_lsf, "guided_eps");
    const double g = gamma_eps(gp, t, s);
    ScalarField out = eps_hat;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] += g * grad_lsf[i];
    }
    return out;
}

ScalarField guided_score(const ScalarField& score, std::size_t t, const DiffusionSchedule& s,
                         const ScalarField& grad_lsf, const GuidancePolicy& gp) {
    require_same_shape(score, grad_lsf, "guided_score");
    const double g = gamma_score(gp, t, s);
    ScalarField out = score;
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] -= g * grad_lsf[i];
    }
    return out;
}

ChainRuleResult chain_rule_grad(const ScalarField& yt, const ScalarField& eps_hat, std::size_t t,
                                const DiffusionSchedule& s, const LsfSetup& lsf,
                                const ScalarField& dist,
                                const std::optional<RegionStats>& frozen) {
    require_same_shape(yt, lsf.image, "chain_rule_grad");
    ChainRuleResult r;
    r.y0_hat = predict_y0(yt, eps_hat, t, s);
    std::vector<bool> inside(yt.size(), true);
    for (std::size_t i = 0; i < yt.size(); ++i) {
        double& v = r.y0_hat[i];
        if (v < 0.0 || v > 1.0) {
            v = std::clamp(v, 0.0, 1.0);
            inside[i] = false;
            ++r.clamped;
        }
    }
    r.grad = ScalarField(yt.width(), yt.height());
    const EnergyWeights& w = lsf.config.weights;
    if (w.region == 0.0 && w.length == 0.0 && w.area == 0.0 && w.distance == 0.0) {
        return r;
    }
    ScalarField g;
    try {
        if (frozen) {
            g = grad_energy_wrt_mask(lsf.image, r.y0_hat, lsf.config, lsf.prior, dist, *frozen);
        } else {
            g = grad_energy_wrt_mask(lsf.image, r.y0_hat, lsf.config, lsf.prior, dist, true);
        }
    } catch (const DegenerateRegion&) {
        r.degenerate = true;
        return r;
    }
    const double jac = 1.0 / std::sqrt(s.alpha_bar_at(t));
    for (std::size_t i = 0; i < yt.size(); ++i) {
        r.grad[i] = inside[i] ? jac * g[i] : 0.0;
    }
    return r;
}

MixtureProvider::MixtureProvider(std::vector<ScalarField> modes, std::vector<double> weights,
                                 double base_sigma)
    : modes_(std::move(modes)), weights_(std::move(weights)), base_sigma_(base_sigma) {
    if (modes_.empty() || modes_.size() != weights_.size()) {
        throw InvalidInput("mixture provider needs one weight per mode and at least one mode");
    }
    if (!(base_sigma_ >= 0.0)) {
        throw InvalidInput("mixture provider base sigma must be >= 0");
    }
    double total = 0.0;
    for (std::size_t k = 0; k < modes_.size(); ++k) {
        require_same_shape(modes_[0], modes_[k], "mixture provider modes");
        if (!(weights_[k] > 0.0)) {
            throw InvalidInput("mixture weights must be positive");
        }
        total += weights_[k];
    }
    if (std::abs(total - 1.0) > 1e-9) {
        throw InvalidInput("mixture weights must sum to 1");
    }
}

std::vector<double> MixtureProvider::log_terms(const ScalarField& yt, std::size_t t,
                                               const DiffusionSchedule& s) const {
    require_same_shape(yt, modes_[0], "mixture provider");
    const double ab = s.alpha_bar_at(t);
    const double a = std::sqrt(ab);
    const double v = ab * base_sigma_ * base_sigma_ + 1.0 - ab;
    std::vector<double> out(modes_.size());
    for (std::size_t k = 0; k < modes_.size(); ++k) {
        double ss = 0.0;
        for (std::size_t i = 0; i < yt.size(); ++i) {
            const double d = yt[i] - a * modes_[k][i];
            ss += d * d;
        }
        out[k] = std::log(weights_[k]) - 0.5 * ss / v;
    }
    return out;
}

std::vector<double> MixtureProvider::responsibilities(const ScalarField& yt, std::size_t t,
                                                      const DiffusionSchedule& s) const {
    std::vector<double> r = log_terms(yt, t, s);
    const double top = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double& v : r) {
        v = std::exp(v - top);
        z += v;
    }
    for (double& v : r) {
        v /= z;
    }
    return r;
}

double MixtureProvider::log_density(const ScalarField& yt, std::size_t t,
                                    const DiffusionSchedule& s) const {
    const std::vector<double> lt = log_terms(yt, t, s);
    const double top = *std::max_element(lt.begin(), lt.end());
    double z = 0.0;
    for (double v : lt) {
        z += std::exp(v - top);
    }
    const double ab = s.alpha_bar_at(t);
    const double v = ab * base_sigma_ * base_sigma_ + 1.0 - ab;
    const double n = static_cast<double>(yt.size());
    return top + std::log(z) - 0.5 * n * std::log(2.0 * M_PI * v);
}

ScalarField MixtureProvider::eps(const ScalarField& yt, std::size_t t,
                                 const DiffusionSchedule& s) const {
    const std::vector<double> r = responsibilities(yt, t, s);
    const double ab = s.alpha_bar_at(t);
    const double a = std::sqrt(ab);
    const double v = ab * base_sigma_ * base_sigma_ + 1.0 - ab;
    const double scale = std::sqrt(1.0 - ab) / v;
    ScalarField out(yt.width(), yt.height());
    for (std::size_t i = 0; i < yt.size(); ++i) {
        double m = 0.0;
        for (std::size_t k = 0; k < modes_.size(); ++k) {
            m += r[k] * modes_[k][i];
        }
        out[i] = scale * (yt[i] - a * m);
    }
    return out;
}

AreaPrior mixture_area_prior(const MixtureProvider& provider, const LevelSetConfig& cfg) {
    double a1 = 0.0;
    for (std::size_t k = 0; k < provider.modes().size(); ++k) {
        a1 += provider.weights()[k] *
              heaviside(phi_from_mask(provider.modes()[k], cfg.mapping), cfg.heaviside).sum();
    }
    return AreaPrior::from_inside_mass(a1, provider.modes()[0].size());
}

ScalarField guidance_distance(const ScalarField& speed, const ScalarField& mask,
                              const EikonalOptions& opts, int* status) {
    std::size_t seeds = 0;
    for (double v : mask.values()) {
        seeds += v > 0.5 ? 1 : 0;
    }
    int st = 0;
    ScalarField d(mask.width(), mask.height());
    if (seeds == 0) {
        st = 1;
    } else if (seeds == mask.size()) {
        st = 2;
    } else {
        d = solve_eikonal(speed, mask, opts).values;
    }
    if (status) {
        *status = st;
    }
    return d;
}

EnergyReport lsf_energy(const LsfSetup& lsf, const ScalarField& mask, const SpeedParams& speed,
                        const EikonalOptions& opts) {
    const ScalarField d = guidance_distance(speed_field(lsf.image, speed), mask, opts);
    return energy_total(lsf.image, phi_from_mask(mask, lsf.config.mapping), lsf.config,
                        lsf.prior, d);
}

namespace {

constexpr std::uint64_t kSampleStream = 0x53414D504C45;

EnergyReport safe_energy(const LsfSetup& lsf, const ScalarField& y0_hat, const ScalarField& dist) {
    try {
        return energy_total(lsf.image, phi_from_mask(y0_hat, lsf.config.mapping), lsf.config,
                            lsf.prior, dist);
    } catch (const DegenerateRegion&) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return {nan, nan, nan, nan, nan};
    }
}

ScalarField clamp01(ScalarField f) {
    for (double& v : f.values()) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return f;
}

ScalarField run_member(const LsfSetup& lsf, const ScoreProvider& provider,
                       const DiffusionSchedule& s, const SampleParams& params,
                       const ScalarField& speed, const CounterRng& rng,
                       std::vector<EnergyReport>* trace, std::vector<ScalarField>* path,
                       SampleWarnings& warn) {
    const std::size_t w = lsf.image.width();
    const std::size_t h = lsf.image.height();
    ScalarField y = rng.derive(0).normal_field(w, h);
    const ScalarField zeros(w, h);
    ScalarField dist(w, h);
    const bool guided = params.guidance.gamma0 != 0.0;
    for (std::size_t t = s.steps; t >= 1; --t) {
        const ScalarField eps = provider.eps(y, t, s);
        const std::size_t done = s.steps - t;
        if ((guided || trace) && done % params.distance_refresh == 0) {
            ScalarField y0 = clamp01(predict_y0(y, eps, t, s));
            int status = 0;
            dist = guidance_distance(speed, y0, params.eikonal, &status);
            warn.empty_distance_seeds += status == 1;
            warn.full_distance_seeds += status == 2;
        }
        const ScalarField xi = t > 1 ? rng.derive(t).normal_field(w, h) : zeros;
        ScalarField y0_hat;
        if (guided) {
            const ChainRuleResult cr = chain_rule_grad(y, eps, t, s, lsf, dist);
            warn.degenerate_steps += cr.degenerate;
            y0_hat = cr.y0_hat;
            if (params.formulation == Formulation::Noise) {
                y = reverse_step(y, guided_eps(eps, t, s, cr.grad, params.guidance), t, s, xi);
            } else {
                const ScalarField score = eps_to_score(eps, t, s);
                y = reverse_step_score(y, guided_score(score, t, s, cr.grad, params.guidance), t,
                                       s, xi);
            }
        } else {
            if (trace) {
                y0_hat = clamp01(predict_y0(y, eps, t, s));
            }
            if (params.formulation == Formulation::Noise) {
                y = reverse_step(y, eps, t, s, xi);
            } else {
                y = reverse_step_score(y, eps_to_score(eps, t, s), t, s, xi);
            }
        }
        if (trace) {
            trace->push_back(safe_energy(lsf, y0_hat, dist));
        }
        if (path) {
            path->push_back(y);
        }
    }
    return y;
}

}  // namespace

SampleResult sample(const LsfSetup& lsf, const ScoreProvider& provider,
                    const DiffusionSchedule& s, const SampleParams& params) {
    if (params.ensemble < 1) {
        throw InvalidInput("sample: ensemble must be >= 1");
    }
    if (params.distance_refresh < 1) {
        throw InvalidInput("sample: distance_refresh must be >= 1");
    }
    const ScalarField speed = speed_field(lsf.image, params.speed);
    const CounterRng root(params.seed, kSampleStream);
    SampleResult result;
    ScalarField sum(lsf.image.width(), lsf.image.height());
    for (std::size_t m = 0; m < params.ensemble; ++m) {
        const ScalarField y = run_member(lsf, provider, s, params, speed, root.derive(m),
                                         m == 0 ? &result.trace : nullptr,
                                         m == 0 && params.keep_trajectory ? &result.trajectory
                                                                          : nullptr,
                                         result.warnings);
        for (std::size_t i = 0; i < sum.size(); ++i) {
            sum[i] += y[i];
        }
        result.members.push_back(clamp01(y));
    }
    for (double& v : sum.values()) {
        v /= static_cast<double>(params.ensemble);
    }
    result.mask = clamp01(std::move(sum));
    return result;
}

double dpm_loss(const ScalarField& eps_true, const ScalarField& eps_hat, double w_t) {
    require_same_shape(eps_true, eps_hat, "dpm_loss");
    if (!(w_t > 0.0)) {
        throw InvalidInput("dpm_loss: weight must be > 0");
    }
    double ss = 0.0;
    for (std::size_t i = 0; i < eps_true.size(); ++i) {
        const double d = eps_true[i] - eps_hat[i];
        ss += d * d;
    }
    return w_t * ss / static_cast<double>(eps_true.size());
}

double total_loss(double l_dpm, double l_lsf, double l_par, double eta1, double eta2) {
    return l_dpm + eta1 * l_lsf + eta2 * l_par;
}

}  // namespace lsg
