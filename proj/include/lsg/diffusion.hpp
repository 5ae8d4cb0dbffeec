#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "lsg/field.hpp"
#include "lsg/geodesic.hpp"
#include "lsg/levelset.hpp"

namespace lsg {

enum class ScheduleKind { Linear };

/// Variance plan of the forward chain. Step t runs from 1 to T; the arrays
/// are stored 0-based so that beta[t - 1] is beta_t.
struct DiffusionSchedule {
    std::size_t steps = 0;
    std::vector<double> beta;
    std::vector<double> alpha;
    std::vector<double> alpha_bar;
    /// sigma_t = sqrt(beta_t), except sigma_1 = 0.
    std::vector<double> sigma;

    double beta_at(std::size_t t) const { return beta[index(t)]; }
    double alpha_at(std::size_t t) const { return alpha[index(t)]; }
    double alpha_bar_at(std::size_t t) const { return alpha_bar[index(t)]; }
    double sigma_at(std::size_t t) const { return sigma[index(t)]; }
    /// Throws InvalidInput unless 1 <= t <= steps.
    std::size_t index(std::size_t t) const;
};

DiffusionSchedule make_schedule(std::size_t steps = 1000, double beta1 = 1e-4,
                                double beta_t = 0.02, ScheduleKind kind = ScheduleKind::Linear);

/// y_t = sqrt(abar_t) y0 + sqrt(1 - abar_t) noise
ScalarField forward_sample(const ScalarField& y0, std::size_t t, const DiffusionSchedule& s,
                           const ScalarField& noise);

/// y0_hat = (y_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t)
ScalarField predict_y0(const ScalarField& yt, const ScalarField& eps_hat, std::size_t t,
                       const DiffusionSchedule& s);

/// y_{t-1} = (y_t - beta_t / sqrt(1 - abar_t) eps_hat) / sqrt(alpha_t) + sigma_t xi
ScalarField reverse_step(const ScalarField& yt, const ScalarField& eps_hat, std::size_t t,
                         const DiffusionSchedule& s, const ScalarField& xi);

/// Same step written with a score s = -eps / sqrt(1 - abar_t):
/// y_{t-1} = (y_t + beta_t s) / sqrt(alpha_t) + sigma_t xi
ScalarField reverse_step_score(const ScalarField& yt, const ScalarField& score, std::size_t t,
                               const DiffusionSchedule& s, const ScalarField& xi);

ScalarField eps_to_score(const ScalarField& eps, std::size_t t, const DiffusionSchedule& s);
ScalarField score_to_eps(const ScalarField& score, std::size_t t, const DiffusionSchedule& s);

enum class GuidanceSchedule { Constant, NoiseScaled };

GuidanceSchedule parse_guidance_schedule(std::string_view name);
std::string_view to_string(GuidanceSchedule g);

struct GuidancePolicy {
    double gamma0 = 1.0;
    GuidanceSchedule schedule = GuidanceSchedule::NoiseScaled;
};

/// gamma0 * sqrt(1 - abar_t) when noise-scaled, gamma0 when constant.
double gamma_eps(const GuidancePolicy& gp, std::size_t t, const DiffusionSchedule& s);
/// The matching score-space weight, gamma_eps / sqrt(1 - abar_t).
double gamma_score(const GuidancePolicy& gp, std::size_t t, const DiffusionSchedule& s);

/// eps_hat + gamma_eps * grad_lsf
ScalarField guided_eps(const ScalarField& eps_hat, std::size_t t, const DiffusionSchedule& s,
                       const ScalarField& grad_lsf, const GuidancePolicy& gp);
/// score - gamma_score * grad_lsf
ScalarField guided_score(const ScalarField& score, std::size_t t, const DiffusionSchedule& s,
                         const ScalarField& grad_lsf, const GuidancePolicy& gp);

/// Everything the level-set energy needs besides the mask.
struct LsfSetup {
    ScalarField image;
    LevelSetConfig config;
    AreaPrior prior;
};

struct ChainRuleResult {
    ScalarField grad;
    /// Clamped clean-mask estimate the energy was evaluated on.
    ScalarField y0_hat;
    std::size_t clamped = 0;
    /// Set when a region was degenerate; grad is then zero.
    bool degenerate = false;
};

/// dL_lsf/dy_t for y0_hat = clamp(predict_y0(y_t, eps_hat), 0, 1), with
/// eps_hat held fixed and region statistics frozen (taken from y0_hat when
/// `frozen` is absent). Clamped pixels have zero derivative.
ChainRuleResult chain_rule_grad(const ScalarField& yt, const ScalarField& eps_hat, std::size_t t,
                                const DiffusionSchedule& s, const LsfSetup& lsf,
                                const ScalarField& dist,
                                const std::optional<RegionStats>& frozen = std::nullopt);

/// Source of noise predictions eps_hat(y_t, t).
class ScoreProvider {
public:
    virtual ~ScoreProvider() = default;
    virtual ScalarField eps(const ScalarField& yt, std::size_t t,
                            const DiffusionSchedule& s) const = 0;
};

/// p(y0) = sum_k w_k N(y^(k), s^2 I). eps_hat is exact for this prior.
class MixtureProvider : public ScoreProvider {
public:
    MixtureProvider(std::vector<ScalarField> modes, std::vector<double> weights,
                    double base_sigma);

    ScalarField eps(const ScalarField& yt, std::size_t t,
                    const DiffusionSchedule& s) const override;
    /// Posterior responsibilities of each mode given y_t.
    std::vector<double> responsibilities(const ScalarField& yt, std::size_t t,
                                         const DiffusionSchedule& s) const;
    /// log p_t(y_t), for checking the score numerically.
    double log_density(const ScalarField& yt, std::size_t t, const DiffusionSchedule& s) const;

    const std::vector<ScalarField>& modes() const { return modes_; }
    const std::vector<double>& weights() const { return weights_; }
    double base_sigma() const { return base_sigma_; }

private:
    std::vector<double> log_terms(const ScalarField& yt, std::size_t t,
                                  const DiffusionSchedule& s) const;

    std::vector<ScalarField> modes_;
    std::vector<double> weights_;
    double base_sigma_;
};

/// Returns the same field for every input.
class FrozenProvider : public ScoreProvider {
public:
    explicit FrozenProvider(ScalarField eps) : eps_(std::move(eps)) {}
    ScalarField eps(const ScalarField&, std::size_t, const DiffusionSchedule&) const override {
        return eps_;
    }

private:
    ScalarField eps_;
};

/// Area target for sampling: a1 = sum_k w_k sum H(phi(y^(k))).
AreaPrior mixture_area_prior(const MixtureProvider& provider, const LevelSetConfig& cfg);

enum class Formulation { Noise, Score };

struct SampleParams {
    GuidancePolicy guidance;
    std::uint64_t seed = 0;
    std::size_t ensemble = 20;
    /// Distance map refresh period in reverse steps.
    std::size_t distance_refresh = 50;
    SpeedParams speed;
    EikonalOptions eikonal;
    Formulation formulation = Formulation::Noise;
    /// Keep y_{t-1} after every reverse step of member 0.
    bool keep_trajectory = false;
};

struct SampleWarnings {
    std::size_t degenerate_steps = 0;
    std::size_t empty_distance_seeds = 0;
    std::size_t full_distance_seeds = 0;
};

struct SampleResult {
    /// Clamped mean of the members' final samples.
    ScalarField mask;
    /// Clamped final sample of each member, in member order.
    std::vector<ScalarField> members;
    /// Energy of y0_hat after each reverse step of member 0, steps T..1.
    std::vector<EnergyReport> trace;
    /// Filled only with keep_trajectory.
    std::vector<ScalarField> trajectory;
    SampleWarnings warnings;
};

SampleResult sample(const LsfSetup& lsf, const ScoreProvider& provider,
                    const DiffusionSchedule& s, const SampleParams& params);

/// Geodesic distance map used by the guidance: seed {mask > 0.5}. Empty or
/// full seeds give a zero map; `status` reports which (0 ok, 1 empty, 2 full).
ScalarField guidance_distance(const ScalarField& speed, const ScalarField& mask,
                              const EikonalOptions& opts, int* status = nullptr);

/// L_lsf of a final mask, distance map recomputed from the mask itself.
EnergyReport lsf_energy(const LsfSetup& lsf, const ScalarField& mask, const SpeedParams& speed,
                        const EikonalOptions& opts = {});

/// w_t * mean squared error.
double dpm_loss(const ScalarField& eps_true, const ScalarField& eps_hat, double w_t = 1.0);
double total_loss(double l_dpm, double l_lsf, double l_par, double eta1 = 0.5,
                  double eta2 = 0.005);

}  // namespace lsg
