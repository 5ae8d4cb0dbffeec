#include <cmath>
#include <cstdint>

#include "doctest.h"

#include "lsg/levelset.hpp"
#include "lsg/phantom.hpp"
#include "lsg/topo.hpp"

using namespace lsg;

namespace {

constexpr HeavisideParams kCrisp{1e-9};

// Left half 1 (inside), right half 0.
Phantom halves(std::size_t n) {
    Phantom p{ScalarField(n, n), ScalarField(n, n)};
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n / 2; ++x) p.image(x, y) = p.mask(x, y) = 1.0;
    return p;
}

Phantom two_texture(std::uint64_t seed) {
    PhantomSpec s;
    s.noise_sigma = 0.05;
    s.foreground_noise_sigma = 0.2;
    s.seed = seed;
    return make_phantom(s);
}

}  // namespace

TEST_CASE("CV topological derivative values") {
    Phantom p = halves(16);
    const TdField td = td_field_cv(p.image, p.mask, kCrisp);
    CHECK(td.model == TdModel::Cv);
    CHECK(td.values(2, 3) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(td.values(12, 3) == doctest::Approx(-1.0).epsilon(1e-9));

    // A mid-valued pixel on each side keeps (c1 + c2) / 2 at exactly 0.5.
    p.image(3, 3) = 0.5;
    p.image(12, 3) = 0.5;
    const TdField mid = td_field_cv(p.image, p.mask, kCrisp);
    CHECK(std::abs(mid.values(3, 3)) < 1e-12);
}

TEST_CASE("Gaussian topological derivative values") {
    RegionStats s;
    s.mean_in = 0.0;
    s.var_in = 1.0;
    s.mean_out = 10.0;
    s.var_out = 1.0;
    CHECK(-region_nll_in(0.0, s) + region_nll_out(0.0, s) == doctest::Approx(100.0));

    const Phantom p = two_texture(3);
    const TdField td = td_field_gaussian(p.image, p.mask, {1e-3});
    const RegionStats st = region_stats(p.image, phi_from_mask(p.mask), {1e-3}, kDefaultVarFloor);
    for (std::size_t i = 0; i < td.values.size(); i += 37) {
        CHECK(td.values[i] ==
              doctest::Approx(-region_nll_in(p.image[i], st) + region_nll_out(p.image[i], st)));
    }
    CHECK(td.values.all_finite());
}

TEST_CASE("equal variances reduce the Gaussian field to the CV field") {
    const std::size_t n = 16;
    ScalarField img(n, n), mask(n, n);
    const double a = 0.07;
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x) {
            const double pattern = (x + y) % 2 == 0 ? a : -a;
            mask(x, y) = x < n / 2 ? 1.0 : 0.0;
            img(x, y) = (x < n / 2 ? 0.8 : 0.2) + pattern;
        }
    const TdField g = td_field_gaussian(img, mask, kCrisp);
    const TdField c = td_field_cv(img, mask, kCrisp);
    const RegionStats s = region_stats(img, phi_from_mask(mask), kCrisp, kDefaultVarFloor);
    REQUIRE(s.var_in == doctest::Approx(s.var_out).epsilon(1e-12));
    for (std::size_t i = 0; i < img.size(); ++i) {
        CHECK(g.values[i] == doctest::Approx(c.values[i] / s.var_in).epsilon(1e-9));
    }
}

TEST_CASE("CV descent agrees in sign with the topological derivative") {
    // Soft mask near the zero level; -dE/dphi measured by finite differences
    // of the CV energy with statistics recomputed.
    const Phantom p = two_texture(9);
    ScalarField mask = p.mask;
    for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = 0.45 + 0.1 * mask[i];
    const HeavisideParams hp{1.5};
    const TdField td = td_field_cv(p.image, mask, hp);
    double tmax = 0.0;
    for (double v : td.values.values()) tmax = std::max(tmax, std::abs(v));
    std::size_t checked = 0;
    for (std::size_t i = 0; i < mask.size(); i += 13) {
        if (std::abs(td.values[i]) < 1e-2 * tmax) continue;
        ScalarField up = mask, down = mask;
        up[i] += 1e-5;
        down[i] -= 1e-5;
        const double slope = (region_model_energy(p.image, up, TdModel::Cv, hp) -
                              region_model_energy(p.image, down, TdModel::Cv, hp)) /
                             2e-5;
        CHECK((-slope > 0) == (td.values[i] > 0));
        CHECK(-slope == doctest::Approx(dirac(mask[i] - 0.5, hp) * td.values[i]).epsilon(1e-4));
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("nucleation oracle") {
    SUBCASE("flipping an inside pixel of a two-constant image") {
        const Phantom p = halves(32);
        const NucleationProbe probe{5, 10, 1.0, ProbeDirection::RemoveFromInside};
        CHECK(probe_pixel_count(probe, 32, 32) == 5);
        const double d = nucleation_delta(p.image, p.mask, probe, TdModel::Cv, {1e-3});
        CHECK(d == doctest::Approx(1.0).epsilon(5.0 * 5.0 / 512.0));
    }
    SUBCASE("probe over pixels with T = 0") {
        Phantom p = halves(32);
        for (std::size_t y = 9; y <= 11; ++y)
            for (std::size_t x = 4; x <= 6; ++x) {
                p.image(x, y) = 0.5;
                p.image(x + 16, y) = 0.5;
            }
        const NucleationProbe probe{5, 10, 1.0, ProbeDirection::RemoveFromInside};
        CHECK(std::abs(nucleation_delta(p.image, p.mask, probe, TdModel::Cv, {1e-3})) < 0.01);
    }
    SUBCASE("oracle error shrinks with the radius") {
        const Phantom p = make_phantom({});
        const HeavisideParams hp{1e-3};
        const TdField td = td_field_cv(p.image, p.mask, hp);
        const std::size_t cx = 19;
        const std::size_t cy = 32;
        double prev = 1e300;
        for (double r : {3.0, 2.0, 1.0}) {
            const NucleationProbe probe{cx, cy, r, ProbeDirection::RemoveFromInside};
            const double err =
                std::abs(nucleation_delta(p.image, p.mask, probe, TdModel::Cv, hp) - td.values(cx, cy));
            CHECK(err < prev);
            prev = err;
        }
    }
    SUBCASE("errors") {
        const Phantom p = halves(32);
        CHECK_THROWS_AS(probe_pixel_count({1, 10, 2.0, ProbeDirection::RemoveFromInside}, 32, 32),
                        InvalidInput);
        CHECK_THROWS_AS(probe_pixel_count({10, 10, 0.5, ProbeDirection::RemoveFromInside}, 32, 32),
                        InvalidInput);
        ScalarField tiny(32, 32);
        tiny(10, 10) = 1.0;
        const NucleationProbe probe{10, 10, 1.0, ProbeDirection::RemoveFromInside};
        CHECK_THROWS_AS(nucleation_delta(p.image, tiny, probe, TdModel::Cv, {1e-13}),
                        DegenerateRegion);
    }
}

TEST_CASE("verify_td on the noiseless phantom (CV)") {
    const Phantom p = make_phantom({});
    TdVerifyOptions o;
    const TdVerifyReport r = verify_td(p.image, p.mask, o);
    CHECK(r.evaluated == 200);
    REQUIRE(r.sign_agreement.has_value());
    CHECK(*r.sign_agreement == 1.0);
    CHECK(*r.median_rel_err <= 0.10);
}

TEST_CASE("verify_td on a two-texture phantom (Gaussian)") {
    const Phantom p = two_texture(3);
    TdVerifyOptions o;
    o.model = TdModel::Gaussian;
    o.seed = 3;
    const TdVerifyReport r = verify_td(p.image, p.mask, o);
    REQUIRE(r.sign_agreement.has_value());
    CHECK(*r.sign_agreement >= 0.95);
    CHECK(*r.median_rel_err <= 0.15);
}

TEST_CASE("verify_td with an oversized tie threshold") {
    const Phantom p = make_phantom({});
    TdVerifyOptions o;
    o.tie_fraction = 2.0;
    o.samples = 20;
    const TdVerifyReport r = verify_td(p.image, p.mask, o);
    CHECK(r.evaluated == 0);
    CHECK(r.excluded_ties == 20);
    CHECK_FALSE(r.sign_agreement.has_value());
    CHECK_FALSE(r.median_rel_err.has_value());
}

TEST_CASE("verify_td is deterministic") {
    const Phantom p = two_texture(4);
    TdVerifyOptions o;
    o.model = TdModel::Gaussian;
    o.seed = 11;
    const TdVerifyReport a = verify_td(p.image, p.mask, o);
    const TdVerifyReport b = verify_td(p.image, p.mask, o);
    CHECK(*a.median_rel_err == *b.median_rel_err);
    CHECK(*a.max_rel_err == *b.max_rel_err);
}

TEST_CASE("doubling the phantom halves the finite-size gap") {
    auto gap = [](std::size_t n) {
        PhantomSpec s;
        s.size = n;
        const Phantom p = make_phantom(s);
        const HeavisideParams hp{1e-3};
        const std::size_t cx = static_cast<std::size_t>(0.3 * static_cast<double>(n));
        const std::size_t cy = n / 2;
        const NucleationProbe probe{cx, cy, 2.0, ProbeDirection::RemoveFromInside};
        return std::abs(nucleation_delta(p.image, p.mask, probe, TdModel::Cv, hp) -
                        td_field_cv(p.image, p.mask, hp).values(cx, cy));
    };
    const double ratio = gap(128) / gap(64);
    CHECK(ratio >= 0.3);
    CHECK(ratio <= 0.7);
}

TEST_CASE("model names") {
    CHECK(parse_td_model("cv") == TdModel::Cv);
    CHECK(parse_td_model(to_string(TdModel::Gaussian)) == TdModel::Gaussian);
    CHECK_THROWS_AS(parse_td_model("chan"), InvalidInput);
}
