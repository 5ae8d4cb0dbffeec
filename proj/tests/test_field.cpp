#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"

#include "lsg/field.hpp"
#include "lsg/io.hpp"
#include "lsg/phantom.hpp"
#include "lsg/rng.hpp"

using namespace lsg;

namespace {

ScalarField from_fn(std::size_t w, std::size_t h, double (*fn)(double, double)) {
    ScalarField f(w, h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            f(x, y) = fn(static_cast<double>(x), static_cast<double>(y));
        }
    }
    return f;
}

ScalarField random_field(std::size_t w, std::size_t h, std::uint64_t seed) {
    const CounterRng rng(seed, 99);
    ScalarField f(w, h);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(i);
    return f;
}

}  // namespace

TEST_CASE("ScalarField construction validates shape") {
    CHECK_THROWS_AS(ScalarField(0, 4), InvalidInput);
    CHECK_THROWS_AS(ScalarField(4, 0), InvalidInput);
    CHECK_THROWS_AS(ScalarField(2, 2, std::vector<double>{1.0, 2.0, 3.0}), InvalidInput);
    ScalarField f(3, 2, 1.5);
    CHECK(f.size() == 6);
    CHECK(f.sum() == doctest::Approx(9.0));
}

TEST_CASE("gradient stencils") {
    SUBCASE("linear field") {
        const auto g = gradient(from_fn(8, 8, [](double x, double) { return x; }));
        for (std::size_t y = 1; y < 7; ++y)
            for (std::size_t x = 1; x < 7; ++x) {
                CHECK(g.dx(x, y) == 1.0);
                CHECK(g.dy(x, y) == 0.0);
            }
    }
    SUBCASE("constant field has zero gradient everywhere") {
        const auto g = gradient(ScalarField(5, 7, 3.25));
        for (std::size_t i = 0; i < g.dx.size(); ++i) {
            CHECK(g.dx[i] == 0.0);
            CHECK(g.dy[i] == 0.0);
        }
    }
    SUBCASE("central difference of a quadratic is exact") {
        const auto g = gradient(from_fn(16, 16, [](double x, double) { return x * x; }));
        CHECK(g.dx(5, 8) == 10.0);
    }
    SUBCASE("degenerate grid") {
        CHECK_THROWS_AS(gradient(ScalarField(1, 5)), InvalidInput);
        CHECK_THROWS_AS(gradient(ScalarField(5, 1)), InvalidInput);
    }
}

TEST_CASE("gradient_adjoint is the transpose of gradient") {
    const ScalarField f = random_field(9, 7, 1);
    const ScalarField px = random_field(9, 7, 2);
    const ScalarField py = random_field(9, 7, 3);
    const auto g = gradient(f);
    const ScalarField gt = gradient_adjoint(px, py);
    double lhs = 0.0;
    double rhs = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        lhs += g.dx[i] * px[i] + g.dy[i] * py[i];
        rhs += f[i] * gt[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("curvature of a circle") {
    const double r = 20.0;
    ScalarField phi(128, 128);
    for (std::size_t y = 0; y < 128; ++y)
        for (std::size_t x = 0; x < 128; ++x)
            phi(x, y) = r - std::hypot(x - 63.5, y - 63.5);
    const ScalarField k = divergence_of_normalized_gradient(phi);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < phi.size(); ++i) {
        if (std::abs(phi[i]) < 0.5) {
            CHECK(k[i] == doctest::Approx(-1.0 / r).epsilon(0.15));
            ++checked;
        }
    }
    CHECK(checked > 50);
}

TEST_CASE("curvature of flat and constant fields") {
    const ScalarField plane = from_fn(12, 12, [](double x, double y) { return 2.0 * x - y; });
    const ScalarField k = divergence_of_normalized_gradient(plane);
    for (std::size_t y = 2; y < 10; ++y)
        for (std::size_t x = 2; x < 10; ++x) CHECK(std::abs(k(x, y)) < 1e-12);
    const ScalarField kc = divergence_of_normalized_gradient(ScalarField(6, 6, 4.0));
    for (double v : kc.values()) CHECK(v == 0.0);
}

TEST_CASE("curvature is invariant under positive scaling") {
    const ScalarField phi = from_fn(24, 24, [](double x, double y) {
        return std::sin(0.3 * x) + std::cos(0.2 * y) + 0.05 * x * y;
    });
    ScalarField scaled = phi;
    for (double& v : scaled.values()) v *= 3.7;
    const ScalarField a = divergence_of_normalized_gradient(phi);
    const ScalarField b = divergence_of_normalized_gradient(scaled);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-6).scale(1e-6));
    }
}

TEST_CASE("window_intensity") {
    const ScalarField f(3, 1, std::vector<double>{-75.0, 175.0, 50.0});
    const ScalarField w = window_intensity(f, 50.0, 250.0);
    CHECK(w[0] == 0.0);
    CHECK(w[1] == 1.0);
    CHECK(w[2] == 0.5);
    const ScalarField g(2, 1, std::vector<double>{50.0, 100.0});
    const ScalarField v = window_intensity(g, 50.0, 100.0);
    CHECK(v[0] == 0.5);
    CHECK(v[1] == 1.0);
    CHECK_THROWS_AS(window_intensity(f, 0.0, 0.0), InvalidInput);
    CHECK_THROWS_AS(window_intensity(f, 0.0, -3.0), InvalidInput);
}

TEST_CASE("phantoms") {
    SUBCASE("two disks, noiseless") {
        const Phantom p = make_phantom({});
        for (double v : p.image.values()) CHECK((v == 0.8 || v == 0.2));
        CHECK(count_components(p.mask) == 2);
    }
    SUBCASE("ring with one hole") {
        PhantomSpec s;
        s.kind = PhantomKind::RingWithHole;
        const Phantom p = make_phantom(s);
        CHECK(count_components(p.mask) == 1);
        CHECK(euler_characteristic(p.mask) == 0);
    }
    SUBCASE("every kind is binary and deterministic") {
        for (auto kind : {PhantomKind::TwoDisks, PhantomKind::RingWithHole, PhantomKind::CShape,
                          PhantomKind::TwoRects}) {
            PhantomSpec s;
            s.kind = kind;
            s.noise_sigma = 0.1;
            s.seed = 42;
            const Phantom a = make_phantom(s);
            const Phantom b = make_phantom(s);
            CHECK(a.image == b.image);
            CHECK(a.mask == b.mask);
            for (double v : a.mask.values()) CHECK((v == 0.0 || v == 1.0));
            CHECK(parse_phantom_kind(to_string(kind)) == kind);
        }
    }
    SUBCASE("different seeds differ") {
        PhantomSpec s;
        s.noise_sigma = 0.1;
        s.seed = 1;
        const Phantom a = make_phantom(s);
        s.seed = 2;
        CHECK_FALSE(a.image == make_phantom(s).image);
    }
    SUBCASE("errors") {
        PhantomSpec s;
        s.size = 31;
        CHECK_THROWS_AS(make_phantom(s), InvalidInput);
        s.size = 64;
        s.foreground = s.background;
        CHECK_THROWS_AS(make_phantom(s), InvalidInput);
        CHECK_THROWS_AS(parse_phantom_kind("triangle"), InvalidInput);
    }
}

TEST_CASE("two-texture phantom uses its own object noise") {
    PhantomSpec s;
    s.noise_sigma = 0.0;
    s.foreground_noise_sigma = 0.2;
    s.seed = 5;
    const Phantom p = make_phantom(s);
    bool varied = false;
    for (std::size_t i = 0; i < p.image.size(); ++i) {
        if (p.mask[i] == 0.0) CHECK(p.image[i] == 0.2);
        if (p.mask[i] == 1.0 && p.image[i] != 0.8) varied = true;
    }
    CHECK(varied);
}

TEST_CASE("euler characteristic and components") {
    ScalarField f(10, 10);
    for (std::size_t y = 2; y < 8; ++y)
        for (std::size_t x = 2; x < 8; ++x) f(x, y) = 1.0;
    CHECK(euler_characteristic(f) == 1);
    f(4, 4) = 0.0;
    CHECK(euler_characteristic(f) == 0);
    ScalarField d(4, 4);
    d(0, 0) = 1.0;
    d(1, 1) = 1.0;
    CHECK(count_components(d, 0.5, Connectivity::Eight) == 1);
    CHECK(count_components(d, 0.5, Connectivity::Four) == 2);
}

TEST_CASE("LSF1 round trip and errors") {
    ScalarField f(64, 64);
    const CounterRng rng(11);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(rng.normal(i));
    const auto bytes = encode_lsf1(f);
    CHECK(bytes.size() == 12 + 4 * 64 * 64);
    CHECK(decode_lsf1(bytes) == f);
    CHECK(encode_lsf1(decode_lsf1(bytes)) == bytes);

    const auto path = std::filesystem::temp_directory_path() / "lsg_test_roundtrip.lsf";
    save_field(f, path);
    CHECK(load_field(path) == f);
    std::filesystem::remove(path);

    std::vector<std::uint8_t> truncated(bytes.begin(), bytes.begin() + 12 + 4 * 100);
    try {
        (void)decode_lsf1(truncated);
        FAIL("expected a format error");
    } catch (const FormatError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("4096") != std::string::npos);
        CHECK(msg.find("100") != std::string::npos);
    }
    std::vector<std::uint8_t> bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS((void)decode_lsf1(bad), FormatError);
    CHECK_THROWS_AS((void)decode_lsf1(std::vector<std::uint8_t>{'L', 'S', 'F', '1', 1}),
                    FormatError);
    std::vector<std::uint8_t> huge = {'L', 'S', 'F', '1', 0xff, 0xff, 0xff, 0xff,
                                      0xff, 0xff, 0xff, 0xff};
    CHECK_THROWS_AS((void)decode_lsf1(huge), FormatError);
}

TEST_CASE("PGM import scaling and export") {
    const std::string text = "P5\n# comment\n2 1\n255\n";
    std::vector<std::uint8_t> bytes(text.begin(), text.end());
    bytes.push_back(255);
    bytes.push_back(0);
    const ScalarField f = decode_pgm(bytes);
    CHECK(f[0] == 1.0);
    CHECK(f[1] == 0.0);
    const ScalarField g(3, 1, std::vector<double>{0.0, 0.5, 1.0});
    const ScalarField back = decode_pgm(encode_pgm(g, 0.0, 1.0));
    CHECK(back[0] == 0.0);
    CHECK(back[1] == doctest::Approx(128.0 / 255.0));
    CHECK(back[2] == 1.0);
    CHECK_THROWS_AS((void)decode_pgm(std::vector<std::uint8_t>{'P', '2'}), FormatError);
}

TEST_CASE("counter rng is order independent") {
    const CounterRng a(7, 3);
    const CounterRng b(7, 3);
    CHECK(a.normal(100) == b.normal(100));
    CHECK(a.bits(5) != a.bits(6));
    CHECK(a.derive(1).bits(0) != a.derive(2).bits(0));
    double mean = 0.0;
    for (std::uint64_t i = 0; i < 20000; ++i) mean += a.normal(i);
    CHECK(std::abs(mean / 20000.0) < 0.03);
}
