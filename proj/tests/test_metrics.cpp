#include <cmath>

#include "doctest.h"

#include "lsg/metrics.hpp"
#include "lsg/rng.hpp"

using namespace lsg;

namespace {

ScalarField from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    ScalarField f(rows.begin()->size(), rows.size());
    std::size_t y = 0;
    for (const auto& r : rows) {
        std::size_t x = 0;
        for (double v : r) f(x++, y) = v;
        ++y;
    }
    return f;
}

}  // namespace

TEST_CASE("hand-counted 4x4 case") {
    const ScalarField gt = from_rows({{1, 1, 0, 0}, {1, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 1, 1}});
    const ScalarField pred =
        from_rows({{0.9, 0.5, 0.6, 0.0}, {0.2, 1.0, 0.0, 0.0}, {0.0, 0.49, 0.0, 0.7}, {0, 0, 1, 0}});
    // tp: (0,0) (1,0) (1,1) (2,3) = 4; fp: (2,0) (3,2) = 2; fn: (0,1) (3,3) = 2.
    const Confusion c = confusion(pred, gt);
    CHECK(c == Confusion{4, 2, 2, 8});
    const Scores s = scores(c);
    CHECK(s.dice == 8.0 / 12.0);
    CHECK(s.jaccard == 4.0 / 8.0);
    CHECK(s.precision == 4.0 / 6.0);
    CHECK(s.recall == 4.0 / 6.0);
}

TEST_CASE("identical, inverted and half-overlapping masks") {
    const ScalarField gt = from_rows({{1, 0, 1}, {0, 0, 1}});
    ScalarField inv = gt;
    for (double& v : inv.values()) v = 1.0 - v;
    const Confusion same = confusion(gt, gt);
    CHECK(same.fp == 0);
    CHECK(same.fn == 0);
    const Scores s = scores(same);
    CHECK(s.dice == 1.0);
    CHECK(s.jaccard == 1.0);
    CHECK(s.precision == 1.0);
    CHECK(s.recall == 1.0);

    const Confusion opp = confusion(inv, gt);
    CHECK(opp.tp == 0);
    CHECK(opp.tn == 0);
    const Scores d = scores(opp);
    CHECK(d.dice == 0.0);
    CHECK(d.jaccard == 0.0);
    CHECK(d.precision == 0.0);
    CHECK(d.recall == 0.0);

    const Scores half = scores({50, 50, 50, 0});
    CHECK(half.dice == 0.5);
    CHECK(half.jaccard == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(half.precision == 0.5);
    CHECK(half.recall == 0.5);
}

TEST_CASE("empty conventions") {
    const Scores both = scores({0, 0, 0, 16});
    CHECK(both.dice == 1.0);
    CHECK(both.jaccard == 1.0);
    CHECK(both.precision == 1.0);
    CHECK(both.recall == 1.0);
    const Scores pred_empty = scores({0, 0, 3, 13});
    CHECK(pred_empty.dice == 0.0);
    CHECK(pred_empty.precision == 0.0);
    CHECK(pred_empty.recall == 0.0);
    const Scores gt_empty = scores({0, 3, 0, 13});
    CHECK(gt_empty.jaccard == 0.0);
    CHECK(gt_empty.recall == 0.0);
}

TEST_CASE("threshold ties count as foreground") {
    const ScalarField gt = from_rows({{1, 0}});
    CHECK(confusion(from_rows({{0.5, 0.5}}), gt) == Confusion{1, 1, 0, 0});
    CHECK(confusion(from_rows({{0.3, 0.3}}), gt, 0.3) == Confusion{1, 1, 0, 0});
}

TEST_CASE("invalid inputs") {
    CHECK_THROWS_AS(confusion(ScalarField(2, 2), from_rows({{1, 0}, {0.5, 1}})), InvalidInput);
    CHECK_THROWS_AS(confusion(ScalarField(2, 2), ScalarField(2, 3)), InvalidInput);
}

TEST_CASE("identities on random confusions") {
    const CounterRng rng(5, 2);
    for (std::uint64_t k = 0; k < 1000; ++k) {
        const Confusion c{rng.bits(4 * k) % 1000, rng.bits(4 * k + 1) % 1000,
                          rng.bits(4 * k + 2) % 1000, rng.bits(4 * k + 3) % 1000};
        const Scores s = scores(c);
        CHECK(std::abs(s.dice - 2.0 * s.jaccard / (1.0 + s.jaccard)) <= 4e-16);
        if (c.tp > 0) {
            const double hm = 2.0 * s.precision * s.recall / (s.precision + s.recall);
            CHECK(s.dice == doctest::Approx(hm).epsilon(1e-14));
        }
        const Scores swapped = scores({c.tp, c.fn, c.fp, c.tn});
        CHECK(swapped.dice == s.dice);
        CHECK(s.dice >= 0.0);
        CHECK(s.dice <= 1.0);
    }
}

TEST_CASE("dice is symmetric in its arguments") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const CounterRng rng(seed, 9);
        ScalarField a(8, 8), b(8, 8);
        for (std::size_t i = 0; i < a.size(); ++i) {
            a[i] = rng.uniform(2 * i) < 0.4 ? 1.0 : 0.0;
            b[i] = rng.uniform(2 * i + 1) < 0.6 ? 1.0 : 0.0;
        }
        const Confusion ab = confusion(a, b);
        CHECK(ab.total() == 64);
        CHECK(scores(ab).dice == scores(confusion(b, a)).dice);
    }
}
