#pragma once

#include <cstdint>

#include "lsg/field.hpp"

namespace lsg {

struct Confusion {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    bool operator==(const Confusion&) const = default;
};

/// pred >= threshold is foreground. gt must contain only 0 and 1.
Confusion confusion(const ScalarField& pred, const ScalarField& gt, double threshold = 0.5);

struct Scores {
    double dice = 0.0;
    double jaccard = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

/// Both masks empty scores 1 everywhere; any other zero denominator scores 0.
Scores scores(const Confusion& c);

}  // namespace lsg
