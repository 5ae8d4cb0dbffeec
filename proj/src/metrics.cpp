#include "lsg/metrics.hpp"

#include <string>

namespace lsg {

Confusion confusion(const ScalarField& pred, const ScalarField& gt, double threshold) {
    require_same_shape(pred, gt, "confusion");
    Confusion c;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt[i] != 0.0 && gt[i] != 1.0) {
            throw InvalidInput("confusion: ground truth is not binary at index " +
                               std::to_string(i));
        }
        const bool p = pred[i] >= threshold;
        const bool g = gt[i] == 1.0;
        if (p && g) {
            ++c.tp;
        } else if (p) {
            ++c.fp;
        } else if (g) {
            ++c.fn;
        } else {
            ++c.tn;
        }
    }
    return c;
}

Scores scores(const Confusion& c) {
    if (c.tp + c.fp + c.fn == 0) {
        return {1.0, 1.0, 1.0, 1.0};
    }
    const auto tp = static_cast<double>(c.tp);
    const auto fp = static_cast<double>(c.fp);
    const auto fn = static_cast<double>(c.fn);
    auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    Scores s;
    s.dice = ratio(2.0 * tp, 2.0 * tp + fp + fn);
    s.jaccard = ratio(tp, tp + fp + fn);
    s.precision = ratio(tp, tp + fp);
    s.recall = ratio(tp, tp + fn);
    return s;
}

}  // namespace lsg
