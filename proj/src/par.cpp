#include "lsg/par.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsg {

AffinityKernel::AffinityKernel(std::size_t width, std::size_t height)
    : width_(width), height_(height), w_(width * height, std::array<double, 8>{}) {
    if (width == 0 || height == 0) {
        throw InvalidInput("affinity kernel needs a non-empty grid");
    }
}

namespace {

double local_std(const ScalarField& f, long x, long y) {
    const auto w = static_cast<long>(f.width());
    const auto h = static_cast<long>(f.height());
    double sum = 0.0;
    double count = 0.0;
    for (long yy = std::max(0L, y - 1); yy <= std::min(h - 1, y + 1); ++yy) {
        for (long xx = std::max(0L, x - 1); xx <= std::min(w - 1, x + 1); ++xx) {
            sum += f(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy));
            count += 1.0;
        }
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (long yy = std::max(0L, y - 1); yy <= std::min(h - 1, y + 1); ++yy) {
        for (long xx = std::max(0L, x - 1); xx <= std::min(w - 1, x + 1); ++xx) {
            const double d = f(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy)) - mean;
            ss += d * d;
        }
    }
    return std::sqrt(ss / count);
}

}  // namespace

AffinityKernel affinity_kernel(const ScalarField& image, const ParParams& pp) {
    if (!(pp.sigma_floor > 0.0)) {
        throw InvalidInput("affinity_kernel: sigma_floor must be > 0");
    }
    if (pp.position_weight < 0.0) {
        throw InvalidInput("affinity_kernel: position_weight must be >= 0");
    }
    if (image.size() < 2) {
        throw InvalidInput("affinity_kernel: a single pixel has no neighbours");
    }
    const auto w = static_cast<long>(image.width());
    const auto h = static_cast<long>(image.height());
    AffinityKernel k(image.width(), image.height());
    const double pos2 = pp.feature == ParFeature::IntensityPosition
                            ? pp.position_weight * pp.position_weight
                            : 0.0;
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            const double sigma = std::max(local_std(image, x, y), pp.sigma_floor);
            const double p = image(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            std::array<double, 8> logits{};
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t n = 0; n < 8; ++n) {
                const long xx = x + kNeighbourOffsets[n][0];
                const long yy = y + kNeighbourOffsets[n][1];
                if (xx < 0 || yy < 0 || xx >= w || yy >= h) {
                    logits[n] = -std::numeric_limits<double>::infinity();
                    continue;
                }
                const double dp =
                    p - image(static_cast<std::size_t>(xx), static_cast<std::size_t>(yy));
                const double off2 = static_cast<double>(kNeighbourOffsets[n][0] * kNeighbourOffsets[n][0] +
                                                        kNeighbourOffsets[n][1] * kNeighbourOffsets[n][1]);
                logits[n] = -(dp * dp + pos2 * off2) / (sigma * sigma);
                top = std::max(top, logits[n]);
            }
            auto& out = k.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            double z = 0.0;
            for (std::size_t n = 0; n < 8; ++n) {
                out[n] = std::isinf(logits[n]) ? 0.0 : std::exp(logits[n] - top);
                z += out[n];
            }
            for (double& v : out) {
                v /= z;
            }
        }
    }
    return k;
}

ScalarField refine(const ScalarField& mask, const AffinityKernel& kernel, std::size_t tau) {
    if (mask.width() != kernel.width() || mask.height() != kernel.height()) {
        throw InvalidInput("refine: mask and kernel shapes differ");
    }
    const auto w = static_cast<long>(mask.width());
    const auto h = static_cast<long>(mask.height());
    ScalarField cur = mask;
    ScalarField next(mask.width(), mask.height());
    for (std::size_t t = 0; t < tau; ++t) {
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < w; ++x) {
                const auto& kw = kernel.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
                double acc = 0.0;
                for (std::size_t n = 0; n < 8; ++n) {
                    if (kw[n] == 0.0) {
                        continue;
                    }
                    acc += kw[n] * cur(static_cast<std::size_t>(x + kNeighbourOffsets[n][0]),
                                       static_cast<std::size_t>(y + kNeighbourOffsets[n][1]));
                }
                next(static_cast<std::size_t>(x), static_cast<std::size_t>(y)) = acc;
            }
        }
        std::swap(cur, next);
    }
    return cur;
}

ParLoss par_loss(const ScalarField& mask, const ScalarField& refined) {
    require_same_shape(mask, refined, "par_loss");
    ParLoss loss;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        loss.sum += std::abs(mask[i] - refined[i]);
    }
    loss.mean = loss.sum / static_cast<double>(mask.size());
    return loss;
}

}  // namespace lsg
