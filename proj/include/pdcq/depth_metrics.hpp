#pragma once

// Per-pixel absolute relative depth error, lambda inlier masks, and the
// standard depth metric suite (Abs Rel, RMSE, threshold accuracies).

#include <cmath>
#include <cstdint>
#include <vector>

#include "pdcq/core.hpp"

namespace pdcq {

// Per-pixel |pred - gt| / gt plus the validity mask. A pixel participates
// only where the ground truth has a measurement inside the configured
// depth range; the prediction is never used to decide validity.
struct AbsRelGrid {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<double> error;
    std::vector<uint8_t> valid;

    size_t size() const { return error.size(); }
};

inline AbsRelGrid abs_rel_map(const DepthMap& pred, const DepthMap& gt, const PdcqConfig& config) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ConfigError("depth maps have mismatched dimensions");
    AbsRelGrid grid;
    grid.width = gt.width;
    grid.height = gt.height;
    grid.error.assign(gt.size(), 0.0);
    grid.valid.assign(gt.size(), 0);
    const double lo = config.min_depth;
    const double hi = config.max_depth;
    for (size_t i = 0; i < gt.size(); ++i) {
        const double g = static_cast<double>(gt.depth[i]);
        if (!(g > 0.0) || g < lo || g > hi) continue;
        grid.valid[i] = 1;
        grid.error[i] = std::abs(static_cast<double>(pred.depth[i]) - g) / g;
    }
    return grid;
}

// True where the pixel survives filtering at this threshold. Pixels
// without a ground-truth measurement are always inliers: absence of depth
// is not evidence of error.
inline std::vector<uint8_t> inlier_mask(const AbsRelGrid& grid, double lambda,
                                        const PdcqConfig& config) {
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
    std::vector<uint8_t> mask(grid.size(), 1);
    if (config.inlier_inclusive) {
        for (size_t i = 0; i < grid.size(); ++i)
            if (grid.valid[i] && grid.error[i] > lambda) mask[i] = 0;
    } else {
        for (size_t i = 0; i < grid.size(); ++i)
            if (grid.valid[i] && grid.error[i] >= lambda) mask[i] = 0;
    }
    return mask;
}

struct DepthMetrics {
    double abs_rel = 0.0;
    double rmse = 0.0;
    double delta1 = 0.0;
    double delta2 = 0.0;
    double delta3 = 0.0;
    uint64_t valid_pixel_count = 0;
};

// Abs Rel, RMSE and delta < 1.25^k over pixels with a valid ground-truth
// measurement in range. Zero valid pixels yields the explicit empty value
// (all zeros), never NaN.
inline DepthMetrics depth_metrics(const DepthMap& pred, const DepthMap& gt,
                                  const PdcqConfig& config) {
    if (pred.width != gt.width || pred.height != gt.height)
        throw ConfigError("depth maps have mismatched dimensions");
    const double lo = config.min_depth;
    const double hi = config.max_depth;
    const double t1 = 1.25;
    const double t2 = 1.25 * 1.25;
    const double t3 = 1.25 * 1.25 * 1.25;

    double abs_rel_sum = 0.0;
    double sq_sum = 0.0;
    uint64_t n = 0, n1 = 0, n2 = 0, n3 = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        const double g = static_cast<double>(gt.depth[i]);
        if (!(g > 0.0) || g < lo || g > hi) continue;
        const double p = static_cast<double>(pred.depth[i]);
        const double diff = p - g;
        abs_rel_sum += std::abs(diff) / g;
        sq_sum += diff * diff;
        const double ratio = p > 0.0 ? std::max(p / g, g / p) : std::numeric_limits<double>::infinity();
        if (ratio < t1) ++n1;
        if (ratio < t2) ++n2;
        if (ratio < t3) ++n3;
        ++n;
    }

    DepthMetrics m;
    m.valid_pixel_count = n;
    if (n == 0) return m;
    const double dn = static_cast<double>(n);
    m.abs_rel = abs_rel_sum / dn;
    m.rmse = std::sqrt(sq_sum / dn);
    m.delta1 = static_cast<double>(n1) / dn;
    m.delta2 = static_cast<double>(n2) / dn;
    m.delta3 = static_cast<double>(n3) / dn;
    return m;
}

}  // namespace pdcq
