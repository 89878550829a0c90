#pragma once

// Naive reference scoring for differential tests. Everything here is
// computed literally from the metric definitions with per-segment pixel
// lists and all-pairs IoU; it deliberately shares no code with the
// production matching or accumulation paths and stays O(segments^2 *
// pixels). Maps larger than 64x64 are rejected.

#include <cmath>
#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "pdcq/core.hpp"

namespace pdcq::oracle {

constexpr uint32_t kMaxOracleSide = 64;

struct ClassOutcome {
    double iou_sum = 0.0;
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;
    uint64_t dropped = 0;

    bool included() const { return tp + fp + fn > 0; }
    double score() const {
        const double denom =
            static_cast<double>(tp) + 0.5 * static_cast<double>(fp) + 0.5 * static_cast<double>(fn);
        return denom > 0.0 ? 100.0 * iou_sum / denom : 0.0;
    }
};

struct Scores {
    std::map<int, ClassOutcome> per_class;
    uint64_t included_classes = 0;
    double mean = 0.0;  // percent, averaged over included classes
};

namespace detail {

using SegKey = std::pair<int, int>;  // (class_id, instance_id)
using SegPixels = std::map<SegKey, std::vector<size_t>>;

inline void check_size(const PanopticMap& m) {
    if (m.width > kMaxOracleSide || m.height > kMaxOracleSide)
        throw ConfigError("map too large for the brute-force oracle");
}

inline SegPixels collect_segments(const PanopticMap& pan, int void_class) {
    SegPixels out;
    for (size_t i = 0; i < pan.size(); ++i) {
        const int cls = pan.class_at(i);
        if (cls == void_class) continue;
        out[{cls, pan.instance_at(i)}].push_back(i);
    }
    return out;
}

inline uint64_t common_pixels(const std::vector<size_t>& a, const std::vector<size_t>& b) {
    uint64_t n = 0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j])
            ++i;
        else if (a[i] > b[j])
            ++j;
        else {
            ++n;
            ++i;
            ++j;
        }
    }
    return n;
}

}  // namespace detail

inline Scores brute_force_pq(const PanopticMap& pred, const PanopticMap& gt,
                             const ClassTable& classes) {
    detail::check_size(pred);
    detail::check_size(gt);
    if (pred.width != gt.width || pred.height != gt.height)
        throw ConfigError("oracle maps have mismatched dimensions");

    const int void_class = classes.void_class_id();
    const auto pred_segs = detail::collect_segments(pred, void_class);
    const auto gt_segs = detail::collect_segments(gt, void_class);

    auto is_ignore = [&](const detail::SegKey& k) {
        return classes.is_thing(k.first) && k.second == 0;
    };

    Scores scores;
    std::map<detail::SegKey, detail::SegKey> pred_partner, gt_partner;

    for (const auto& [pk, ppx] : pred_segs) {
        uint64_t on_void = 0;
        for (size_t i : ppx)
            if (gt.class_at(i) == void_class) ++on_void;

        for (const auto& [gk, gpx] : gt_segs) {
            if (gk.first != pk.first || is_ignore(gk)) continue;
            const uint64_t inter = detail::common_pixels(ppx, gpx);
            const uint64_t uni = (ppx.size() - on_void) + gpx.size() - inter;
            if (uni == 0) continue;
            const double iou = static_cast<double>(inter) / static_cast<double>(uni);
            if (iou > 0.5) {
                pred_partner[pk] = gk;
                gt_partner[gk] = pk;
                ClassOutcome& c = scores.per_class[pk.first];
                c.iou_sum += iou;
                ++c.tp;
            }
        }
    }

    for (const auto& [pk, ppx] : pred_segs) {
        if (pred_partner.count(pk)) continue;
        uint64_t on_void_or_ignore = 0;
        for (size_t i : ppx) {
            const int cls = gt.class_at(i);
            if (cls == void_class || (classes.is_thing(cls) && gt.instance_at(i) == 0))
                ++on_void_or_ignore;
        }
        ClassOutcome& c = scores.per_class[pk.first];
        if (2 * on_void_or_ignore > ppx.size())
            ++c.dropped;
        else
            ++c.fp;
    }

    for (const auto& [gk, gpx] : gt_segs) {
        if (is_ignore(gk) || gt_partner.count(gk)) continue;
        ++scores.per_class[gk.first].fn;
    }

    double sum = 0.0;
    for (const auto& [cls, c] : scores.per_class) {
        if (!classes.contains(cls) || !c.included()) continue;
        sum += c.score();
        ++scores.included_classes;
    }
    if (scores.included_classes > 0) scores.mean = sum / static_cast<double>(scores.included_classes);
    return scores;
}

// Literal per-pixel filter: a predicted pixel whose absolute relative
// depth error exceeds lambda (where the ground truth has a measurement in
// range) is reassigned to void before scoring.
inline Scores brute_force_pdcq(const PanopticMap& pred_pan, const DepthMap& pred_depth,
                               const PanopticMap& gt_pan, const DepthMap& gt_depth, double lambda,
                               const ClassTable& classes, const PdcqConfig& config) {
    detail::check_size(pred_pan);
    if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");

    PanopticMap filtered = pred_pan;
    const uint32_t void_label = PanopticMap::pack(classes.void_class_id(), 0);
    for (size_t i = 0; i < filtered.size(); ++i) {
        const double g = static_cast<double>(gt_depth.depth[i]);
        if (!(g > 0.0) || g < config.min_depth || g > config.max_depth) continue;
        const double err = std::abs(static_cast<double>(pred_depth.depth[i]) - g) / g;
        const bool outlier = config.inlier_inclusive ? err > lambda : err >= lambda;
        if (outlier) filtered.labels[i] = void_label;
    }
    return brute_force_pq(filtered, gt_pan, classes);
}

}  // namespace pdcq::oracle
