#pragma once

// Segment extraction and class-wise TP/FP/FN matching.
//
// Matching follows the panoptic-quality rules: a same-class (pred, gt)
// pair with IoU > 0.5 is a TP (the strict threshold makes matches unique),
// unmatched predictions become FPs unless more than half of their pixels
// lie on ground-truth void or ignore regions (then they are dropped), and
// unmatched non-ignore ground-truth segments become FNs. IoU discounts
// pred pixels that are void in the ground truth.

#include <algorithm>
#include <cstdint>
#include <map>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "pdcq/core.hpp"

namespace pdcq {

struct SegmentSet {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<Segment> segments;
    std::vector<int32_t> pixel_segment;  // per pixel: index into segments, -1 for void
    uint64_t table_fingerprint = 0;

    size_t size() const { return segments.size(); }
};

// One segment per (class, instance) among thing pixels and one per stuff
// class present; void pixels belong to no segment. Ground-truth crowd
// regions are thing-class segments with instance id 0 and get is_ignore.
inline SegmentSet extract_segments(const PanopticMap& pan, const ClassTable& classes) {
    SegmentSet set;
    set.width = pan.width;
    set.height = pan.height;
    set.table_fingerprint = classes.fingerprint();
    set.pixel_segment.assign(pan.size(), -1);

    // Dense lookup for the valid label domain (class <= 65, instance < 1000);
    // anything outside lands in the overflow map.
    constexpr int kDenseSize = (ClassTable::kMaxClassId + 1) * 1000;
    std::vector<int32_t> dense(kDenseSize, -1);
    std::unordered_map<uint32_t, int32_t> overflow;

    const int void_class = classes.void_class_id();
    for (size_t i = 0; i < pan.size(); ++i) {
        const uint32_t label = pan.labels[i];
        const int cls = static_cast<int>(label >> 16);
        const int inst = static_cast<int>(label & 0xffffu);
        if (cls == void_class) continue;

        int32_t idx;
        if (cls <= ClassTable::kMaxClassId && inst < 1000) {
            int32_t& slot = dense[static_cast<size_t>(cls) * 1000 + inst];
            if (slot < 0) {
                slot = static_cast<int32_t>(set.segments.size());
                set.segments.push_back(
                    {cls, inst, 0, classes.is_thing(cls) && inst == 0});
            }
            idx = slot;
        } else {
            auto [it, inserted] = overflow.try_emplace(label, static_cast<int32_t>(set.segments.size()));
            if (inserted)
                set.segments.push_back({cls, inst, 0, classes.is_thing(cls) && inst == 0});
            idx = it->second;
        }
        set.segments[static_cast<size_t>(idx)].pixel_count++;
        set.pixel_segment[i] = idx;
    }
    return set;
}

// Pairwise IoU with the ground-truth void discount, computed by direct
// pixel enumeration. match_segments uses a fused counting pass instead;
// both produce the same value.
inline double iou_of(size_t pred_index, size_t gt_index, const SegmentSet& pred_set,
                     const SegmentSet& gt_set) {
    if (pred_set.width != gt_set.width || pred_set.height != gt_set.height)
        throw ConfigError("segment sets have mismatched dimensions");
    uint64_t inter = 0;
    uint64_t pred_on_void = 0;
    const int32_t p = static_cast<int32_t>(pred_index);
    const int32_t g = static_cast<int32_t>(gt_index);
    for (size_t i = 0; i < pred_set.pixel_segment.size(); ++i) {
        if (pred_set.pixel_segment[i] != p) continue;
        if (gt_set.pixel_segment[i] == g)
            ++inter;
        else if (gt_set.pixel_segment[i] < 0)
            ++pred_on_void;
    }
    const uint64_t pred_area = pred_set.segments[pred_index].pixel_count - pred_on_void;
    const uint64_t gt_area = gt_set.segments[gt_index].pixel_count;
    const uint64_t uni = pred_area + gt_area - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct TpPair {
    int32_t pred = -1;  // index into the pred SegmentSet
    int32_t gt = -1;    // index into the gt SegmentSet
    double iou = 0.0;
};

struct ClassMatch {
    std::vector<TpPair> tp;
    std::vector<int32_t> fp;       // pred indices
    std::vector<int32_t> fn;       // gt indices
    std::vector<int32_t> dropped;  // pred indices removed by the void/ignore rule
};

struct MatchResult {
    std::map<int, ClassMatch> per_class;
};

namespace detail {

// Sparse (pred+1, gt+1) co-occurrence counts over one fused pixel pass.
// Index 0 stands for void. Uses a flat matrix while small enough,
// otherwise a hash map.
struct PairCounts {
    size_t cols = 0;
    std::vector<uint32_t> flat;
    std::unordered_map<uint64_t, uint32_t> sparse;
    bool use_flat = false;

    void count(const std::vector<int32_t>& pred_px, const std::vector<int32_t>& gt_px, size_t np,
               size_t ng) {
        cols = ng + 1;
        const size_t cells = (np + 1) * (ng + 1);
        use_flat = cells <= (1u << 22);
        if (use_flat) {
            flat.assign(cells, 0);
            for (size_t i = 0; i < pred_px.size(); ++i)
                ++flat[static_cast<size_t>(pred_px[i] + 1) * cols + static_cast<size_t>(gt_px[i] + 1)];
        } else {
            for (size_t i = 0; i < pred_px.size(); ++i) {
                const uint64_t key = (static_cast<uint64_t>(pred_px[i] + 1) << 32) |
                                     static_cast<uint32_t>(gt_px[i] + 1);
                ++sparse[key];
            }
        }
    }

    // Nonzero cells as (pred+1, gt+1, count), sorted.
    std::vector<std::tuple<uint32_t, uint32_t, uint32_t>> entries() const {
        std::vector<std::tuple<uint32_t, uint32_t, uint32_t>> out;
        if (use_flat) {
            for (size_t idx = 0; idx < flat.size(); ++idx)
                if (flat[idx] != 0)
                    out.emplace_back(static_cast<uint32_t>(idx / cols), static_cast<uint32_t>(idx % cols),
                                     flat[idx]);
        } else {
            out.reserve(sparse.size());
            for (const auto& [key, n] : sparse)
                out.emplace_back(static_cast<uint32_t>(key >> 32), static_cast<uint32_t>(key & 0xffffffffu),
                                 n);
            std::sort(out.begin(), out.end());
        }
        return out;
    }
};

}  // namespace detail

inline MatchResult match_segments(const SegmentSet& pred_set, const SegmentSet& gt_set,
                                  const ClassTable& classes) {
    if (pred_set.table_fingerprint != gt_set.table_fingerprint ||
        pred_set.table_fingerprint != classes.fingerprint())
        throw ConfigError("segment sets were extracted against different class tables");
    if (pred_set.width != gt_set.width || pred_set.height != gt_set.height)
        throw ConfigError("segment sets have mismatched dimensions");

    const size_t np = pred_set.size();
    const size_t ng = gt_set.size();

    detail::PairCounts counts;
    counts.count(pred_set.pixel_segment, gt_set.pixel_segment, np, ng);
    const auto entries = counts.entries();

    // Per-pred overlap with gt void and with gt ignore regions.
    std::vector<uint64_t> pred_void(np, 0);
    std::vector<uint64_t> pred_ignore(np, 0);
    for (const auto& [p1, g1, n] : entries) {
        if (p1 == 0) continue;
        if (g1 == 0)
            pred_void[p1 - 1] += n;
        else if (gt_set.segments[g1 - 1].is_ignore)
            pred_ignore[p1 - 1] += n;
    }

    std::vector<int32_t> pred_match(np, -1);
    std::vector<int32_t> gt_match(ng, -1);

    MatchResult result;
    for (const auto& [p1, g1, n] : entries) {
        if (p1 == 0 || g1 == 0) continue;
        const Segment& p = pred_set.segments[p1 - 1];
        const Segment& g = gt_set.segments[g1 - 1];
        if (p.class_id != g.class_id || g.is_ignore) continue;
        const uint64_t pred_area = p.pixel_count - pred_void[p1 - 1];
        const uint64_t uni = pred_area + g.pixel_count - n;
        if (uni == 0) continue;
        const double iou = static_cast<double>(n) / static_cast<double>(uni);
        if (iou > 0.5) {
            // IoU > 0.5 admits at most one partner on either side.
            pred_match[p1 - 1] = static_cast<int32_t>(g1 - 1);
            gt_match[g1 - 1] = static_cast<int32_t>(p1 - 1);
            result.per_class[p.class_id].tp.push_back(
                {static_cast<int32_t>(p1 - 1), static_cast<int32_t>(g1 - 1), iou});
        }
    }

    for (size_t pi = 0; pi < np; ++pi) {
        if (pred_match[pi] >= 0) continue;
        const Segment& p = pred_set.segments[pi];
        ClassMatch& cm = result.per_class[p.class_id];
        if (2 * (pred_void[pi] + pred_ignore[pi]) > p.pixel_count)
            cm.dropped.push_back(static_cast<int32_t>(pi));
        else
            cm.fp.push_back(static_cast<int32_t>(pi));
    }
    for (size_t gi = 0; gi < ng; ++gi) {
        const Segment& g = gt_set.segments[gi];
        if (gt_match[gi] >= 0 || g.is_ignore) continue;
        result.per_class[g.class_id].fn.push_back(static_cast<int32_t>(gi));
    }
    return result;
}

}  // namespace pdcq
