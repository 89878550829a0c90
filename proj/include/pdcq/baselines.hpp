#pragma once

// Non-learned forecasters: last-seen (copy frame t) and constant-velocity
// (rigid per-instance translation estimated from the last two frames).
// They exist to exercise the evaluation pipeline end to end.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "pdcq/core.hpp"

namespace pdcq {

// Observed maps for frames t-k .. t, oldest first.
struct ObservedWindow {
    std::vector<std::pair<PanopticMap, DepthMap>> frames;

    void check() const {
        if (frames.empty()) throw ConfigError("observed window is empty");
        for (const auto& [pan, depth] : frames) {
            if (pan.width != frames[0].first.width || pan.height != frames[0].first.height ||
                depth.width != pan.width || depth.height != pan.height)
                throw ConfigError("observed window maps have mismatched dimensions");
        }
    }
};

// Copies frame t unchanged, for any horizon.
inline std::pair<PanopticMap, DepthMap> last_seen_forecast(const ObservedWindow& window, int delta) {
    window.check();
    if (delta < 0) throw ConfigError("horizon must be nonnegative");
    return window.frames.back();
}

namespace detail {

struct Centroid {
    double sx = 0, sy = 0;
    uint64_t n = 0;
};

inline std::map<uint32_t, Centroid> thing_centroids(const PanopticMap& pan,
                                                    const ClassTable& classes) {
    std::map<uint32_t, Centroid> out;
    for (size_t i = 0; i < pan.size(); ++i) {
        if (!classes.is_thing(pan.class_at(i))) continue;
        Centroid& c = out[pan.labels[i]];
        c.sx += static_cast<double>(i % pan.width);
        c.sy += static_cast<double>(i / pan.width);
        ++c.n;
    }
    return out;
}

inline int round_half_up_i(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace detail

// Per-instance velocity from the centroid shift between the last two
// frames; each moving instance's mask and depths translate by
// round(delta * velocity). Stuff and unmatched instances copy from frame
// t; pixels vacated by a mover are filled by a 5x5 stuff majority vote
// (mean depth of the winning class), or void when no stuff is nearby.
// Overlaps resolve toward the smaller predicted depth, missing depth
// losing to any measured one.
inline std::pair<PanopticMap, DepthMap> const_velocity_forecast(const ObservedWindow& window,
                                                                int delta,
                                                                const ClassTable& classes) {
    window.check();
    if (window.frames.size() < 2)
        throw ConfigError("constant-velocity forecast needs at least two observed frames");
    if (delta < 0) throw ConfigError("horizon must be nonnegative");

    const PanopticMap& cur_pan = window.frames.back().first;
    const DepthMap& cur_depth = window.frames.back().second;
    const PanopticMap& prev_pan = window.frames[window.frames.size() - 2].first;

    const auto cur_c = detail::thing_centroids(cur_pan, classes);
    const auto prev_c = detail::thing_centroids(prev_pan, classes);

    struct Move {
        uint32_t label;
        int dx, dy;
    };
    std::vector<Move> moves;
    for (const auto& [label, c] : cur_c) {
        const auto it = prev_c.find(label);
        if (it == prev_c.end()) continue;  // new instance: copied untranslated
        const double vx = c.sx / static_cast<double>(c.n) - it->second.sx / static_cast<double>(it->second.n);
        const double vy = c.sy / static_cast<double>(c.n) - it->second.sy / static_cast<double>(it->second.n);
        moves.push_back({label, detail::round_half_up_i(delta * vx), detail::round_half_up_i(delta * vy)});
    }

    PanopticMap out_pan = cur_pan;
    DepthMap out_depth = cur_depth;
    std::vector<uint8_t> pasted(cur_pan.size(), 0);

    std::vector<uint8_t> is_moved_px(cur_pan.size(), 0);
    {
        std::set<uint32_t> moved;
        for (const Move& m : moves) moved.insert(m.label);
        for (size_t i = 0; i < cur_pan.size(); ++i)
            if (moved.count(cur_pan.labels[i])) is_moved_px[i] = 1;
    }

    // Vacate movers and fill the holes from the surrounding frame-t stuff.
    const uint32_t void_label = PanopticMap::pack(classes.void_class_id(), 0);
    const int w = static_cast<int>(cur_pan.width);
    const int h = static_cast<int>(cur_pan.height);
    for (size_t i = 0; i < cur_pan.size(); ++i) {
        if (!is_moved_px[i]) continue;
        const int px = static_cast<int>(i % cur_pan.width);
        const int py = static_cast<int>(i / cur_pan.width);
        std::map<int, std::pair<uint64_t, std::pair<double, uint64_t>>> votes;  // class -> (count, (depth sum, depth n))
        for (int y = std::max(0, py - 2); y <= std::min(h - 1, py + 2); ++y) {
            for (int x = std::max(0, px - 2); x <= std::min(w - 1, px + 2); ++x) {
                const size_t j = static_cast<size_t>(y) * cur_pan.width + x;
                const int cls = cur_pan.class_at(j);
                if (!classes.is_stuff(cls)) continue;
                auto& v = votes[cls];
                ++v.first;
                if (DepthMap::is_valid(cur_depth.depth[j])) {
                    v.second.first += static_cast<double>(cur_depth.depth[j]);
                    ++v.second.second;
                }
            }
        }
        int best_class = -1;
        uint64_t best_count = 0;
        for (const auto& [cls, v] : votes) {
            if (v.first > best_count) {  // ties fall to the smaller class id
                best_count = v.first;
                best_class = cls;
            }
        }
        if (best_class < 0) {
            out_pan.labels[i] = void_label;
            out_depth.depth[i] = 0.0f;
        } else {
            const auto& v = votes[best_class];
            out_pan.labels[i] = PanopticMap::pack(best_class, 0);
            out_depth.depth[i] =
                v.second.second > 0
                    ? static_cast<float>(v.second.first / static_cast<double>(v.second.second))
                    : 0.0f;
        }
    }

    // Paste translated movers; smaller depth wins, ties prefer the paste.
    auto depth_key = [](float d) {
        return DepthMap::is_valid(d) ? static_cast<double>(d) : std::numeric_limits<double>::infinity();
    };
    for (const Move& m : moves) {
        for (size_t i = 0; i < cur_pan.size(); ++i) {
            if (cur_pan.labels[i] != m.label) continue;
            const int x = static_cast<int>(i % cur_pan.width) + m.dx;
            const int y = static_cast<int>(i / cur_pan.width) + m.dy;
            if (x < 0 || y < 0 || x >= w || y >= h) continue;
            const size_t j = static_cast<size_t>(y) * cur_pan.width + x;
            const double cand = depth_key(cur_depth.depth[i]);
            const double have = depth_key(out_depth.depth[j]);
            const bool wins = pasted[j] ? cand < have : cand <= have;
            if (wins) {
                out_pan.labels[j] = m.label;
                out_depth.depth[j] = cur_depth.depth[i];
                pasted[j] = 1;
            }
        }
    }
    return {std::move(out_pan), std::move(out_depth)};
}

}  // namespace pdcq
