#pragma once

// Deterministic synthetic panoptic-depth scenes: full-frame stuff planes
// plus moving rect/ellipse things with unambiguous occlusion order. The
// renderer is pure arithmetic, so sequences reproduce bit-exactly. Also
// hosts the randomized instance generator used for differential testing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdcq/core.hpp"

namespace pdcq {

enum class ThingShape { rect, ellipse };

struct StuffLayer {
    int class_id = 0;
    double depth_m = 0.0;
};

struct ThingSpec {
    int class_id = 0;
    ThingShape shape = ThingShape::rect;
    int size_x = 1;
    int size_y = 1;
    double pos_x = 0.0;  // subpixel center at frame 0
    double pos_y = 0.0;
    double vel_x = 0.0;  // pixels per frame
    double vel_y = 0.0;
    double depth_m = 1.0;
    double depth_rate = 0.0;  // meters per frame
};

// Scene class ids start at 1; class id 0 is reserved for void in the
// generated class table. Stuff layers are ordered back to front.
struct SceneSpec {
    uint32_t width = 64;
    uint32_t height = 64;
    std::vector<StuffLayer> stuff;
    std::vector<ThingSpec> things;
    int frame_count = 2;
    uint64_t seed = 0;
};

inline void validate_scene(const SceneSpec& spec) {
    if (spec.width == 0 || spec.height == 0) throw ConfigError("scene dimensions must be positive");
    if (spec.frame_count < 2) throw ConfigError("frame_count must be at least 2");
    if (spec.stuff.empty()) throw ConfigError("scene needs at least one stuff layer");
    if (spec.things.size() > 999) throw ConfigError("too many things for the instance id space");
    for (const StuffLayer& s : spec.stuff) {
        if (s.class_id < 1 || s.class_id > ClassTable::kMaxClassId)
            throw ConfigError("stuff class id out of range");
        if (!(s.depth_m > 0.0 && s.depth_m < 256.0))
            throw ConfigError("stuff depth must lie in (0, 256)");
    }
    for (size_t i = 1; i < spec.stuff.size(); ++i) {
        if (!(spec.stuff[i].depth_m < spec.stuff[i - 1].depth_m))
            throw ConfigError("stuff layers must be ordered back to front (decreasing depth)");
    }
    std::set<double> depths;
    for (const ThingSpec& t : spec.things) {
        if (t.class_id < 1 || t.class_id > ClassTable::kMaxClassId)
            throw ConfigError("thing class id out of range");
        if (t.size_x < 1 || t.size_y < 1) throw ConfigError("thing size must be positive");
        const double last = t.depth_m + t.depth_rate * (spec.frame_count - 1);
        if (!(t.depth_m > 0.0 && t.depth_m < 256.0) || !(last > 0.0 && last < 256.0))
            throw ConfigError("thing depth must stay in (0, 256) over the sequence");
        if (!depths.insert(t.depth_m).second)
            throw ConfigError("thing depths must be pairwise distinct");
    }
}

// Classes present in the scene; void is class 0.
inline ClassTable make_class_table(const SceneSpec& spec) {
    std::set<int> stuff_ids, thing_ids;
    for (const StuffLayer& s : spec.stuff) stuff_ids.insert(s.class_id);
    for (const ThingSpec& t : spec.things) thing_ids.insert(t.class_id);
    std::vector<ClassDef> defs;
    for (int id : stuff_ids) defs.push_back({id, "stuff_" + std::to_string(id), false});
    for (int id : thing_ids)
        if (!stuff_ids.count(id)) defs.push_back({id, "thing_" + std::to_string(id), true});
    return ClassTable(std::move(defs), 0);
}

namespace detail {

inline int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace detail

// Renders frame t: nearest surface wins per pixel; thing positions are
// pos0 + t*velocity rounded to pixel centers, so a moving thing's mask is
// a pure translation of a fixed footprint. Thing i carries instance i+1.
inline std::pair<PanopticMap, DepthMap> render_frame(const SceneSpec& spec, int t) {
    const StuffLayer& front = spec.stuff.back();
    PanopticMap pan(spec.width, spec.height, PanopticMap::pack(front.class_id, 0));
    DepthMap depth(spec.width, spec.height, static_cast<float>(front.depth_m));

    const int w = static_cast<int>(spec.width);
    const int h = static_cast<int>(spec.height);
    for (size_t ti = 0; ti < spec.things.size(); ++ti) {
        const ThingSpec& thing = spec.things[ti];
        const int cx = detail::round_half_up(thing.pos_x + t * thing.vel_x);
        const int cy = detail::round_half_up(thing.pos_y + t * thing.vel_y);
        const double dz = thing.depth_m + t * thing.depth_rate;
        const uint32_t label = PanopticMap::pack(thing.class_id, static_cast<int>(ti) + 1);

        const int x0 = cx - thing.size_x / 2;
        const int y0 = cy - thing.size_y / 2;
        const double ax = thing.size_x / 2.0;
        const double ay = thing.size_y / 2.0;
        for (int y = std::max(0, y0); y < std::min(h, y0 + thing.size_y); ++y) {
            for (int x = std::max(0, x0); x < std::min(w, x0 + thing.size_x); ++x) {
                if (thing.shape == ThingShape::ellipse) {
                    const double nx = (x - cx) / ax;
                    const double ny = (y - cy) / ay;
                    if (nx * nx + ny * ny > 1.0) continue;
                }
                const size_t i = static_cast<size_t>(y) * spec.width + x;
                if (dz < static_cast<double>(depth.depth[i])) {
                    pan.labels[i] = label;
                    depth.depth[i] = static_cast<float>(dz);
                }
            }
        }
    }
    return {std::move(pan), std::move(depth)};
}

inline std::vector<std::pair<PanopticMap, DepthMap>> render_sequence(const SceneSpec& spec) {
    validate_scene(spec);
    std::vector<std::pair<PanopticMap, DepthMap>> frames;
    frames.reserve(static_cast<size_t>(spec.frame_count));
    for (int t = 0; t < spec.frame_count; ++t) frames.push_back(render_frame(spec, t));
    return frames;
}

// --------------------------------------------------------------------------
// SceneSpec JSON.

inline SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    SceneSpec spec;
    try {
        spec.width = j.at("width").get<uint32_t>();
        spec.height = j.at("height").get<uint32_t>();
        spec.frame_count = j.at("frame_count").get<int>();
        spec.seed = j.value("seed", 0ull);
        for (const auto& js : j.at("stuff"))
            spec.stuff.push_back({js.at("class").get<int>(), js.at("depth").get<double>()});
        for (const auto& jt : j.at("things")) {
            ThingSpec t;
            t.class_id = jt.at("class").get<int>();
            const std::string shape = jt.at("shape").get<std::string>();
            if (shape == "rect")
                t.shape = ThingShape::rect;
            else if (shape == "ellipse")
                t.shape = ThingShape::ellipse;
            else
                throw ConfigError("unknown shape: " + shape);
            t.size_x = jt.at("size").at(0).get<int>();
            t.size_y = jt.at("size").at(1).get<int>();
            t.pos_x = jt.at("position").at(0).get<double>();
            t.pos_y = jt.at("position").at(1).get<double>();
            t.vel_x = jt.at("velocity").at(0).get<double>();
            t.vel_y = jt.at("velocity").at(1).get<double>();
            t.depth_m = jt.at("depth").get<double>();
            t.depth_rate = jt.value("depth_rate", 0.0);
            spec.things.push_back(t);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("scene spec is malformed: ") + e.what());
    }
    validate_scene(spec);
    return spec;
}

inline nlohmann::ordered_json scene_spec_to_json(const SceneSpec& spec) {
    nlohmann::ordered_json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["frame_count"] = spec.frame_count;
    j["seed"] = spec.seed;
    auto& stuff = j["stuff"] = nlohmann::ordered_json::array();
    for (const StuffLayer& s : spec.stuff) stuff.push_back({{"class", s.class_id}, {"depth", s.depth_m}});
    auto& things = j["things"] = nlohmann::ordered_json::array();
    for (const ThingSpec& t : spec.things) {
        things.push_back({{"class", t.class_id},
                          {"shape", t.shape == ThingShape::rect ? "rect" : "ellipse"},
                          {"size", {t.size_x, t.size_y}},
                          {"position", {t.pos_x, t.pos_y}},
                          {"velocity", {t.vel_x, t.vel_y}},
                          {"depth", t.depth_m},
                          {"depth_rate", t.depth_rate}});
    }
    return j;
}

inline SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scene spec " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("scene spec " + path.string() + " is not valid JSON: " + e.what());
    }
    return scene_spec_from_json(j);
}

// --------------------------------------------------------------------------
// Randomized instances for differential testing. The generator uses its
// own fixed-stream RNG so identical seeds give identical instances with
// any standard library.

struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}

    uint64_t next() {  // splitmix64
        state += 0x9E3779B97F4A7C15ull;
        uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }
    uint32_t below(uint32_t n) { return static_cast<uint32_t>(next() % n); }
    int range(int lo, int hi) { return lo + static_cast<int>(below(static_cast<uint32_t>(hi - lo + 1))); }
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }
    bool chance(double p) { return uniform() < p; }
    double normal(double sigma) {
        const double u1 = std::max(uniform(), 1e-12);
        const double u2 = uniform();
        return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }
};

inline SceneSpec random_scene_spec(Rng& rng, uint32_t max_w, uint32_t max_h, int min_classes = 3,
                                   int frame_count = 2, bool integer_velocities = false) {
    SceneSpec spec;
    spec.frame_count = frame_count;
    const int min_w = std::min(16, static_cast<int>(max_w));
    const int min_h = std::min(16, static_cast<int>(max_h));
    for (int attempt = 0; attempt < 64; ++attempt) {
        spec.width = static_cast<uint32_t>(rng.range(min_w, static_cast<int>(max_w)));
        spec.height = static_cast<uint32_t>(rng.range(min_h, static_cast<int>(max_h)));
        spec.stuff.clear();
        spec.things.clear();

        const int n_stuff = rng.range(1, 2);
        double depth = rng.uniform(40.0, 90.0);
        for (int i = 0; i < n_stuff; ++i) {
            spec.stuff.push_back({1 + static_cast<int>(rng.below(4)), depth});
            depth -= rng.uniform(5.0, 15.0);
        }
        // Distinct stuff classes, back to front.
        std::sort(spec.stuff.begin(), spec.stuff.end(),
                  [](const StuffLayer& a, const StuffLayer& b) { return a.depth_m > b.depth_m; });
        for (size_t i = 1; i < spec.stuff.size(); ++i)
            if (spec.stuff[i].class_id == spec.stuff[i - 1].class_id) spec.stuff[i].class_id += 1;

        const int n_things = rng.range(2, 6);
        for (int i = 0; i < n_things; ++i) {
            ThingSpec t;
            t.class_id = 10 + static_cast<int>(rng.below(4));
            t.shape = rng.chance(0.5) ? ThingShape::rect : ThingShape::ellipse;
            t.size_x = rng.range(3, std::max(4, static_cast<int>(spec.width) / 2));
            t.size_y = rng.range(3, std::max(4, static_cast<int>(spec.height) / 2));
            t.pos_x = rng.uniform(2.0, spec.width - 2.0);
            t.pos_y = rng.uniform(2.0, spec.height - 2.0);
            if (integer_velocities) {
                t.vel_x = rng.range(-2, 2);
                t.vel_y = rng.range(-2, 2);
            } else {
                t.vel_x = rng.uniform(-2.0, 2.0);
                t.vel_y = rng.uniform(-2.0, 2.0);
            }
            t.depth_m = rng.uniform(2.0, spec.stuff.back().depth_m - 1.0);
            t.depth_rate = 0.0;
            spec.things.push_back(t);
        }
        // Re-sample colliding depths so the occlusion order stays unambiguous.
        std::sort(spec.things.begin(), spec.things.end(),
                  [](const ThingSpec& a, const ThingSpec& b) { return a.depth_m < b.depth_m; });
        for (size_t i = 1; i < spec.things.size(); ++i)
            if (spec.things[i].depth_m <= spec.things[i - 1].depth_m)
                spec.things[i].depth_m = spec.things[i - 1].depth_m + 0.25;

        std::set<int> class_ids;
        for (const StuffLayer& s : spec.stuff) class_ids.insert(s.class_id);
        for (const ThingSpec& t : spec.things) class_ids.insert(t.class_id);
        if (static_cast<int>(class_ids.size()) >= min_classes) break;
    }
    validate_scene(spec);
    return spec;
}

struct PerturbOptions {
    double drop_prob = 0.2;        // remove a predicted instance entirely
    double spurious_prob = 0.3;    // add a spurious predicted rect
    int max_shift = 3;             // uniform instance shift in pixels
    double depth_noise_sigma = 0.15;
    bool per_segment_depth_noise = false;  // one factor per segment instead of per pixel
    double gt_void_prob = 0.2;     // paint a void rect into the ground truth
    double gt_crowd_prob = 0.2;    // paint a crowd (thing, instance 0) rect into the ground truth
    double gt_invalid_depth_frac = 0.03;  // fraction of gt pixels losing their measurement
};

struct SynthInstance {
    ClassTable table;
    PanopticMap gt_pan;
    DepthMap gt_depth;
    PanopticMap pred_pan;
    DepthMap pred_depth;
};

namespace detail {

inline void paint_rect(PanopticMap& pan, Rng& rng, uint32_t label, int max_frac_denom = 3) {
    const int w = static_cast<int>(pan.width);
    const int h = static_cast<int>(pan.height);
    const int rw = rng.range(2, std::max(3, w / max_frac_denom));
    const int rh = rng.range(2, std::max(3, h / max_frac_denom));
    const int x0 = rng.range(0, std::max(0, w - rw));
    const int y0 = rng.range(0, std::max(0, h - rh));
    for (int y = y0; y < std::min(h, y0 + rh); ++y)
        for (int x = x0; x < std::min(w, x0 + rw); ++x)
            pan.labels[static_cast<size_t>(y) * pan.width + x] = label;
}

}  // namespace detail

// Ground truth from a random scene plus a perturbed prediction: shifted /
// dropped / spurious segments and multiplicative depth noise, with
// optional void, crowd, and missing-measurement decorations on the ground
// truth. Exercises every matching and filtering rule.
inline SynthInstance random_eval_instance(Rng& rng, uint32_t size, const PerturbOptions& opt = {}) {
    const SceneSpec spec = random_scene_spec(rng, size, size);
    SynthInstance inst;
    inst.table = make_class_table(spec);
    auto [pan, depth] = render_frame(spec, 0);
    inst.gt_pan = std::move(pan);
    inst.gt_depth = std::move(depth);

    const uint32_t void_label = PanopticMap::pack(inst.table.void_class_id(), 0);
    if (rng.chance(opt.gt_void_prob)) detail::paint_rect(inst.gt_pan, rng, void_label);
    if (rng.chance(opt.gt_crowd_prob) && !spec.things.empty()) {
        const int cls = spec.things[rng.below(static_cast<uint32_t>(spec.things.size()))].class_id;
        detail::paint_rect(inst.gt_pan, rng, PanopticMap::pack(cls, 0));
    }
    if (opt.gt_invalid_depth_frac > 0.0)
        for (float& d : inst.gt_depth.depth)
            if (rng.chance(opt.gt_invalid_depth_frac)) d = 0.0f;

    inst.pred_pan = inst.gt_pan;
    inst.pred_depth = inst.gt_depth;

    const uint32_t fill_label = PanopticMap::pack(spec.stuff.back().class_id, 0);
    const float fill_depth = static_cast<float>(spec.stuff.back().depth_m);

    // Shift or drop each rendered instance in the prediction.
    for (size_t ti = 0; ti < spec.things.size(); ++ti) {
        const uint32_t label = PanopticMap::pack(spec.things[ti].class_id, static_cast<int>(ti) + 1);
        std::vector<size_t> pixels;
        for (size_t i = 0; i < inst.pred_pan.size(); ++i)
            if (inst.pred_pan.labels[i] == label) pixels.push_back(i);
        if (pixels.empty()) continue;

        const bool drop = rng.chance(opt.drop_prob);
        const int dx = drop ? 0 : rng.range(-opt.max_shift, opt.max_shift);
        const int dy = drop ? 0 : rng.range(-opt.max_shift, opt.max_shift);

        std::vector<float> depths(pixels.size());
        for (size_t k = 0; k < pixels.size(); ++k) depths[k] = inst.pred_depth.depth[pixels[k]];
        for (size_t i : pixels) {
            inst.pred_pan.labels[i] = fill_label;
            inst.pred_depth.depth[i] = fill_depth;
        }
        if (drop) continue;
        const int w = static_cast<int>(inst.pred_pan.width);
        const int h = static_cast<int>(inst.pred_pan.height);
        for (size_t k = 0; k < pixels.size(); ++k) {
            const int x = static_cast<int>(pixels[k] % inst.pred_pan.width) + dx;
            const int y = static_cast<int>(pixels[k] / inst.pred_pan.width) + dy;
            if (x < 0 || y < 0 || x >= w || y >= h) continue;
            const size_t j = static_cast<size_t>(y) * inst.pred_pan.width + x;
            inst.pred_pan.labels[j] = label;
            inst.pred_depth.depth[j] = depths[k];
        }
    }

    if (rng.chance(opt.spurious_prob) && !spec.things.empty()) {
        const int cls = spec.things[rng.below(static_cast<uint32_t>(spec.things.size()))].class_id;
        PanopticMap scratch = inst.pred_pan;
        detail::paint_rect(scratch, rng, PanopticMap::pack(cls, 900));
        const float d = static_cast<float>(rng.uniform(2.0, 60.0));
        for (size_t i = 0; i < scratch.size(); ++i) {
            if (scratch.labels[i] != inst.pred_pan.labels[i]) {
                inst.pred_pan.labels[i] = scratch.labels[i];
                inst.pred_depth.depth[i] = d;
            }
        }
    }

    if (opt.depth_noise_sigma > 0.0) {
        if (opt.per_segment_depth_noise) {
            std::map<uint32_t, float> factor;
            for (size_t i = 0; i < inst.pred_depth.size(); ++i) {
                const uint32_t label = inst.pred_pan.labels[i];
                auto it = factor.find(label);
                if (it == factor.end())
                    it = factor.emplace(label, static_cast<float>(std::max(
                                                   0.05, 1.0 + rng.normal(opt.depth_noise_sigma))))
                             .first;
                inst.pred_depth.depth[i] *= it->second;
            }
        } else {
            for (float& d : inst.pred_depth.depth)
                d *= static_cast<float>(std::max(0.05, 1.0 + rng.normal(opt.depth_noise_sigma)));
        }
    }
    return inst;
}

}  // namespace pdcq
