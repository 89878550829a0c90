#pragma once

// Core domain types for panoptic-depth forecast evaluation: label/depth
// grids, the class table, evaluation configuration, and structural
// validation of inputs.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pdcq {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unreadable/unwritable files.
struct IoError : Error {
    using Error::Error;
};

// Readable file with contents that violate the expected format.
struct FormatError : Error {
    using Error::Error;
};

// Invalid configuration or arguments (bad thresholds, mismatched
// dimensions, unknown names).
struct ConfigError : Error {
    using Error::Error;
};

struct ClassDef {
    int id = 0;
    std::string name;
    bool is_thing = false;
};

// Semantic class registry. Class ids are bounded so that every label fits
// the 16-bit on-disk encoding class_id * 1000 + instance_id.
class ClassTable {
  public:
    static constexpr int kMaxClassId = 65;

    ClassTable() = default;

    ClassTable(std::vector<ClassDef> classes, int void_class_id)
        : classes_(std::move(classes)), void_id_(void_class_id) {
        kind_.fill(-1);
        if (void_id_ < 0 || void_id_ > kMaxClassId)
            throw ConfigError("void class id out of range: " + std::to_string(void_id_));
        for (const ClassDef& c : classes_) {
            if (c.id < 0 || c.id > kMaxClassId)
                throw ConfigError("class id out of range: " + std::to_string(c.id));
            if (c.id == void_id_)
                throw ConfigError("void class id " + std::to_string(void_id_) +
                                  " must not be listed as an evaluated class");
            if (kind_[static_cast<size_t>(c.id)] != -1)
                throw ConfigError("duplicate class id: " + std::to_string(c.id));
            kind_[static_cast<size_t>(c.id)] = c.is_thing ? 1 : 0;
        }
    }

    const std::vector<ClassDef>& classes() const { return classes_; }
    int void_class_id() const { return void_id_; }

    bool contains(int class_id) const {
        return class_id >= 0 && class_id <= kMaxClassId && kind_[static_cast<size_t>(class_id)] != -1;
    }

    bool is_thing(int class_id) const {
        return class_id >= 0 && class_id <= kMaxClassId && kind_[static_cast<size_t>(class_id)] == 1;
    }

    bool is_stuff(int class_id) const {
        return class_id >= 0 && class_id <= kMaxClassId && kind_[static_cast<size_t>(class_id)] == 0;
    }

    bool is_void(int class_id) const { return class_id == void_id_; }

    // Order-sensitive structural digest; names are cosmetic and excluded.
    uint64_t fingerprint() const {
        uint64_t h = 1469598103934665603ull;
        auto mix = [&h](uint64_t v) {
            h ^= v;
            h *= 1099511628211ull;
        };
        mix(static_cast<uint64_t>(void_id_));
        for (const ClassDef& c : classes_) {
            mix(static_cast<uint64_t>(c.id));
            mix(c.is_thing ? 7u : 3u);
        }
        return h;
    }

  private:
    std::vector<ClassDef> classes_;
    int void_id_ = 0;
    std::array<int8_t, kMaxClassId + 1> kind_{};  // -1 unknown, 0 stuff, 1 thing
};

// Per-pixel (class id, instance id) grid, row-major. Stuff pixels and void
// pixels carry instance 0; void pixels carry the table's void class id.
struct PanopticMap {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<uint32_t> labels;  // (class_id << 16) | instance_id

    PanopticMap() = default;
    PanopticMap(uint32_t w, uint32_t h, uint32_t fill = 0)
        : width(w), height(h), labels(static_cast<size_t>(w) * h, fill) {}

    static uint32_t pack(int class_id, int instance_id) {
        return (static_cast<uint32_t>(class_id) << 16) | static_cast<uint32_t>(instance_id);
    }

    size_t size() const { return labels.size(); }
    int class_at(size_t i) const { return static_cast<int>(labels[i] >> 16); }
    int instance_at(size_t i) const { return static_cast<int>(labels[i] & 0xffffu); }

    void set(size_t i, int class_id, int instance_id) { labels[i] = pack(class_id, instance_id); }

    bool operator==(const PanopticMap& o) const {
        return width == o.width && height == o.height && labels == o.labels;
    }
};

// Metric depth in meters, row-major. 0 marks pixels without a depth
// measurement.
struct DepthMap {
    uint32_t width = 0;
    uint32_t height = 0;
    std::vector<float> depth;

    DepthMap() = default;
    DepthMap(uint32_t w, uint32_t h, float fill = 0.0f)
        : width(w), height(h), depth(static_cast<size_t>(w) * h, fill) {}

    size_t size() const { return depth.size(); }
    static bool is_valid(float d) { return d > 0.0f; }

    bool operator==(const DepthMap& o) const {
        return width == o.width && height == o.height && depth == o.depth;
    }
};

// One (prediction, ground truth) pair for sequence position t evaluated at
// horizon delta, i.e. against ground-truth frame t + delta.
struct EvalFrame {
    std::string sequence_id;
    int64_t t = 0;
    int delta = 0;
    PanopticMap pred_pan;
    DepthMap pred_depth;
    PanopticMap gt_pan;
    DepthMap gt_depth;
};

enum class Aggregation { mean, sum };

enum class DepthFilterMode {
    per_pixel,     // depth-outlier predicted pixels are reassigned to void before matching
    segment_mean,  // matching first; a TP requires the pred segment's mean abs-rel error within lambda
};

// Evaluation configuration. Scores use the fixed IoU threshold 0.5; the
// field exists so reports can echo it.
struct PdcqConfig {
    std::vector<double> lambdas{0.1, 0.25, 0.5};
    std::vector<int> deltas{1, 3, 5};
    double min_depth = 0.5;
    double max_depth = 80.0;
    double iou_threshold = 0.5;
    Aggregation overall_aggregation = Aggregation::mean;
    DepthFilterMode filter_mode = DepthFilterMode::per_pixel;
    bool inlier_inclusive = true;  // inlier iff error <= lambda; false uses strict <

    void validate() const {
        if (lambdas.empty()) throw ConfigError("lambda set must not be empty");
        for (size_t i = 0; i < lambdas.size(); ++i) {
            if (!(lambdas[i] > 0.0)) throw ConfigError("lambda values must be positive");
            if (i > 0 && !(lambdas[i] > lambdas[i - 1]))
                throw ConfigError("lambda values must be strictly increasing");
        }
        if (deltas.empty()) throw ConfigError("horizon set must not be empty");
        for (size_t i = 0; i < deltas.size(); ++i) {
            if (deltas[i] < 0) throw ConfigError("horizons must be nonnegative");
            if (i > 0 && deltas[i] <= deltas[i - 1])
                throw ConfigError("horizons must be strictly increasing");
        }
        if (!(min_depth < max_depth)) throw ConfigError("min_depth must be below max_depth");
        if (!(min_depth >= 0.0)) throw ConfigError("min_depth must be nonnegative");
        if (iou_threshold != 0.5) throw ConfigError("iou_threshold is fixed at 0.5");
    }
};

// One connected-by-label region: a (class, instance) pair for things, a
// whole class for stuff. is_ignore marks ground-truth crowd regions (thing
// class with instance 0), which match nothing and are never false
// negatives.
struct Segment {
    int class_id = 0;
    int instance_id = 0;
    uint64_t pixel_count = 0;
    bool is_ignore = false;
};

struct Violation {
    std::string rule;
    std::string message;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    void add(std::string rule, std::string message) {
        violations.push_back({std::move(rule), std::move(message)});
    }
};

namespace detail {

inline std::string pixel_str(uint32_t width, size_t i) {
    return "pixel (" + std::to_string(i % width) + ", " + std::to_string(i / width) + ")";
}

}  // namespace detail

// Structural validation of a panoptic/depth pair against a class table.
// Collects every violation; never throws on malformed content.
inline ValidationReport validate(const PanopticMap& pan, const DepthMap& depth,
                                 const ClassTable& classes) {
    ValidationReport report;
    if (pan.labels.size() != static_cast<size_t>(pan.width) * pan.height)
        report.add("label-storage", "panoptic label buffer does not match width*height");
    if (depth.depth.size() != static_cast<size_t>(depth.width) * depth.height)
        report.add("depth-storage", "depth buffer does not match width*height");
    if (pan.width != depth.width || pan.height != depth.height) {
        report.add("dimension-mismatch",
                   "panoptic map is " + std::to_string(pan.width) + "x" + std::to_string(pan.height) +
                       " but depth map is " + std::to_string(depth.width) + "x" +
                       std::to_string(depth.height));
    }

    if (pan.labels.size() == static_cast<size_t>(pan.width) * pan.height) {
        for (size_t i = 0; i < pan.labels.size(); ++i) {
            const int cls = pan.class_at(i);
            const int inst = pan.instance_at(i);
            if (inst >= 1000) {
                report.add("instance-range", detail::pixel_str(pan.width, i) + " has instance id " +
                                                 std::to_string(inst) + " >= 1000");
            }
            if (classes.is_void(cls)) {
                if (inst != 0)
                    report.add("void-instance", detail::pixel_str(pan.width, i) +
                                                    " is void but has instance id " +
                                                    std::to_string(inst));
            } else if (!classes.contains(cls)) {
                report.add("unknown-class", detail::pixel_str(pan.width, i) + " has unknown class id " +
                                                std::to_string(cls));
            } else if (!classes.is_thing(cls) && inst != 0) {
                report.add("stuff-instance", detail::pixel_str(pan.width, i) + " has stuff class " +
                                                 std::to_string(cls) + " with instance id " +
                                                 std::to_string(inst));
            }
        }
    }

    if (depth.depth.size() == static_cast<size_t>(depth.width) * depth.height) {
        for (size_t i = 0; i < depth.depth.size(); ++i) {
            const float d = depth.depth[i];
            if (!std::isfinite(d))
                report.add("depth-nonfinite", detail::pixel_str(depth.width, i) + " has non-finite depth");
            else if (d < 0.0f)
                report.add("depth-negative", detail::pixel_str(depth.width, i) + " has negative depth " +
                                                 std::to_string(d));
        }
    }
    return report;
}

}  // namespace pdcq
