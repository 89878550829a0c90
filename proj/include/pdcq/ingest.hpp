#pragma once

// On-disk formats and dataset plumbing.
//
// Panoptic label PNG: 16-bit grayscale, pixel = class_id * 1000 +
// instance_id, 65535 = void.  Depth PNG: 16-bit grayscale, meters =
// raw / 256, raw 0 = no measurement (the KITTI depth convention).
// The manifest is one JSON document listing ground-truth frames per
// sequence plus the evaluation window; predictions live in a directory
// tree {root}/{sequence_id}/{t}/{delta}_pan.png / {delta}_depth.png.

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
#include "pdcq/png_io.hpp"

namespace pdcq {

inline constexpr uint16_t kVoidPixel = 65535;
inline constexpr int kMaxInstanceId = 999;

// A map whose labels cannot be expressed in the 16-bit encoding
// (instance id >= 1000, or class*1000+instance >= 65535).
struct UnencodableError : Error {
    using Error::Error;
};

inline PanopticMap read_panoptic(const std::filesystem::path& path, const ClassTable& classes) {
    const GrayImage16 image = read_gray16_png(path);
    PanopticMap map(image.width, image.height);
    const uint32_t void_label = PanopticMap::pack(classes.void_class_id(), 0);
    for (size_t i = 0; i < image.pixels.size(); ++i) {
        const uint16_t v = image.pixels[i];
        map.labels[i] = (v == kVoidPixel) ? void_label : PanopticMap::pack(v / 1000, v % 1000);
    }
    return map;
}

inline void write_panoptic(const PanopticMap& map, const ClassTable& classes,
                           const std::filesystem::path& path) {
    GrayImage16 image(map.width, map.height);
    for (size_t i = 0; i < map.labels.size(); ++i) {
        const int cls = map.class_at(i);
        const int inst = map.instance_at(i);
        if (classes.is_void(cls)) {
            image.pixels[i] = kVoidPixel;
            continue;
        }
        if (inst > kMaxInstanceId)
            throw UnencodableError("instance id " + std::to_string(inst) +
                                   " exceeds the encoding limit at " + detail::pixel_str(map.width, i));
        const int encoded = cls * 1000 + inst;
        if (encoded >= kVoidPixel)
            throw UnencodableError("label (" + std::to_string(cls) + ", " + std::to_string(inst) +
                                   ") does not fit the 16-bit encoding at " +
                                   detail::pixel_str(map.width, i));
        image.pixels[i] = static_cast<uint16_t>(encoded);
    }
    write_gray16_png(image, path);
}

inline DepthMap read_depth(const std::filesystem::path& path) {
    const GrayImage16 image = read_gray16_png(path);
    DepthMap map(image.width, image.height);
    for (size_t i = 0; i < image.pixels.size(); ++i)
        map.depth[i] = static_cast<float>(image.pixels[i]) / 256.0f;
    return map;
}

inline void write_depth(const DepthMap& map, const std::filesystem::path& path) {
    GrayImage16 image(map.width, map.height);
    for (size_t i = 0; i < map.depth.size(); ++i) {
        const float d = map.depth[i];
        if (!(d >= 0.0f) || !std::isfinite(d))
            throw UnencodableError("depth " + std::to_string(d) + " at " +
                                   detail::pixel_str(map.width, i) + " is not encodable");
        const long raw = std::lround(static_cast<double>(d) * 256.0);
        if (raw > 65535)
            throw UnencodableError("depth " + std::to_string(d) + " m at " +
                                   detail::pixel_str(map.width, i) + " exceeds the 16-bit range");
        image.pixels[i] = static_cast<uint16_t>(raw);
    }
    write_gray16_png(image, path);
}

struct FrameRecord {
    int64_t index = 0;
    std::filesystem::path pan_path;
    std::filesystem::path depth_path;
};

struct SequenceRecord {
    std::string id;
    std::vector<FrameRecord> frames;  // strictly increasing frame indices
};

struct Manifest {
    std::string dataset_name;
    ClassTable class_table;
    int observed_window = 3;      // past frames required before the current frame
    std::vector<int> deltas{1, 3, 5};
    std::vector<SequenceRecord> sequences;
    std::filesystem::path base_dir;  // directory all relative paths resolve against

    std::filesystem::path resolve(const std::filesystem::path& p) const {
        return p.is_absolute() ? p : base_dir / p;
    }
};

namespace detail {

inline ClassTable class_table_from_json(const nlohmann::json& j) {
    std::vector<ClassDef> defs;
    for (const auto& e : j.at("entries"))
        defs.push_back({e.at("id").get<int>(), e.at("name").get<std::string>(),
                        e.at("thing").get<bool>()});
    return ClassTable(std::move(defs), j.at("void_id").get<int>());
}

inline nlohmann::ordered_json class_table_to_json(const ClassTable& table) {
    nlohmann::ordered_json j;
    j["void_id"] = table.void_class_id();
    auto& entries = j["entries"] = nlohmann::ordered_json::array();
    for (const ClassDef& c : table.classes())
        entries.push_back({{"id", c.id}, {"name", c.name}, {"thing", c.is_thing}});
    return j;
}

}  // namespace detail

inline Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + path.string() + " is not valid JSON: " + e.what());
    }

    Manifest m;
    m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    try {
        m.dataset_name = j.at("dataset").get<std::string>();
        m.class_table = detail::class_table_from_json(j.at("classes"));
        m.observed_window = j.at("eval").at("observed_window").get<int>();
        m.deltas = j.at("eval").at("deltas").get<std::vector<int>>();
        for (const auto& js : j.at("sequences")) {
            SequenceRecord seq;
            seq.id = js.at("id").get<std::string>();
            for (const auto& jf : js.at("frames")) {
                FrameRecord f;
                f.index = jf.at("index").get<int64_t>();
                f.pan_path = jf.at("pan").get<std::string>();
                f.depth_path = jf.at("depth").get<std::string>();
                seq.frames.push_back(std::move(f));
            }
            m.sequences.push_back(std::move(seq));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("manifest " + path.string() + " is malformed: " + e.what());
    }

    if (m.observed_window < 0) throw FormatError("observed_window must be nonnegative");
    std::set<std::string> seen_ids;
    for (const SequenceRecord& seq : m.sequences) {
        if (seq.id.empty() || seq.id.find('/') != std::string::npos ||
            seq.id.find('\\') != std::string::npos)
            throw FormatError("sequence id '" + seq.id + "' is empty or contains path separators");
        if (!seen_ids.insert(seq.id).second)
            throw FormatError("duplicate sequence id: " + seq.id);
        for (size_t i = 0; i < seq.frames.size(); ++i) {
            if (i > 0 && seq.frames[i].index <= seq.frames[i - 1].index)
                throw FormatError("sequence " + seq.id + " frame indices are not strictly increasing");
            for (const auto& p : {seq.frames[i].pan_path, seq.frames[i].depth_path}) {
                if (!std::filesystem::exists(m.resolve(p)))
                    throw IoError("manifest references missing file " + m.resolve(p).string());
            }
        }
    }
    return m;
}

inline void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["dataset"] = m.dataset_name;
    j["classes"] = detail::class_table_to_json(m.class_table);
    j["eval"] = {{"observed_window", m.observed_window}, {"deltas", m.deltas}};
    auto& seqs = j["sequences"] = nlohmann::ordered_json::array();
    for (const SequenceRecord& seq : m.sequences) {
        nlohmann::ordered_json js;
        js["id"] = seq.id;
        auto& frames = js["frames"] = nlohmann::ordered_json::array();
        for (const FrameRecord& f : seq.frames)
            frames.push_back({{"index", f.index},
                              {"pan", f.pan_path.generic_string()},
                              {"depth", f.depth_path.generic_string()}});
        seqs.push_back(std::move(js));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write manifest " + path.string());
    out << j.dump(2) << "\n";
}

// Prediction directory convention: {root}/{sequence_id}/{t}/{delta}_pan.png
// and {root}/{sequence_id}/{t}/{delta}_depth.png.
struct PredictionLayout {
    std::filesystem::path root;

    std::filesystem::path dir(const std::string& sequence_id, int64_t t) const {
        return root / sequence_id / std::to_string(t);
    }
    std::filesystem::path pan_path(const std::string& sequence_id, int64_t t, int delta) const {
        return dir(sequence_id, t) / (std::to_string(delta) + "_pan.png");
    }
    std::filesystem::path depth_path(const std::string& sequence_id, int64_t t, int delta) const {
        return dir(sequence_id, t) / (std::to_string(delta) + "_depth.png");
    }
};

// One evaluation work item: prediction made at frame t for horizon delta,
// scored against the ground-truth frame with index t + delta.
struct EvalTask {
    std::string sequence_id;
    int64_t t = 0;
    int delta = 0;
    std::filesystem::path gt_pan;
    std::filesystem::path gt_depth;
    std::filesystem::path pred_pan;
    std::filesystem::path pred_depth;
};

struct ResolveResult {
    std::vector<EvalTask> tasks;    // prediction pair present, sorted by (sequence, t, delta)
    std::vector<EvalTask> missing;  // expected but prediction pair absent
};

// Enumerates every (sequence, t, delta) the manifest supports: t must have
// observed_window predecessors, and the target frame t + delta must exist
// in the ground truth. Horizons come from the config.
inline ResolveResult resolve_eval_frames(const Manifest& manifest, const PredictionLayout& preds,
                                         const PdcqConfig& config) {
    ResolveResult result;
    for (const SequenceRecord& seq : manifest.sequences) {
        for (size_t pos = static_cast<size_t>(manifest.observed_window); pos < seq.frames.size();
             ++pos) {
            const int64_t t = seq.frames[pos].index;
            for (int delta : config.deltas) {
                const int64_t target = t + delta;
                const auto it = std::find_if(seq.frames.begin(), seq.frames.end(),
                                             [target](const FrameRecord& f) { return f.index == target; });
                if (it == seq.frames.end()) continue;
                EvalTask task;
                task.sequence_id = seq.id;
                task.t = t;
                task.delta = delta;
                task.gt_pan = manifest.resolve(it->pan_path);
                task.gt_depth = manifest.resolve(it->depth_path);
                task.pred_pan = preds.pan_path(seq.id, t, delta);
                task.pred_depth = preds.depth_path(seq.id, t, delta);
                const bool present = std::filesystem::exists(task.pred_pan) &&
                                     std::filesystem::exists(task.pred_depth);
                (present ? result.tasks : result.missing).push_back(std::move(task));
            }
        }
    }
    auto order = [](const EvalTask& a, const EvalTask& b) {
        return std::tie(a.sequence_id, a.t, a.delta) < std::tie(b.sequence_id, b.t, b.delta);
    };
    std::sort(result.tasks.begin(), result.tasks.end(), order);
    std::sort(result.missing.begin(), result.missing.end(), order);
    return result;
}

inline EvalFrame load_eval_frame(const EvalTask& task, const ClassTable& classes) {
    EvalFrame frame;
    frame.sequence_id = task.sequence_id;
    frame.t = task.t;
    frame.delta = task.delta;
    frame.gt_pan = read_panoptic(task.gt_pan, classes);
    frame.gt_depth = read_depth(task.gt_depth);
    frame.pred_pan = read_panoptic(task.pred_pan, classes);
    frame.pred_depth = read_depth(task.pred_depth);
    if (frame.gt_pan.width != frame.pred_pan.width || frame.gt_pan.height != frame.pred_pan.height ||
        frame.gt_pan.width != frame.gt_depth.width || frame.gt_pan.height != frame.gt_depth.height ||
        frame.pred_pan.width != frame.pred_depth.width ||
        frame.pred_pan.height != frame.pred_depth.height)
        throw FormatError("maps for " + task.sequence_id + "/" + std::to_string(task.t) + "/" +
                          std::to_string(task.delta) + " do not share dimensions");
    return frame;
}

}  // namespace pdcq
