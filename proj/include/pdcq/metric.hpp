#pragma once

// The panoptic-depth forecast quality metric: depth-filtered matching,
// mergeable per-(class, lambda, horizon) statistics, and report
// finalization including plain PQ/SQ/RQ and the depth metric suite.
//
// Default filtering reassigns depth-outlier predicted pixels to void
// before matching (the per-pixel reading); DepthFilterMode::segment_mean
// instead gates each matched pair on the pred segment's mean error, in
// which case a failed pair leaves both the TP and the FP/FN sets.

#include <cstdint>
#include <limits>
#include <map>
#include <vector>

#include "pdcq/core.hpp"
#include "pdcq/depth_metrics.hpp"
#include "pdcq/match.hpp"

namespace pdcq {

struct PqStat {
    double iou_sum = 0.0;
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;

    bool empty() const { return tp == 0 && fp == 0 && fn == 0; }
    void add(const PqStat& o) {
        iou_sum += o.iou_sum;
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
    }
};

// Depth metrics are averaged per frame: each frame with at least one valid
// pixel contributes its own means once.
struct DepthStat {
    uint64_t frames = 0;  // frames with >= 1 valid pixel
    uint64_t frames_seen = 0;
    double abs_rel_sum = 0.0;
    double rmse_sum = 0.0;
    double delta1_sum = 0.0;
    double delta2_sum = 0.0;
    double delta3_sum = 0.0;
    uint64_t valid_pixels = 0;

    void add(const DepthStat& o) {
        frames += o.frames;
        frames_seen += o.frames_seen;
        abs_rel_sum += o.abs_rel_sum;
        rmse_sum += o.rmse_sum;
        delta1_sum += o.delta1_sum;
        delta2_sum += o.delta2_sum;
        delta3_sum += o.delta3_sum;
        valid_pixels += o.valid_pixels;
    }
};

// Mergeable evaluation state. Track index l < lambdas.size() holds stats
// filtered at lambdas[l]; the last track holds unfiltered PQ stats.
struct StatAccumulator {
    std::vector<double> lambdas;
    std::vector<int> deltas;
    uint64_t table_fingerprint = 0;
    uint64_t frames = 0;
    std::vector<std::map<int, PqStat>> cells;  // [delta_index * tracks() + track]
    std::vector<DepthStat> depth;              // [delta_index]

    static StatAccumulator make(std::vector<double> lambdas, std::vector<int> deltas,
                                uint64_t table_fingerprint) {
        StatAccumulator acc;
        acc.lambdas = std::move(lambdas);
        acc.deltas = std::move(deltas);
        acc.table_fingerprint = table_fingerprint;
        acc.cells.resize(acc.deltas.size() * acc.tracks());
        acc.depth.resize(acc.deltas.size());
        return acc;
    }

    size_t tracks() const { return lambdas.size() + 1; }
    size_t pq_track() const { return lambdas.size(); }

    int delta_index(int delta) const {
        for (size_t i = 0; i < deltas.size(); ++i)
            if (deltas[i] == delta) return static_cast<int>(i);
        return -1;
    }

    std::map<int, PqStat>& cell(size_t delta_idx, size_t track) {
        return cells[delta_idx * tracks() + track];
    }
    const std::map<int, PqStat>& cell(size_t delta_idx, size_t track) const {
        return cells[delta_idx * tracks() + track];
    }
};

// Copy of the prediction with every depth-outlier pixel reassigned to
// void. Ground truth is never modified.
inline PanopticMap apply_depth_filter(const PanopticMap& pred_pan,
                                      const std::vector<uint8_t>& inliers,
                                      const ClassTable& classes) {
    if (inliers.size() != pred_pan.size())
        throw ConfigError("inlier mask does not match the panoptic map");
    PanopticMap out = pred_pan;
    const uint32_t void_label = PanopticMap::pack(classes.void_class_id(), 0);
    for (size_t i = 0; i < out.labels.size(); ++i)
        if (!inliers[i]) out.labels[i] = void_label;
    return out;
}

namespace detail {

inline void accumulate_match(const MatchResult& mr, const ClassTable& classes,
                             std::map<int, PqStat>& cell) {
    for (const auto& [class_id, cm] : mr.per_class) {
        if (!classes.contains(class_id)) continue;
        if (cm.tp.empty() && cm.fp.empty() && cm.fn.empty()) continue;
        PqStat& s = cell[class_id];
        for (const TpPair& pair : cm.tp) s.iou_sum += pair.iou;
        s.tp += cm.tp.size();
        s.fp += cm.fp.size();
        s.fn += cm.fn.size();
    }
}

// Same accumulation, but a TP only counts if its pred segment's mean
// abs-rel error passes the lambda gate; failed pairs vanish entirely
// (they satisfy neither the FP nor the FN set definition).
inline void accumulate_match_gated(const MatchResult& mr, const ClassTable& classes,
                                   const std::vector<double>& seg_err_mean,
                                   const std::vector<uint8_t>& seg_has_err, double lambda,
                                   bool inclusive, std::map<int, PqStat>& cell) {
    for (const auto& [class_id, cm] : mr.per_class) {
        if (!classes.contains(class_id)) continue;
        if (cm.tp.empty() && cm.fp.empty() && cm.fn.empty()) continue;
        double iou_sum = 0.0;
        uint64_t tp = 0;
        for (const TpPair& pair : cm.tp) {
            const size_t pi = static_cast<size_t>(pair.pred);
            bool pass = true;
            if (seg_has_err[pi]) {
                const double err = seg_err_mean[pi];
                pass = inclusive ? err <= lambda : err < lambda;
            }
            if (pass) {
                iou_sum += pair.iou;
                ++tp;
            }
        }
        if (tp == 0 && cm.fp.empty() && cm.fn.empty()) continue;
        PqStat& s = cell[class_id];
        s.iou_sum += iou_sum;
        s.tp += tp;
        s.fp += cm.fp.size();
        s.fn += cm.fn.size();
    }
}

inline void accumulate_depth(const EvalFrame& frame, const PdcqConfig& config, DepthStat& d) {
    const DepthMetrics m = depth_metrics(frame.pred_depth, frame.gt_depth, config);
    ++d.frames_seen;
    if (m.valid_pixel_count == 0) return;
    ++d.frames;
    d.abs_rel_sum += m.abs_rel;
    d.rmse_sum += m.rmse;
    d.delta1_sum += m.delta1;
    d.delta2_sum += m.delta2;
    d.delta3_sum += m.delta3;
    d.valid_pixels += m.valid_pixel_count;
}

inline void frame_stats_into(const EvalFrame& frame, const ClassTable& classes,
                             const PdcqConfig& config, StatAccumulator& acc) {
    const int di = acc.delta_index(frame.delta);
    if (di < 0)
        throw ConfigError("frame delta " + std::to_string(frame.delta) +
                          " is not in the configured horizon set");
    const size_t delta_idx = static_cast<size_t>(di);

    const AbsRelGrid grid = abs_rel_map(frame.pred_depth, frame.gt_depth, config);
    const SegmentSet gt_set = extract_segments(frame.gt_pan, classes);

    if (config.filter_mode == DepthFilterMode::per_pixel) {
        for (size_t l = 0; l < acc.lambdas.size(); ++l) {
            const auto mask = inlier_mask(grid, acc.lambdas[l], config);
            const PanopticMap filtered = apply_depth_filter(frame.pred_pan, mask, classes);
            const SegmentSet pred_set = extract_segments(filtered, classes);
            const MatchResult mr = match_segments(pred_set, gt_set, classes);
            accumulate_match(mr, classes, acc.cell(delta_idx, l));
        }
        const SegmentSet pred_set = extract_segments(frame.pred_pan, classes);
        const MatchResult mr = match_segments(pred_set, gt_set, classes);
        accumulate_match(mr, classes, acc.cell(delta_idx, acc.pq_track()));
    } else {
        const SegmentSet pred_set = extract_segments(frame.pred_pan, classes);
        const MatchResult mr = match_segments(pred_set, gt_set, classes);

        // Mean abs-rel error per pred segment over valid pixels.
        std::vector<double> err_sum(pred_set.size(), 0.0);
        std::vector<uint64_t> err_count(pred_set.size(), 0);
        for (size_t i = 0; i < grid.size(); ++i) {
            const int32_t pi = pred_set.pixel_segment[i];
            if (pi < 0 || !grid.valid[i]) continue;
            err_sum[static_cast<size_t>(pi)] += grid.error[i];
            ++err_count[static_cast<size_t>(pi)];
        }
        std::vector<double> err_mean(pred_set.size(), 0.0);
        std::vector<uint8_t> has_err(pred_set.size(), 0);
        for (size_t s = 0; s < pred_set.size(); ++s) {
            if (err_count[s] == 0) continue;
            has_err[s] = 1;
            err_mean[s] = err_sum[s] / static_cast<double>(err_count[s]);
        }

        for (size_t l = 0; l < acc.lambdas.size(); ++l)
            accumulate_match_gated(mr, classes, err_mean, has_err, acc.lambdas[l],
                                   config.inlier_inclusive, acc.cell(delta_idx, l));
        accumulate_match(mr, classes, acc.cell(delta_idx, acc.pq_track()));
    }

    accumulate_depth(frame, config, acc.depth[delta_idx]);
    ++acc.frames;
}

}  // namespace detail

// Single-lambda statistics for one frame (plus the unfiltered PQ track and
// depth metrics). The frame is assumed validated.
inline StatAccumulator frame_stats(const EvalFrame& frame, double lambda, const ClassTable& classes,
                                   const PdcqConfig& config) {
    StatAccumulator acc = StatAccumulator::make({lambda}, config.deltas, classes.fingerprint());
    detail::frame_stats_into(frame, classes, config, acc);
    return acc;
}

// Statistics for one frame across every configured lambda.
inline StatAccumulator evaluate_frame(const EvalFrame& frame, const ClassTable& classes,
                                      const PdcqConfig& config) {
    StatAccumulator acc = StatAccumulator::make(config.lambdas, config.deltas, classes.fingerprint());
    detail::frame_stats_into(frame, classes, config, acc);
    return acc;
}

// Field-wise sum; associative and commutative.
inline StatAccumulator merge(StatAccumulator a, const StatAccumulator& b) {
    if (a.table_fingerprint != b.table_fingerprint)
        throw ConfigError("accumulators come from different class tables");
    if (a.lambdas != b.lambdas || a.deltas != b.deltas)
        throw ConfigError("accumulators cover different lambda/horizon sets");
    a.frames += b.frames;
    for (size_t i = 0; i < a.cells.size(); ++i)
        for (const auto& [class_id, stat] : b.cells[i]) a.cells[i][class_id].add(stat);
    for (size_t i = 0; i < a.depth.size(); ++i) a.depth[i].add(b.depth[i]);
    return a;
}

// ---------------------------------------------------------------------------
// Finalized report.

struct ClassCell {
    double score = 0.0;  // percent
    double sq = 0.0;
    double rq = 0.0;
    double iou_sum = 0.0;
    uint64_t tp = 0;
    uint64_t fp = 0;
    uint64_t fn = 0;
};

// Split-level SQ/RQ are class averages (Table-style reporting); the
// score = SQ x RQ identity holds per class, not for averages.
struct SplitCell {
    double score = 0.0;
    double sq = 0.0;
    double rq = 0.0;
    uint64_t class_count = 0;
};

struct TrackReport {
    SplitCell all;
    SplitCell things;
    SplitCell stuff;
    std::map<int, ClassCell> per_class;
};

struct DeltaReport {
    int delta = 0;
    uint64_t frames = 0;  // frames evaluated at this horizon
    std::vector<TrackReport> lambda_tracks;
    TrackReport pq;
    double pdcq_avg = 0.0;  // mean over lambdas of the All score
    DepthMetrics depth;     // frame-averaged
    uint64_t depth_frames = 0;
    bool has_data = false;
};

struct PdcqReport {
    std::vector<double> lambdas;
    Aggregation aggregation = Aggregation::mean;
    std::vector<DeltaReport> deltas;
    std::vector<double> overall_pdcq;  // per lambda, aggregated over horizons with data
    double overall_pdcq_avg = 0.0;
    double overall_pq = 0.0;
    uint64_t frames = 0;
};

namespace detail {

inline TrackReport finalize_track(const std::map<int, PqStat>& cell, const ClassTable& classes) {
    TrackReport track;
    double all_score = 0, all_sq = 0, all_rq = 0;
    double th_score = 0, th_sq = 0, th_rq = 0;
    double st_score = 0, st_sq = 0, st_rq = 0;
    for (const auto& [class_id, s] : cell) {
        if (s.empty()) continue;  // class never seen: excluded from |C|
        const double denom = static_cast<double>(s.tp) +
                             0.5 * static_cast<double>(s.fp) + 0.5 * static_cast<double>(s.fn);
        ClassCell c;
        c.iou_sum = s.iou_sum;
        c.tp = s.tp;
        c.fp = s.fp;
        c.fn = s.fn;
        c.score = 100.0 * s.iou_sum / denom;
        c.sq = s.tp > 0 ? 100.0 * s.iou_sum / static_cast<double>(s.tp) : 0.0;
        c.rq = 100.0 * static_cast<double>(s.tp) / denom;
        track.per_class.emplace(class_id, c);

        all_score += c.score;
        all_sq += c.sq;
        all_rq += c.rq;
        ++track.all.class_count;
        if (classes.is_thing(class_id)) {
            th_score += c.score;
            th_sq += c.sq;
            th_rq += c.rq;
            ++track.things.class_count;
        } else {
            st_score += c.score;
            st_sq += c.sq;
            st_rq += c.rq;
            ++track.stuff.class_count;
        }
    }
    auto fill = [](SplitCell& split, double score, double sq, double rq) {
        if (split.class_count == 0) return;
        const double n = static_cast<double>(split.class_count);
        split.score = score / n;
        split.sq = sq / n;
        split.rq = rq / n;
    };
    fill(track.all, all_score, all_sq, all_rq);
    fill(track.things, th_score, th_sq, th_rq);
    fill(track.stuff, st_score, st_sq, st_rq);
    return track;
}

}  // namespace detail

// Scores per (lambda, horizon) plus the overall aggregation across
// horizons (mean by default, sum when configured) and the cross-lambda
// averages.
inline PdcqReport finalize(const StatAccumulator& acc, const ClassTable& classes,
                           const PdcqConfig& config) {
    if (acc.frames == 0) throw Error("cannot finalize an empty accumulator");

    PdcqReport report;
    report.lambdas = acc.lambdas;
    report.aggregation = config.overall_aggregation;
    report.frames = acc.frames;

    const size_t n_lambda = acc.lambdas.size();
    std::vector<double> overall(n_lambda, 0.0);
    double overall_pq = 0.0;
    size_t deltas_with_data = 0;

    for (size_t di = 0; di < acc.deltas.size(); ++di) {
        DeltaReport dr;
        dr.delta = acc.deltas[di];
        dr.frames = acc.depth[di].frames_seen;
        dr.lambda_tracks.reserve(n_lambda);
        bool any = acc.depth[di].frames_seen > 0;
        for (size_t l = 0; l < n_lambda; ++l) {
            dr.lambda_tracks.push_back(detail::finalize_track(acc.cell(di, l), classes));
            any = any || !acc.cell(di, l).empty();
        }
        dr.pq = detail::finalize_track(acc.cell(di, acc.pq_track()), classes);
        dr.has_data = any;

        if (n_lambda > 0) {
            double sum = 0.0;
            for (const TrackReport& t : dr.lambda_tracks) sum += t.all.score;
            dr.pdcq_avg = sum / static_cast<double>(n_lambda);
        }

        const DepthStat& ds = acc.depth[di];
        dr.depth_frames = ds.frames;
        if (ds.frames > 0) {
            const double n = static_cast<double>(ds.frames);
            dr.depth.abs_rel = ds.abs_rel_sum / n;
            dr.depth.rmse = ds.rmse_sum / n;
            dr.depth.delta1 = ds.delta1_sum / n;
            dr.depth.delta2 = ds.delta2_sum / n;
            dr.depth.delta3 = ds.delta3_sum / n;
            dr.depth.valid_pixel_count = ds.valid_pixels;
        }

        if (dr.has_data) {
            ++deltas_with_data;
            for (size_t l = 0; l < n_lambda; ++l) overall[l] += dr.lambda_tracks[l].all.score;
            overall_pq += dr.pq.all.score;
        }
        report.deltas.push_back(std::move(dr));
    }

    if (deltas_with_data > 0 && config.overall_aggregation == Aggregation::mean) {
        for (double& v : overall) v /= static_cast<double>(deltas_with_data);
        overall_pq /= static_cast<double>(deltas_with_data);
    }
    report.overall_pdcq = overall;
    report.overall_pq = overall_pq;
    if (n_lambda > 0) {
        double sum = 0.0;
        for (double v : overall) sum += v;
        report.overall_pdcq_avg = sum / static_cast<double>(n_lambda);
    }
    return report;
}

}  // namespace pdcq
