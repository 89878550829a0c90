#pragma once

// Report serialization. JSON is the canonical output; CSV and markdown are
// views derived from the same finalized report, so every number they show
// can be re-derived from the JSON. Scores print in percent with two
// decimals, depth values with three.

#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pdcq/ingest.hpp"
#include "pdcq/metric.hpp"

namespace pdcq {

struct EvalMeta {
    std::string label = "run";
    std::string dataset;
    size_t expected = 0;   // tasks the manifest supports
    size_t evaluated = 0;  // tasks with predictions present
    std::vector<EvalTask> missing;
};

namespace detail {

inline std::string format_lambda(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

inline nlohmann::ordered_json split_to_json(const SplitCell& s) {
    return {{"score", s.score}, {"sq", s.sq}, {"rq", s.rq}, {"classes", s.class_count}};
}

inline nlohmann::ordered_json track_to_json(const TrackReport& t) {
    nlohmann::ordered_json j;
    j["all"] = split_to_json(t.all);
    j["things"] = split_to_json(t.things);
    j["stuff"] = split_to_json(t.stuff);
    auto& pc = j["per_class"] = nlohmann::ordered_json::object();
    for (const auto& [class_id, c] : t.per_class) {
        pc[std::to_string(class_id)] = {{"score", c.score}, {"sq", c.sq},     {"rq", c.rq},
                                        {"iou_sum", c.iou_sum}, {"tp", c.tp}, {"fp", c.fp},
                                        {"fn", c.fn}};
    }
    return j;
}

}  // namespace detail

inline nlohmann::ordered_json report_to_json(const PdcqReport& report, const PdcqConfig& config,
                                             const EvalMeta& meta) {
    nlohmann::ordered_json j;
    j["tool"] = "pdcq-toolkit";
    j["label"] = meta.label;
    j["dataset"] = meta.dataset;
    j["config"] = {
        {"lambdas", config.lambdas},
        {"deltas", config.deltas},
        {"min_depth", config.min_depth},
        {"max_depth", config.max_depth},
        {"iou_threshold", config.iou_threshold},
        {"aggregation", config.overall_aggregation == Aggregation::mean ? "mean" : "sum"},
        {"filter_mode",
         config.filter_mode == DepthFilterMode::per_pixel ? "per_pixel" : "segment_mean"},
        {"inlier_inclusive", config.inlier_inclusive},
    };
    auto& coverage = j["coverage"];
    coverage["expected"] = meta.expected;
    coverage["evaluated"] = meta.evaluated;
    auto& missing = coverage["missing"] = nlohmann::ordered_json::array();
    for (const EvalTask& t : meta.missing)
        missing.push_back({{"sequence", t.sequence_id}, {"t", t.t}, {"delta", t.delta}});
    j["frames"] = report.frames;

    auto& per_delta = j["per_delta"] = nlohmann::ordered_json::array();
    for (const DeltaReport& d : report.deltas) {
        nlohmann::ordered_json jd;
        jd["delta"] = d.delta;
        jd["frames"] = d.frames;
        jd["pq"] = detail::track_to_json(d.pq);
        auto& pdcq = jd["pdcq"];
        pdcq["avg"] = d.pdcq_avg;
        auto& by_lambda = pdcq["by_lambda"] = nlohmann::ordered_json::array();
        for (size_t l = 0; l < report.lambdas.size(); ++l) {
            nlohmann::ordered_json jl = detail::track_to_json(d.lambda_tracks[l]);
            jl["lambda"] = report.lambdas[l];
            by_lambda.push_back(std::move(jl));
        }
        jd["depth"] = {{"abs_rel", d.depth.abs_rel},   {"rmse", d.depth.rmse},
                       {"delta1", d.depth.delta1},     {"delta2", d.depth.delta2},
                       {"delta3", d.depth.delta3},     {"valid_pixels", d.depth.valid_pixel_count},
                       {"frames", d.depth_frames}};
        per_delta.push_back(std::move(jd));
    }

    auto& overall = j["overall"];
    overall["aggregation"] = config.overall_aggregation == Aggregation::mean ? "mean" : "sum";
    auto& by_lambda = overall["pdcq_by_lambda"] = nlohmann::ordered_json::array();
    for (size_t l = 0; l < report.lambdas.size(); ++l)
        by_lambda.push_back({{"lambda", report.lambdas[l]}, {"score", report.overall_pdcq[l]}});
    overall["pdcq_avg"] = report.overall_pdcq_avg;
    overall["pq"] = report.overall_pq;
    return j;
}

inline std::string render_csv(const PdcqReport& report, const EvalMeta& meta) {
    std::string out = "label,delta,series,scope,metric,value\n";
    auto emit = [&](const std::string& delta, const std::string& series, const std::string& scope,
                    const std::string& metric, double value) {
        out += meta.label + "," + delta + "," + series + "," + scope + "," + metric + "," +
               detail::fixed(value, 6) + "\n";
    };
    auto emit_track = [&](const std::string& delta, const std::string& series,
                          const TrackReport& t) {
        const std::pair<std::string, const SplitCell*> splits[] = {
            {"all", &t.all}, {"things", &t.things}, {"stuff", &t.stuff}};
        for (const auto& [name, cell] : splits) {
            emit(delta, series, name, "score", cell->score);
            emit(delta, series, name, "sq", cell->sq);
            emit(delta, series, name, "rq", cell->rq);
            emit(delta, series, name, "classes", static_cast<double>(cell->class_count));
        }
        for (const auto& [class_id, c] : t.per_class) {
            const std::string scope = "class:" + std::to_string(class_id);
            emit(delta, series, scope, "score", c.score);
            emit(delta, series, scope, "sq", c.sq);
            emit(delta, series, scope, "rq", c.rq);
            emit(delta, series, scope, "tp", static_cast<double>(c.tp));
            emit(delta, series, scope, "fp", static_cast<double>(c.fp));
            emit(delta, series, scope, "fn", static_cast<double>(c.fn));
        }
    };

    for (const DeltaReport& d : report.deltas) {
        const std::string delta = std::to_string(d.delta);
        emit_track(delta, "pq", d.pq);
        for (size_t l = 0; l < report.lambdas.size(); ++l)
            emit_track(delta, "pdcq:" + detail::format_lambda(report.lambdas[l]),
                       d.lambda_tracks[l]);
        emit(delta, "pdcq:avg", "all", "score", d.pdcq_avg);
        emit(delta, "depth", "", "abs_rel", d.depth.abs_rel);
        emit(delta, "depth", "", "rmse", d.depth.rmse);
        emit(delta, "depth", "", "delta1", d.depth.delta1);
        emit(delta, "depth", "", "delta2", d.depth.delta2);
        emit(delta, "depth", "", "delta3", d.depth.delta3);
    }
    for (size_t l = 0; l < report.lambdas.size(); ++l)
        emit("overall", "pdcq:" + detail::format_lambda(report.lambdas[l]), "all", "score",
             report.overall_pdcq[l]);
    emit("overall", "pdcq:avg", "all", "score", report.overall_pdcq_avg);
    emit("overall", "pq", "all", "score", report.overall_pq);
    return out;
}

inline std::string render_markdown(const PdcqReport& report, const EvalMeta& meta) {
    std::string out;
    out += "# Panoptic-depth forecast evaluation\n\n";
    out += "- label: " + meta.label + "\n";
    if (!meta.dataset.empty()) out += "- dataset: " + meta.dataset + "\n";
    out += "- frames evaluated: " + std::to_string(report.frames) + "\n";
    if (meta.expected > 0)
        out += "- coverage: " + std::to_string(meta.evaluated) + "/" + std::to_string(meta.expected) +
               " prediction pairs\n";
    out += "\n## Summary per horizon\n\n";

    std::string header = "| Method |";
    std::string rule = "| --- |";
    for (const DeltaReport& d : report.deltas) {
        const std::string dd = std::to_string(d.delta);
        header += " PDC-Q (d=" + dd + ") | PQ (d=" + dd + ") | RMSE (d=" + dd + ") |";
        rule += " ---: | ---: | ---: |";
    }
    auto cell = [](const DeltaReport& d, double value, int decimals) {
        return d.frames == 0 ? std::string("-") : detail::fixed(value, decimals);
    };
    out += header + "\n" + rule + "\n| " + meta.label + " |";
    for (const DeltaReport& d : report.deltas) {
        out += " " + cell(d, d.pdcq_avg, 2) + " | " + cell(d, d.pq.all.score, 2) + " | " +
               cell(d, d.depth.rmse, 3) + " |";
    }
    out += "\n\n## PDC-Q by depth-error threshold\n\n";

    header = "| Method |";
    rule = "| --- |";
    for (const DeltaReport& d : report.deltas) {
        const std::string dd = std::to_string(d.delta);
        header += " avg (d=" + dd + ") |";
        rule += " ---: |";
        for (double lambda : report.lambdas) {
            header += " " + detail::format_lambda(lambda) + " (d=" + dd + ") |";
            rule += " ---: |";
        }
    }
    out += header + "\n" + rule + "\n| " + meta.label + " |";
    for (const DeltaReport& d : report.deltas) {
        out += " " + cell(d, d.pdcq_avg, 2) + " |";
        for (size_t l = 0; l < report.lambdas.size(); ++l)
            out += " " + cell(d, d.lambda_tracks[l].all.score, 2) + " |";
    }
    out += "\n\n## PQ / SQ / RQ\n\n";
    out += "| Horizon | All PQ | All SQ | All RQ | Things PQ | Things SQ | Things RQ | Stuff PQ | "
           "Stuff SQ | Stuff RQ |\n";
    out += "| --- | ---: | ---: | ---: | ---: | ---: | ---: | ---: | ---: | ---: |\n";
    for (const DeltaReport& d : report.deltas) {
        out += "| d=" + std::to_string(d.delta) + " |";
        for (const SplitCell* s : {&d.pq.all, &d.pq.things, &d.pq.stuff})
            out += " " + cell(d, s->score, 2) + " | " + cell(d, s->sq, 2) + " | " +
                   cell(d, s->rq, 2) + " |";
        out += "\n";
    }
    out += "\n## Depth metrics\n\n";
    out += "| Horizon | Abs Rel | RMSE | d<1.25 | d<1.25^2 | d<1.25^3 |\n";
    out += "| --- | ---: | ---: | ---: | ---: | ---: |\n";
    for (const DeltaReport& d : report.deltas) {
        out += "| d=" + std::to_string(d.delta) + " | " + cell(d, d.depth.abs_rel, 3) + " | " +
               cell(d, d.depth.rmse, 3) + " | " + cell(d, d.depth.delta1, 3) + " | " +
               cell(d, d.depth.delta2, 3) + " | " + cell(d, d.depth.delta3, 3) + " |\n";
    }
    out += "\n## Overall\n\n";
    out += "| Method |";
    std::string rule2 = "| --- |";
    for (double lambda : report.lambdas) {
        out += " PDC-Q " + detail::format_lambda(lambda) + " |";
        rule2 += " ---: |";
    }
    out += " avg |\n" + rule2 + " ---: |\n| " + meta.label + " |";
    for (size_t l = 0; l < report.lambdas.size(); ++l)
        out += " " + detail::fixed(report.overall_pdcq[l], 2) + " |";
    out += " " + detail::fixed(report.overall_pdcq_avg, 2) + " |\n";
    return out;
}

}  // namespace pdcq
