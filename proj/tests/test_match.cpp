#include <catch2/catch_amalgamated.hpp>

#include "pdcq/match.hpp"
#include "pdcq/oracle.hpp"
#include "pdcq/synth.hpp"
#include "test_util.hpp"

using namespace pdcq;

namespace {

// Pixel-enumeration IoU oracle used to freeze expected values: counts over
// the raw label grids, discounting pred pixels that are void in gt.
double enum_iou(const PanopticMap& pred, const PanopticMap& gt, uint32_t pred_label,
                uint32_t gt_label, int void_class) {
    uint64_t inter = 0, p_area = 0, g_area = 0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const bool in_p = pred.labels[i] == pred_label;
        const bool in_g = gt.labels[i] == gt_label;
        if (in_p && gt.class_at(i) != void_class) ++p_area;
        if (in_g) ++g_area;
        if (in_p && in_g) ++inter;
    }
    return static_cast<double>(inter) / static_cast<double>(p_area + g_area - inter);
}

int find_segment(const SegmentSet& set, int class_id, int instance_id) {
    for (size_t i = 0; i < set.segments.size(); ++i)
        if (set.segments[i].class_id == class_id && set.segments[i].instance_id == instance_id)
            return static_cast<int>(i);
    return -1;
}

}  // namespace

TEST_CASE("extract: uniform stuff image gives one segment") {
    const ClassTable table = testutil::small_table();
    const PanopticMap pan(6, 4, PanopticMap::pack(1, 0));
    const SegmentSet set = extract_segments(pan, table);
    REQUIRE(set.segments.size() == 1);
    CHECK(set.segments[0].class_id == 1);
    CHECK(set.segments[0].pixel_count == 24);
    CHECK_FALSE(set.segments[0].is_ignore);
}

TEST_CASE("extract: two instances on stuff background give three segments") {
    const ClassTable table = ClassTable({{1, "bg", false}, {26, "car", true}}, 0);
    PanopticMap pan(8, 8, PanopticMap::pack(1, 0));
    for (size_t i = 0; i < 4; ++i) pan.set(i, 26, 1);
    for (size_t i = 8; i < 10; ++i) pan.set(i, 26, 2);
    const SegmentSet set = extract_segments(pan, table);
    CHECK(set.segments.size() == 3);

    uint64_t total = 0;
    for (const Segment& s : set.segments) total += s.pixel_count;
    CHECK(total == pan.size());  // segments partition the non-void pixels
}

TEST_CASE("extract: all-void image gives an empty set") {
    const ClassTable table = testutil::small_table();
    const PanopticMap pan(5, 5, PanopticMap::pack(0, 0));
    const SegmentSet set = extract_segments(pan, table);
    CHECK(set.segments.empty());
    for (int32_t v : set.pixel_segment) CHECK(v == -1);
}

TEST_CASE("extract: ground-truth crowd region is flagged ignore") {
    const ClassTable table = testutil::small_table();
    PanopticMap pan(4, 4, PanopticMap::pack(1, 0));
    pan.set(0, 10, 0);  // thing class with instance 0 = crowd
    pan.set(1, 10, 1);
    const SegmentSet set = extract_segments(pan, table);
    const int crowd = find_segment(set, 10, 0);
    const int inst = find_segment(set, 10, 1);
    REQUIRE(crowd >= 0);
    REQUIRE(inst >= 0);
    CHECK(set.segments[static_cast<size_t>(crowd)].is_ignore);
    CHECK_FALSE(set.segments[static_cast<size_t>(inst)].is_ignore);
}

TEST_CASE("iou basics") {
    const ClassTable table = testutil::small_table();
    PanopticMap pred(10, 2, PanopticMap::pack(0, 0));
    PanopticMap gt(10, 2, PanopticMap::pack(0, 0));

    SECTION("identical 10-pixel masks give 1.0") {
        for (size_t i = 0; i < 10; ++i) {
            pred.set(i, 10, 1);
            gt.set(i, 10, 1);
        }
        const SegmentSet ps = extract_segments(pred, table);
        const SegmentSet gs = extract_segments(gt, table);
        CHECK(iou_of(0, 0, ps, gs) == 1.0);
    }
    SECTION("disjoint masks give 0.0") {
        for (size_t i = 0; i < 5; ++i) pred.set(i, 10, 1);
        for (size_t i = 10; i < 15; ++i) gt.set(i, 10, 1);
        const SegmentSet ps = extract_segments(pred, table);
        const SegmentSet gs = extract_segments(gt, table);
        CHECK(iou_of(0, 0, ps, gs) == 0.0);
    }
    SECTION("6 pixels inside 10 give the enumeration value") {
        for (size_t i = 0; i < 10; ++i) gt.set(i, 10, 1);
        for (size_t i = 0; i < 6; ++i) pred.set(i, 10, 1);
        const SegmentSet ps = extract_segments(pred, table);
        const SegmentSet gs = extract_segments(gt, table);
        const double expected =
            enum_iou(pred, gt, PanopticMap::pack(10, 1), PanopticMap::pack(10, 1), 0);
        CHECK(expected == 0.6);  // frozen from the enumeration oracle
        CHECK(iou_of(0, 0, ps, gs) == expected);
    }
    SECTION("pred pixels on gt void are discounted") {
        for (size_t i = 0; i < 8; ++i) gt.set(i, 10, 1);  // rest of gt stays void
        for (size_t i = 4; i < 16; ++i) pred.set(i, 10, 1);
        const SegmentSet ps = extract_segments(pred, table);
        const SegmentSet gs = extract_segments(gt, table);
        const double expected =
            enum_iou(pred, gt, PanopticMap::pack(10, 1), PanopticMap::pack(10, 1), 0);
        // inter=4, pred area discounted to 4, union = 4+8-4
        CHECK(expected == Catch::Approx(0.5).epsilon(0));
        CHECK(iou_of(0, 0, ps, gs) == expected);
    }
}

TEST_CASE("match: perfect prediction gives all TPs at IoU 1") {
    Rng rng(5);
    const SceneSpec spec = random_scene_spec(rng, 32, 32);
    const ClassTable table = make_class_table(spec);
    const auto [pan, depth] = render_frame(spec, 0);
    const SegmentSet ps = extract_segments(pan, table);
    const SegmentSet gs = extract_segments(pan, table);
    const MatchResult mr = match_segments(ps, gs, table);

    size_t tp = 0;
    for (const auto& [cls, cm] : mr.per_class) {
        CHECK(cm.fp.empty());
        CHECK(cm.fn.empty());
        CHECK(cm.dropped.empty());
        for (const TpPair& pair : cm.tp) {
            CHECK(pair.iou == 1.0);
            ++tp;
        }
    }
    CHECK(tp == ps.segments.size());
}

TEST_CASE("match: split segment makes two FPs and one FN") {
    const ClassTable table = testutil::small_table();
    PanopticMap gt(10, 1, PanopticMap::pack(0, 0));
    PanopticMap pred(10, 1, PanopticMap::pack(0, 0));
    for (size_t i = 0; i < 10; ++i) gt.set(i, 10, 1);
    for (size_t i = 0; i < 5; ++i) pred.set(i, 10, 1);
    for (size_t i = 5; i < 10; ++i) pred.set(i, 10, 2);

    const MatchResult mr =
        match_segments(extract_segments(pred, table), extract_segments(gt, table), table);
    const ClassMatch& cm = mr.per_class.at(10);
    CHECK(cm.tp.empty());  // each IoU is exactly 0.5, not > 0.5
    CHECK(cm.fp.size() == 2);
    CHECK(cm.fn.size() == 1);
}

TEST_CASE("match: pred segment mostly on void is dropped") {
    const ClassTable table = testutil::small_table();
    PanopticMap gt(10, 1, PanopticMap::pack(0, 0));
    for (size_t i = 6; i < 10; ++i) gt.set(i, 1, 0);  // 6 void pixels, 4 stuff
    PanopticMap pred(10, 1, PanopticMap::pack(0, 0));
    for (size_t i = 0; i < 10; ++i) pred.set(i, 10, 1);  // 60% on gt void

    const MatchResult mr =
        match_segments(extract_segments(pred, table), extract_segments(gt, table), table);
    const ClassMatch& cm = mr.per_class.at(10);
    CHECK(cm.tp.empty());
    CHECK(cm.fp.empty());
    CHECK(cm.dropped.size() == 1);
}

TEST_CASE("match: exactly half on void stays a FP") {
    const ClassTable table = testutil::small_table();
    PanopticMap gt(10, 1, PanopticMap::pack(0, 0));
    for (size_t i = 5; i < 10; ++i) gt.set(i, 1, 0);
    PanopticMap pred(10, 1, PanopticMap::pack(0, 0));
    for (size_t i = 0; i < 10; ++i) pred.set(i, 10, 1);

    const MatchResult mr =
        match_segments(extract_segments(pred, table), extract_segments(gt, table), table);
    CHECK(mr.per_class.at(10).fp.size() == 1);
    CHECK(mr.per_class.at(10).dropped.empty());
}

TEST_CASE("match: gt crowd region is never a FN and absorbs overlapping preds") {
    const ClassTable table = testutil::small_table();
    PanopticMap gt(10, 1, PanopticMap::pack(1, 0));
    for (size_t i = 0; i < 6; ++i) gt.set(i, 10, 0);  // crowd region of class 10
    PanopticMap pred(10, 1, PanopticMap::pack(1, 0));
    for (size_t i = 0; i < 6; ++i) pred.set(i, 10, 3);  // prediction fully on the crowd

    const MatchResult mr =
        match_segments(extract_segments(pred, table), extract_segments(gt, table), table);
    const ClassMatch& cm = mr.per_class.at(10);
    CHECK(cm.tp.empty());
    CHECK(cm.fn.empty());          // crowd is not a FN
    CHECK(cm.fp.empty());          // pred overlaps the crowd by 100% > half
    CHECK(cm.dropped.size() == 1);
}

TEST_CASE("match rejects sets from different class tables") {
    const ClassTable a = testutil::small_table();
    const ClassTable b = ClassTable({{1, "x", false}}, 0);
    const PanopticMap pan(4, 4, PanopticMap::pack(1, 0));
    CHECK_THROWS_AS(match_segments(extract_segments(pan, a), extract_segments(pan, b), a),
                    ConfigError);
}

TEST_CASE("property: match agrees with exhaustive all-pairs matching") {
    Rng rng(303);
    for (int trial = 0; trial < 25; ++trial) {
        const SynthInstance inst = random_eval_instance(rng, 32);
        const MatchResult mr = match_segments(extract_segments(inst.pred_pan, inst.table),
                                              extract_segments(inst.gt_pan, inst.table), inst.table);
        const oracle::Scores expected = oracle::brute_force_pq(inst.pred_pan, inst.gt_pan, inst.table);

        for (const auto& [cls, outcome] : expected.per_class) {
            const auto it = mr.per_class.find(cls);
            const size_t tp = it == mr.per_class.end() ? 0 : it->second.tp.size();
            const size_t fp = it == mr.per_class.end() ? 0 : it->second.fp.size();
            const size_t fn = it == mr.per_class.end() ? 0 : it->second.fn.size();
            const size_t dropped = it == mr.per_class.end() ? 0 : it->second.dropped.size();
            CHECK(tp == outcome.tp);
            CHECK(fp == outcome.fp);
            CHECK(fn == outcome.fn);
            CHECK(dropped == outcome.dropped);
            if (it != mr.per_class.end()) {
                double iou_sum = 0;
                for (const TpPair& pair : it->second.tp) iou_sum += pair.iou;
                CHECK(iou_sum == Catch::Approx(outcome.iou_sum).margin(1e-12));
            }
        }
    }
}

TEST_CASE("property: swapping void-free ignore-free maps swaps FP and FN") {
    Rng rng(99);
    for (int trial = 0; trial < 10; ++trial) {
        const SceneSpec a = random_scene_spec(rng, 32, 32);
        SceneSpec b = a;
        for (ThingSpec& t : b.things) {
            t.pos_x += rng.range(-4, 4);
            t.pos_y += rng.range(-4, 4);
        }
        if (rng.chance(0.5) && !b.things.empty()) b.things.pop_back();
        const ClassTable table = make_class_table(a);

        const PanopticMap ma = render_frame(a, 0).first;
        const PanopticMap mb = render_frame(b, 0).first;
        const MatchResult fwd =
            match_segments(extract_segments(ma, table), extract_segments(mb, table), table);
        const MatchResult rev =
            match_segments(extract_segments(mb, table), extract_segments(ma, table), table);

        std::map<int, std::array<size_t, 3>> f, r;
        std::multiset<double> f_ious, r_ious;
        for (const auto& [cls, cm] : fwd.per_class) {
            f[cls] = {cm.tp.size(), cm.fp.size(), cm.fn.size()};
            for (const TpPair& p : cm.tp) f_ious.insert(p.iou);
        }
        for (const auto& [cls, cm] : rev.per_class) {
            r[cls] = {cm.tp.size(), cm.fp.size(), cm.fn.size()};
            for (const TpPair& p : cm.tp) r_ious.insert(p.iou);
        }
        REQUIRE(f.size() == r.size());
        for (const auto& [cls, counts] : f) {
            REQUIRE(r.count(cls) == 1);
            CHECK(r[cls][0] == counts[0]);  // |TP| preserved
            CHECK(r[cls][1] == counts[2]);  // |FP| <-> |FN|
            CHECK(r[cls][2] == counts[1]);
        }
        CHECK(f_ious == r_ious);  // each TP IoU preserved
    }
}

TEST_CASE("property: conservation of segment counts") {
    Rng rng(1234);
    for (int trial = 0; trial < 20; ++trial) {
        const SynthInstance inst = random_eval_instance(rng, 32);
        const SegmentSet ps = extract_segments(inst.pred_pan, inst.table);
        const SegmentSet gs = extract_segments(inst.gt_pan, inst.table);
        const MatchResult mr = match_segments(ps, gs, inst.table);

        std::map<int, size_t> pred_per_class, gt_live_per_class;
        for (const Segment& s : ps.segments) ++pred_per_class[s.class_id];
        for (const Segment& s : gs.segments)
            if (!s.is_ignore) ++gt_live_per_class[s.class_id];

        std::map<int, size_t> matched_pred, matched_gt;
        for (const auto& [cls, cm] : mr.per_class) {
            CHECK(cm.tp.size() + cm.fn.size() == gt_live_per_class[cls]);
            CHECK(cm.tp.size() + cm.fp.size() + cm.dropped.size() == pred_per_class[cls]);
        }
    }
}
