#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "pdcq/depth_metrics.hpp"
#include "pdcq/synth.hpp"
#include "test_util.hpp"

using namespace pdcq;

namespace {

DepthMap map_of(std::vector<float> values, uint32_t w, uint32_t h) {
    DepthMap m(w, h);
    m.depth = std::move(values);
    return m;
}

// Scalar reference used to freeze expected metric values.
DepthMetrics scalar_reference(const std::vector<double>& pred, const std::vector<double>& gt,
                              double lo, double hi) {
    DepthMetrics m;
    double abs_rel = 0, sq = 0;
    uint64_t n = 0, n1 = 0, n2 = 0, n3 = 0;
    for (size_t i = 0; i < gt.size(); ++i) {
        if (!(gt[i] > 0.0) || gt[i] < lo || gt[i] > hi) continue;
        abs_rel += std::abs(pred[i] - gt[i]) / gt[i];
        sq += (pred[i] - gt[i]) * (pred[i] - gt[i]);
        const double ratio = pred[i] > 0 ? std::max(pred[i] / gt[i], gt[i] / pred[i])
                                         : std::numeric_limits<double>::infinity();
        n1 += ratio < 1.25;
        n2 += ratio < std::pow(1.25, 2);
        n3 += ratio < std::pow(1.25, 3);
        ++n;
    }
    m.valid_pixel_count = n;
    if (n == 0) return m;
    m.abs_rel = abs_rel / n;
    m.rmse = std::sqrt(sq / n);
    m.delta1 = double(n1) / n;
    m.delta2 = double(n2) / n;
    m.delta3 = double(n3) / n;
    return m;
}

}  // namespace

TEST_CASE("abs_rel_map basics") {
    PdcqConfig config;

    SECTION("identical maps give zero error everywhere") {
        const DepthMap gt = map_of({1.0f, 10.0f, 79.0f, 4.5f}, 2, 2);
        const AbsRelGrid grid = abs_rel_map(gt, gt, config);
        for (size_t i = 0; i < grid.size(); ++i) {
            CHECK(grid.valid[i] == 1);
            CHECK(grid.error[i] == 0.0);
        }
    }
    SECTION("gt 10, pred 12 gives 0.2") {
        const AbsRelGrid grid = abs_rel_map(map_of({12.0f}, 1, 1), map_of({10.0f}, 1, 1), config);
        CHECK(grid.valid[0] == 1);
        CHECK(grid.error[0] == Catch::Approx(0.2).margin(1e-15));
    }
    SECTION("invalid or out-of-range gt is excluded regardless of pred") {
        const DepthMap gt = map_of({0.0f, 0.2f, 100.0f}, 3, 1);
        const DepthMap pred = map_of({5.0f, 5.0f, 5.0f}, 3, 1);
        const AbsRelGrid grid = abs_rel_map(pred, gt, config);
        CHECK(grid.valid[0] == 0);  // no measurement
        CHECK(grid.valid[1] == 0);  // below min_depth
        CHECK(grid.valid[2] == 0);  // above max_depth
    }
    SECTION("dimension mismatch throws") {
        CHECK_THROWS_AS(abs_rel_map(map_of({1.0f}, 1, 1), map_of({1.0f, 1.0f}, 2, 1), config),
                        ConfigError);
    }
}

TEST_CASE("inlier_mask basics") {
    PdcqConfig config;
    const DepthMap gt = map_of({10.0f, 10.0f, 0.0f}, 3, 1);
    const DepthMap pred = map_of({12.0f, 12.0f, 99.0f}, 3, 1);
    const AbsRelGrid grid = abs_rel_map(pred, gt, config);  // errors: 0.2, 0.2, invalid

    CHECK(inlier_mask(grid, 0.25, config) == std::vector<uint8_t>{1, 1, 1});
    CHECK(inlier_mask(grid, 0.1, config) == std::vector<uint8_t>{0, 0, 1});  // invalid stays inlier
    CHECK_THROWS_AS(inlier_mask(grid, 0.0, config), ConfigError);
    CHECK_THROWS_AS(inlier_mask(grid, -1.0, config), ConfigError);
}

TEST_CASE("inlier boundary is inclusive by default and configurable") {
    PdcqConfig config;
    const AbsRelGrid grid = abs_rel_map(map_of({5.0f}, 1, 1), map_of({4.0f}, 1, 1), config);
    REQUIRE(grid.error[0] == 0.25);  // exact in binary

    CHECK(inlier_mask(grid, 0.25, config)[0] == 1);
    config.inlier_inclusive = false;
    CHECK(inlier_mask(grid, 0.25, config)[0] == 0);
}

TEST_CASE("property: inlier sets are nested across lambda") {
    PdcqConfig config;
    Rng rng(77);
    for (int trial = 0; trial < 20; ++trial) {
        DepthMap gt(16, 16), pred(16, 16);
        for (size_t i = 0; i < gt.size(); ++i) {
            gt.depth[i] = rng.chance(0.2) ? 0.0f : static_cast<float>(rng.uniform(0.3, 90.0));
            pred.depth[i] = static_cast<float>(rng.uniform(0.0, 90.0));
        }
        const AbsRelGrid grid = abs_rel_map(pred, gt, config);
        const double l1 = rng.uniform(0.01, 0.5);
        const double l2 = l1 + rng.uniform(0.0, 0.5);
        const auto m1 = inlier_mask(grid, l1, config);
        const auto m2 = inlier_mask(grid, l2, config);
        for (size_t i = 0; i < m1.size(); ++i) CHECK(m1[i] <= m2[i]);
    }
}

TEST_CASE("depth_metrics identity and scaling cases") {
    PdcqConfig config;

    SECTION("pred == gt gives (0, 0, 1, 1, 1)") {
        const DepthMap gt = map_of({2.0f, 40.0f, 79.5f, 7.25f}, 2, 2);
        const DepthMetrics m = depth_metrics(gt, gt, config);
        CHECK(m.abs_rel == 0.0);
        CHECK(m.rmse == 0.0);
        CHECK(m.delta1 == 1.0);
        CHECK(m.delta2 == 1.0);
        CHECK(m.delta3 == 1.0);
        CHECK(m.valid_pixel_count == 4);
    }
    SECTION("pred = 1.2 x gt gives abs_rel 0.2 and delta1 = 1") {
        DepthMap gt(4, 1), pred(4, 1);
        const float vals[] = {5.0f, 10.0f, 20.0f, 50.0f};
        for (size_t i = 0; i < 4; ++i) {
            gt.depth[i] = vals[i];
            pred.depth[i] = 1.2f * vals[i];
        }
        const DepthMetrics m = depth_metrics(pred, gt, config);
        CHECK(m.abs_rel == Catch::Approx(0.2).margin(1e-6));
        CHECK(m.delta1 == 1.0);
    }
}

TEST_CASE("depth_metrics matches the scalar reference on the spec fixture") {
    PdcqConfig config;
    const DepthMetrics expected = scalar_reference({1.0, 8.0}, {2.0, 4.0}, 0.5, 80.0);
    REQUIRE(expected.abs_rel == 0.75);
    REQUIRE(expected.rmse == std::sqrt(8.5));
    REQUIRE(expected.delta1 == 0.0);
    REQUIRE(expected.delta2 == 0.0);
    REQUIRE(expected.delta3 == 0.0);

    const DepthMetrics m = depth_metrics(map_of({1.0f, 8.0f}, 2, 1), map_of({2.0f, 4.0f}, 2, 1),
                                         config);
    CHECK(m.abs_rel == Catch::Approx(expected.abs_rel).margin(1e-12));
    CHECK(m.rmse == Catch::Approx(expected.rmse).margin(1e-12));
    CHECK(m.delta1 == 0.0);
    CHECK(m.delta2 == 0.0);
    CHECK(m.delta3 == 0.0);
    CHECK(m.valid_pixel_count == 2);
}

TEST_CASE("depth_metrics with zero valid pixels is the explicit empty value") {
    PdcqConfig config;
    const DepthMetrics m = depth_metrics(map_of({5.0f}, 1, 1), map_of({0.0f}, 1, 1), config);
    CHECK(m.valid_pixel_count == 0);
    CHECK(m.abs_rel == 0.0);
    CHECK(m.rmse == 0.0);
    CHECK(std::isfinite(m.delta1));
}

TEST_CASE("property: delta accuracies are monotone and swap-symmetric") {
    PdcqConfig config;
    Rng rng(555);
    for (int trial = 0; trial < 20; ++trial) {
        DepthMap gt(12, 12), pred(12, 12);
        for (size_t i = 0; i < gt.size(); ++i) {
            gt.depth[i] = rng.chance(0.1) ? 0.0f : static_cast<float>(rng.uniform(0.6, 79.0));
            pred.depth[i] = static_cast<float>(rng.uniform(0.6, 79.0));
        }
        const DepthMetrics m = depth_metrics(pred, gt, config);
        CHECK(m.delta1 <= m.delta2);
        CHECK(m.delta2 <= m.delta3);

        // The ratio is symmetrized, so swapping maps preserves every delta_k
        // (restrict gt to pixels that stay valid after the swap).
        DepthMap gt2 = gt;
        for (size_t i = 0; i < gt2.size(); ++i) {
            const float p = pred.depth[i];
            if (!(p > 0.0f) || p < config.min_depth || p > config.max_depth) gt2.depth[i] = 0.0f;
            if (!DepthMap::is_valid(gt2.depth[i])) pred.depth[i] = 0.0f;
        }
        const DepthMetrics fwd = depth_metrics(pred, gt2, config);
        const DepthMetrics rev = depth_metrics(gt2, pred, config);
        CHECK(fwd.delta1 == rev.delta1);
        CHECK(fwd.delta2 == rev.delta2);
        CHECK(fwd.delta3 == rev.delta3);
    }
}
