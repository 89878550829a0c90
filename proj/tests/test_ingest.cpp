#include <catch2/catch_amalgamated.hpp>

#include <fstream>

#include <png.h>

#include "pdcq/ingest.hpp"
#include "pdcq/synth.hpp"
#include "test_util.hpp"

using namespace pdcq;
namespace fs = std::filesystem;

namespace {

PanopticMap random_valid_map(Rng& rng, const ClassTable& table, uint32_t w, uint32_t h) {
    PanopticMap map(w, h);
    const auto& defs = table.classes();
    for (size_t i = 0; i < map.size(); ++i) {
        if (rng.chance(0.05)) {
            map.set(i, table.void_class_id(), 0);
            continue;
        }
        const ClassDef& c = defs[rng.below(static_cast<uint32_t>(defs.size()))];
        map.set(i, c.id, c.is_thing ? rng.range(0, 5) : 0);
    }
    return map;
}

void write_gray8_png(const fs::path& path, uint32_t w, uint32_t h) {
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    REQUIRE(fp != nullptr);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png_create_info_struct(png);
    png_init_io(png, fp);
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(w, 42);
    for (uint32_t y = 0; y < h; ++y) png_write_row(png, row.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

}  // namespace

TEST_CASE("panoptic pixel decoding follows the class*1000+instance rule") {
    testutil::TempDir dir("pan");
    const ClassTable table = testutil::small_table();

    GrayImage16 image(3, 1);
    image.pixels = {26003, 7000, 65535};
    const fs::path path = dir.path / "p.png";
    write_gray16_png(image, path);

    const PanopticMap map = read_panoptic(path, table);
    CHECK(map.class_at(0) == 26);
    CHECK(map.instance_at(0) == 3);
    CHECK(map.class_at(1) == 7);
    CHECK(map.instance_at(1) == 0);
    CHECK(map.class_at(2) == table.void_class_id());
    CHECK(map.instance_at(2) == 0);
}

TEST_CASE("panoptic write errors on unencodable labels") {
    testutil::TempDir dir("pan_err");
    const ClassTable table = testutil::small_table();
    PanopticMap map(2, 1, PanopticMap::pack(10, 1));

    SECTION("instance 1000") {
        map.set(1, 10, 1000);
        CHECK_THROWS_AS(write_panoptic(map, table, dir.path / "x.png"), UnencodableError);
    }
    SECTION("encoded value collides with the void sentinel") {
        map.set(1, 65, 535);  // 65*1000+535 == 65535
        CHECK_THROWS_AS(write_panoptic(map, table, dir.path / "x.png"), UnencodableError);
    }
    SECTION("largest encodable label survives") {
        map.set(1, 65, 534);
        CHECK_NOTHROW(write_panoptic(map, table, dir.path / "x.png"));
        CHECK(read_panoptic(dir.path / "x.png", table).labels == map.labels);
    }
}

TEST_CASE("panoptic round-trip is bit-exact") {
    testutil::TempDir dir("pan_rt");
    const ClassTable table = testutil::small_table();
    Rng rng(42);
    for (int i = 0; i < 25; ++i) {
        const PanopticMap map = random_valid_map(rng, table, 32, 32);
        const fs::path path = dir.path / ("m" + std::to_string(i) + ".png");
        write_panoptic(map, table, path);
        CHECK(read_panoptic(path, table) == map);
    }
}

TEST_CASE("all-void map round-trips") {
    testutil::TempDir dir("void_rt");
    const ClassTable table = testutil::small_table();
    const PanopticMap map(8, 8, PanopticMap::pack(table.void_class_id(), 0));
    write_panoptic(map, table, dir.path / "v.png");
    CHECK(read_panoptic(dir.path / "v.png", table) == map);
}

TEST_CASE("depth decoding follows the raw/256 convention") {
    testutil::TempDir dir("depth");
    GrayImage16 image(3, 1);
    image.pixels = {3200, 0, 65535};
    write_gray16_png(image, dir.path / "d.png");

    const DepthMap map = read_depth(dir.path / "d.png");
    CHECK(map.depth[0] == 12.5f);
    CHECK_FALSE(DepthMap::is_valid(map.depth[1]));
    CHECK(map.depth[2] == Catch::Approx(255.99609375).epsilon(0));
}

TEST_CASE("depth write quantizes to 1/512 and keeps invalid exact") {
    testutil::TempDir dir("depth_w");
    DepthMap map(3, 1);
    map.depth = {12.5f, 1.001f, 0.0f};
    write_depth(map, dir.path / "d.png");

    const GrayImage16 raw = read_gray16_png(dir.path / "d.png");
    CHECK(raw.pixels[0] == 3200);
    CHECK(raw.pixels[1] == 256);
    CHECK(raw.pixels[2] == 0);

    const DepthMap back = read_depth(dir.path / "d.png");
    CHECK(back.depth[0] == 12.5f);
    CHECK(std::abs(back.depth[1] - 1.001f) <= 1.0f / 512.0f);
    CHECK(back.depth[2] == 0.0f);
}

TEST_CASE("depth write rejects out-of-range values") {
    testutil::TempDir dir("depth_err");
    DepthMap map(1, 1, 256.0f);
    CHECK_THROWS_AS(write_depth(map, dir.path / "d.png"), UnencodableError);
    map.depth[0] = -1.0f;
    CHECK_THROWS_AS(write_depth(map, dir.path / "d.png"), UnencodableError);
}

TEST_CASE("depth round-trip stays within the quantization bound") {
    testutil::TempDir dir("depth_rt");
    Rng rng(7);
    for (int i = 0; i < 25; ++i) {
        DepthMap map(16, 16);
        for (float& d : map.depth)
            d = rng.chance(0.1) ? 0.0f : static_cast<float>(rng.uniform(0.01, 250.0));
        const fs::path path = dir.path / ("d" + std::to_string(i) + ".png");
        write_depth(map, path);
        const DepthMap back = read_depth(path);
        for (size_t p = 0; p < map.size(); ++p) {
            if (map.depth[p] == 0.0f)
                CHECK(back.depth[p] == 0.0f);
            else
                CHECK(std::abs(back.depth[p] - map.depth[p]) <= 1.0f / 512.0f);
        }
    }
}

TEST_CASE("decoder failures are distinct") {
    testutil::TempDir dir("png_err");

    SECTION("missing file") {
        CHECK_THROWS_AS(read_gray16_png(dir.path / "nope.png"), IoError);
    }
    SECTION("not a png") {
        std::ofstream(dir.path / "text.png") << "not a png";
        try {
            read_gray16_png(dir.path / "text.png");
            FAIL("expected PngError");
        } catch (const PngError& e) {
            CHECK(e.kind == PngError::Kind::not_png);
        }
    }
    SECTION("wrong bit depth") {
        write_gray8_png(dir.path / "gray8.png", 4, 4);
        try {
            read_gray16_png(dir.path / "gray8.png");
            FAIL("expected PngError");
        } catch (const PngError& e) {
            CHECK(e.kind == PngError::Kind::bad_bit_depth);
        }
    }
}

namespace {

// A tiny on-disk dataset: one sequence, frame indices 0..n-1.
struct DiskFixture {
    testutil::TempDir dir{"manifest"};
    ClassTable table = testutil::small_table();
    Manifest manifest;

    explicit DiskFixture(int frames, int observed_window = 3, std::vector<int> deltas = {1, 3, 5}) {
        manifest.dataset_name = "fixture";
        manifest.class_table = table;
        manifest.observed_window = observed_window;
        manifest.deltas = std::move(deltas);
        manifest.base_dir = dir.path;
        SequenceRecord seq;
        seq.id = "s0";
        fs::create_directories(dir.path / "gt");
        const PanopticMap pan(4, 4, PanopticMap::pack(1, 0));
        const DepthMap depth(4, 4, 10.0f);
        for (int t = 0; t < frames; ++t) {
            const fs::path pan_rel = fs::path("gt") / (std::to_string(t) + "_pan.png");
            const fs::path depth_rel = fs::path("gt") / (std::to_string(t) + "_depth.png");
            write_panoptic(pan, table, dir.path / pan_rel);
            write_depth(depth, dir.path / depth_rel);
            seq.frames.push_back({t, pan_rel, depth_rel});
        }
        manifest.sequences.push_back(std::move(seq));
    }
};

}  // namespace

TEST_CASE("manifest save/load round-trip") {
    DiskFixture fx(4);
    save_manifest(fx.manifest, fx.dir.path / "manifest.json");
    const Manifest loaded = load_manifest(fx.dir.path / "manifest.json");
    CHECK(loaded.dataset_name == "fixture");
    CHECK(loaded.observed_window == 3);
    CHECK(loaded.deltas == std::vector<int>{1, 3, 5});
    REQUIRE(loaded.sequences.size() == 1);
    CHECK(loaded.sequences[0].frames.size() == 4);
    CHECK(loaded.class_table.fingerprint() == fx.table.fingerprint());
}

TEST_CASE("manifest referencing a missing file fails to load") {
    DiskFixture fx(3);
    fx.manifest.sequences[0].frames[1].pan_path = "gt/absent.png";
    save_manifest(fx.manifest, fx.dir.path / "manifest.json");
    CHECK_THROWS_AS(load_manifest(fx.dir.path / "manifest.json"), IoError);
}

TEST_CASE("manifest with non-increasing frame indices fails to load") {
    DiskFixture fx(3);
    fx.manifest.sequences[0].frames[2].index = 1;
    save_manifest(fx.manifest, fx.dir.path / "manifest.json");
    CHECK_THROWS_AS(load_manifest(fx.dir.path / "manifest.json"), FormatError);
}

TEST_CASE("manifest rejects duplicate or path-unsafe sequence ids") {
    SECTION("duplicate ids") {
        DiskFixture fx(2);
        fx.manifest.sequences.push_back(fx.manifest.sequences[0]);
        save_manifest(fx.manifest, fx.dir.path / "manifest.json");
        CHECK_THROWS_AS(load_manifest(fx.dir.path / "manifest.json"), FormatError);
    }
    SECTION("id with a path separator") {
        DiskFixture fx(2);
        fx.manifest.sequences[0].id = "a/b";
        save_manifest(fx.manifest, fx.dir.path / "manifest.json");
        CHECK_THROWS_AS(load_manifest(fx.dir.path / "manifest.json"), FormatError);
    }
    SECTION("empty id") {
        DiskFixture fx(2);
        fx.manifest.sequences[0].id = "";
        save_manifest(fx.manifest, fx.dir.path / "manifest.json");
        CHECK_THROWS_AS(load_manifest(fx.dir.path / "manifest.json"), FormatError);
    }
}

TEST_CASE("resolver emits only horizons whose target frame exists") {
    DiskFixture fx(10);  // frames 0..9, k=3, deltas {1,3,5}
    PdcqConfig config;
    const PredictionLayout layout{fx.dir.path / "preds"};
    const ResolveResult r = resolve_eval_frames(fx.manifest, layout, config);

    CHECK(r.tasks.empty());  // no predictions on disk yet
    int t4 = 0;
    for (const EvalTask& task : r.missing)
        if (task.t == 4) ++t4;
    CHECK(t4 == 3);  // targets 5, 7, 9 all exist

    int t7 = 0;
    for (const EvalTask& task : r.missing)
        if (task.t == 7) ++t7;
    CHECK(t7 == 1);  // only delta=1 targets an existing frame (8)

    for (const EvalTask& task : r.missing) CHECK(task.t >= 3);  // window requires 3 predecessors
}

TEST_CASE("resolver splits present and missing prediction pairs") {
    DiskFixture fx(6, 3, {1, 2});
    PdcqConfig config;
    config.deltas = {1, 2};
    const PredictionLayout layout{fx.dir.path / "preds"};

    // Expected pairs: t=3 -> {4,5}, t=4 -> {5}; provide only t=3,delta=1.
    fs::create_directories(layout.dir("s0", 3));
    const PanopticMap pan(4, 4, PanopticMap::pack(1, 0));
    const DepthMap depth(4, 4, 10.0f);
    write_panoptic(pan, fx.table, layout.pan_path("s0", 3, 1));
    write_depth(depth, layout.depth_path("s0", 3, 1));

    const ResolveResult r = resolve_eval_frames(fx.manifest, layout, config);
    REQUIRE(r.tasks.size() == 1);
    CHECK(r.tasks[0].t == 3);
    CHECK(r.tasks[0].delta == 1);
    REQUIRE(r.missing.size() == 2);
    CHECK(r.missing[0].t == 3);
    CHECK(r.missing[0].delta == 2);
    CHECK(r.missing[1].t == 4);
    CHECK(r.missing[1].delta == 1);
}

TEST_CASE("resolver honors non-contiguous frame indices") {
    // Sparsely sampled sequence: indices 0,1,2,3,6,8. Horizons count frame
    // offsets, so t=3 reaches delta 3 (index 6) and delta 5 (index 8) but
    // not delta 1 (index 4 does not exist), and t=6/t=8 reach nothing.
    DiskFixture fx(6);
    fx.manifest.sequences[0].frames[4].index = 6;
    fx.manifest.sequences[0].frames[5].index = 8;
    PdcqConfig config;
    const PredictionLayout layout{fx.dir.path / "preds"};
    const ResolveResult r = resolve_eval_frames(fx.manifest, layout, config);

    std::vector<std::pair<int64_t, int>> pairs;
    for (const EvalTask& task : r.missing) pairs.emplace_back(task.t, task.delta);
    const std::vector<std::pair<int64_t, int>> expected{{3, 3}, {3, 5}};
    CHECK(pairs == expected);
}

TEST_CASE("resolver is deterministic and order-stable") {
    DiskFixture fx(8);
    PdcqConfig config;
    const PredictionLayout layout{fx.dir.path / "preds"};
    const ResolveResult a = resolve_eval_frames(fx.manifest, layout, config);
    const ResolveResult b = resolve_eval_frames(fx.manifest, layout, config);
    REQUIRE(a.missing.size() == b.missing.size());
    for (size_t i = 0; i < a.missing.size(); ++i) {
        CHECK(a.missing[i].sequence_id == b.missing[i].sequence_id);
        CHECK(a.missing[i].t == b.missing[i].t);
        CHECK(a.missing[i].delta == b.missing[i].delta);
    }
    for (size_t i = 1; i < a.missing.size(); ++i) {
        const auto& prev = a.missing[i - 1];
        const auto& cur = a.missing[i];
        CHECK(std::tie(prev.sequence_id, prev.t, prev.delta) <
              std::tie(cur.sequence_id, cur.t, cur.delta));
    }
}
