// Command-line entry point: evaluate predictions against a manifest,
// synthesize ground-truth sequences, run the non-learned baselines, run
// the oracle differential check, and validate inputs.
//
// Exit codes: 0 success, 1 evaluation divergence or missing data,
// 2 usage/config error, 3 I/O or format error.

#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "pdcq/pdcq.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDivergence = 1;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;

int default_threads() {
    if (const char* env = std::getenv("PDCQ_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

struct EvaluateArgs {
    std::string manifest_path;
    std::string predictions_root;
    std::string output_path = "report.json";
    std::string format = "json";
    std::string label;
    std::vector<double> lambdas;
    std::vector<int> deltas;
    double min_depth = -1.0;
    double max_depth = -1.0;
    std::string aggregation = "mean";
    std::string filter_mode = "per-pixel";
    bool exclusive_inlier = false;
    int threads = 0;
};

pdcq::PdcqConfig build_config(const pdcq::Manifest& manifest, const EvaluateArgs& args) {
    pdcq::PdcqConfig config;
    config.deltas = args.deltas.empty() ? manifest.deltas : args.deltas;
    if (!args.lambdas.empty()) config.lambdas = args.lambdas;
    if (args.min_depth >= 0.0) config.min_depth = args.min_depth;
    if (args.max_depth >= 0.0) config.max_depth = args.max_depth;
    if (args.aggregation == "mean")
        config.overall_aggregation = pdcq::Aggregation::mean;
    else if (args.aggregation == "sum")
        config.overall_aggregation = pdcq::Aggregation::sum;
    else
        throw pdcq::ConfigError("unknown aggregation: " + args.aggregation);
    if (args.filter_mode == "per-pixel")
        config.filter_mode = pdcq::DepthFilterMode::per_pixel;
    else if (args.filter_mode == "segment-mean")
        config.filter_mode = pdcq::DepthFilterMode::segment_mean;
    else
        throw pdcq::ConfigError("unknown filter mode: " + args.filter_mode);
    config.inlier_inclusive = !args.exclusive_inlier;
    config.validate();
    return config;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw pdcq::IoError("cannot write " + path.string());
    out << text;
}

int cmd_evaluate(const EvaluateArgs& args) {
    const pdcq::Manifest manifest = pdcq::load_manifest(args.manifest_path);
    const pdcq::PdcqConfig config = build_config(manifest, args);
    const pdcq::PredictionLayout layout{fs::path(args.predictions_root)};
    const pdcq::ResolveResult resolved = pdcq::resolve_eval_frames(manifest, layout, config);

    pdcq::EvalMeta meta;
    meta.label = args.label.empty() ? fs::path(args.predictions_root).filename().string() : args.label;
    meta.dataset = manifest.dataset_name;
    meta.expected = resolved.tasks.size() + resolved.missing.size();
    meta.evaluated = resolved.tasks.size();
    meta.missing = resolved.missing;

    for (const pdcq::EvalTask& t : resolved.missing)
        std::cerr << "missing prediction: " << t.sequence_id << "/" << t.t << "/" << t.delta << "\n";

    nlohmann::ordered_json output;
    if (resolved.tasks.empty()) {
        pdcq::PdcqReport empty;
        empty.lambdas = config.lambdas;
        empty.aggregation = config.overall_aggregation;
        empty.overall_pdcq.assign(config.lambdas.size(), 0.0);
        output = pdcq::report_to_json(empty, config, meta);
        write_text_file(args.output_path, output.dump(2) + "\n");
        std::cerr << "no prediction pairs found under " << args.predictions_root << "\n";
        return kExitDivergence;
    }

    const int threads = args.threads > 0 ? args.threads : default_threads();
    const pdcq::StatAccumulator acc =
        pdcq::evaluate_tasks(resolved.tasks, manifest.class_table, config, threads);
    const pdcq::PdcqReport report = pdcq::finalize(acc, manifest.class_table, config);

    if (args.format == "json") {
        write_text_file(args.output_path, pdcq::report_to_json(report, config, meta).dump(2) + "\n");
    } else if (args.format == "csv") {
        write_text_file(args.output_path, pdcq::render_csv(report, meta));
    } else if (args.format == "markdown") {
        write_text_file(args.output_path, pdcq::render_markdown(report, meta));
    } else {
        throw pdcq::ConfigError("unknown output format: " + args.format);
    }

    std::cout << "evaluated " << meta.evaluated << "/" << meta.expected << " prediction pairs; "
              << "overall PDC-Q avg " << pdcq::detail::fixed(report.overall_pdcq_avg, 2) << "\n";
    return resolved.missing.empty() ? kExitOk : kExitDivergence;
}

struct SynthArgs {
    std::string spec_path;
    std::string output_dir;
    std::string dataset_name = "synthetic";
    std::string sequence_id = "seq0";
    int observed_window = 3;
    std::vector<int> deltas{1, 3, 5};
};

int cmd_synth(const SynthArgs& args) {
    if (args.observed_window < 0)
        throw pdcq::ConfigError("observed window must be nonnegative");
    if (args.sequence_id.empty() || args.sequence_id.find('/') != std::string::npos)
        throw pdcq::ConfigError("sequence id must be a plain name");
    const pdcq::SceneSpec spec = pdcq::load_scene_spec(args.spec_path);
    const pdcq::ClassTable table = pdcq::make_class_table(spec);
    const auto frames = pdcq::render_sequence(spec);

    const fs::path root(args.output_dir);
    const fs::path gt_dir = root / "gt" / args.sequence_id;
    fs::create_directories(gt_dir);

    pdcq::Manifest manifest;
    manifest.dataset_name = args.dataset_name;
    manifest.class_table = table;
    manifest.observed_window = args.observed_window;
    manifest.deltas = args.deltas;
    manifest.base_dir = root;

    pdcq::SequenceRecord seq;
    seq.id = args.sequence_id;
    for (size_t t = 0; t < frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "%06zu", t);
        const fs::path pan_rel = fs::path("gt") / args.sequence_id / (std::string(name) + "_pan.png");
        const fs::path depth_rel =
            fs::path("gt") / args.sequence_id / (std::string(name) + "_depth.png");
        pdcq::write_panoptic(frames[t].first, table, root / pan_rel);
        pdcq::write_depth(frames[t].second, root / depth_rel);
        seq.frames.push_back({static_cast<int64_t>(t), pan_rel, depth_rel});
    }
    manifest.sequences.push_back(std::move(seq));
    pdcq::save_manifest(manifest, root / "manifest.json");
    std::cout << "rendered " << frames.size() << " frames into " << root.string() << "\n";
    return kExitOk;
}

struct BaselineArgs {
    std::string name;
    std::string manifest_path;
    std::string output_dir;
    std::vector<int> deltas;
};

int cmd_baseline(const BaselineArgs& args) {
    if (args.name != "last-seen" && args.name != "const-velocity")
        throw pdcq::ConfigError("unknown baseline: " + args.name +
                                " (expected last-seen or const-velocity)");
    const pdcq::Manifest manifest = pdcq::load_manifest(args.manifest_path);
    const std::vector<int> deltas = args.deltas.empty() ? manifest.deltas : args.deltas;
    const pdcq::PredictionLayout layout{fs::path(args.output_dir)};
    const int k = manifest.observed_window;
    bool warned_fallback = false;
    size_t written = 0;

    for (const pdcq::SequenceRecord& seq : manifest.sequences) {
        for (size_t pos = static_cast<size_t>(k); pos < seq.frames.size(); ++pos) {
            pdcq::ObservedWindow window;
            for (size_t p = pos - static_cast<size_t>(k); p <= pos; ++p) {
                window.frames.emplace_back(
                    pdcq::read_panoptic(manifest.resolve(seq.frames[p].pan_path), manifest.class_table),
                    pdcq::read_depth(manifest.resolve(seq.frames[p].depth_path)));
            }
            const int64_t t = seq.frames[pos].index;
            for (int delta : deltas) {
                const int64_t target = t + delta;
                const bool target_exists =
                    std::any_of(seq.frames.begin(), seq.frames.end(),
                                [target](const pdcq::FrameRecord& f) { return f.index == target; });
                if (!target_exists) continue;

                std::pair<pdcq::PanopticMap, pdcq::DepthMap> forecast;
                if (args.name == "last-seen") {
                    forecast = pdcq::last_seen_forecast(window, delta);
                } else if (window.frames.size() < 2) {
                    if (!warned_fallback) {
                        std::cerr << "const-velocity: single-frame window, falling back to"
                                     " last-seen\n";
                        warned_fallback = true;
                    }
                    forecast = pdcq::last_seen_forecast(window, delta);
                } else {
                    forecast = pdcq::const_velocity_forecast(window, delta, manifest.class_table);
                }
                fs::create_directories(layout.dir(seq.id, t));
                pdcq::write_panoptic(forecast.first, manifest.class_table,
                                     layout.pan_path(seq.id, t, delta));
                pdcq::write_depth(forecast.second, layout.depth_path(seq.id, t, delta));
                ++written;
            }
        }
    }
    std::cout << "wrote " << written << " prediction pairs to " << args.output_dir << "\n";
    return kExitOk;
}

struct OracleArgs {
    uint32_t size = 16;
    uint64_t trials = 100;
    uint64_t seed = 24049;
    bool inject_fault = false;
};

int cmd_oracle_check(const OracleArgs& args) {
    if (args.size > pdcq::oracle::kMaxOracleSide)
        throw pdcq::ConfigError("size must be at most 64 for the brute-force oracle");
    pdcq::PdcqConfig config;
    config.deltas = {1};
    config.validate();
    constexpr double kTol = 1e-12;

    pdcq::Rng rng(args.seed);
    uint64_t checks = 0;
    for (uint64_t trial = 0; trial < args.trials; ++trial) {
        const pdcq::SynthInstance inst = pdcq::random_eval_instance(rng, args.size);
        pdcq::EvalFrame frame;
        frame.sequence_id = "oracle";
        frame.t = static_cast<int64_t>(trial);
        frame.delta = 1;
        frame.pred_pan = inst.pred_pan;
        frame.pred_depth = inst.pred_depth;
        frame.gt_pan = inst.gt_pan;
        frame.gt_depth = inst.gt_depth;

        const pdcq::StatAccumulator acc = pdcq::evaluate_frame(frame, inst.table, config);
        const pdcq::PdcqReport report = pdcq::finalize(acc, inst.table, config);

        for (size_t l = 0; l <= config.lambdas.size(); ++l) {
            const bool pq_track = l == config.lambdas.size();
            const pdcq::oracle::Scores expected =
                pq_track ? pdcq::oracle::brute_force_pq(inst.pred_pan, inst.gt_pan, inst.table)
                         : pdcq::oracle::brute_force_pdcq(inst.pred_pan, inst.pred_depth, inst.gt_pan,
                                                          inst.gt_depth, config.lambdas[l],
                                                          inst.table, config);
            const pdcq::TrackReport& track =
                pq_track ? report.deltas[0].pq : report.deltas[0].lambda_tracks[l];
            const std::string track_name =
                pq_track ? "pq" : "lambda=" + pdcq::detail::format_lambda(config.lambdas[l]);

            double got_mean = track.all.score;
            if (args.inject_fault && trial == 0) got_mean += 0.001;

            if (std::abs(got_mean - expected.mean) > kTol) {
                std::printf("DIVERGENCE trial %" PRIu64 " (%s, all-class mean): pipeline %.15f vs "
                            "oracle %.15f\n",
                            trial, track_name.c_str(), got_mean, expected.mean);
                return kExitDivergence;
            }
            for (const auto& [class_id, outcome] : expected.per_class) {
                if (!inst.table.contains(class_id) || !outcome.included()) continue;
                const auto it = track.per_class.find(class_id);
                if (it == track.per_class.end()) {
                    std::printf("DIVERGENCE trial %" PRIu64 " (%s, class %d): missing from pipeline\n",
                                trial, track_name.c_str(), class_id);
                    return kExitDivergence;
                }
                if (std::abs(it->second.score - outcome.score()) > kTol ||
                    it->second.tp != outcome.tp || it->second.fp != outcome.fp ||
                    it->second.fn != outcome.fn) {
                    std::printf("DIVERGENCE trial %" PRIu64 " (%s, class %d): pipeline %.15f "
                                "(tp=%" PRIu64 " fp=%" PRIu64 " fn=%" PRIu64 ") vs oracle %.15f "
                                "(tp=%" PRIu64 " fp=%" PRIu64 " fn=%" PRIu64 ")\n",
                                trial, track_name.c_str(), class_id, it->second.score,
                                it->second.tp, it->second.fp, it->second.fn, outcome.score(),
                                outcome.tp, outcome.fp, outcome.fn);
                    return kExitDivergence;
                }
            }
            ++checks;
        }
    }
    std::printf("oracle check passed: %" PRIu64 " comparisons over %" PRIu64
                " random instances (size %u)\n",
                checks, args.trials, args.size);
    return kExitOk;
}

struct ValidateArgs {
    std::string manifest_path;
    std::string predictions_root;
};

int cmd_validate(const ValidateArgs& args) {
    const pdcq::Manifest manifest = pdcq::load_manifest(args.manifest_path);
    size_t files = 0;
    size_t bad_files = 0;
    size_t total_violations = 0;

    auto check_pair = [&](const fs::path& pan_path, const fs::path& depth_path) {
        const pdcq::PanopticMap pan = pdcq::read_panoptic(pan_path, manifest.class_table);
        const pdcq::DepthMap depth = pdcq::read_depth(depth_path);
        const pdcq::ValidationReport report = pdcq::validate(pan, depth, manifest.class_table);
        ++files;
        if (report.ok()) return;
        ++bad_files;
        total_violations += report.violations.size();
        std::cout << pan_path.string() << ": " << report.violations.size() << " violation(s)\n";
        const size_t show = std::min<size_t>(report.violations.size(), 5);
        for (size_t i = 0; i < show; ++i)
            std::cout << "  [" << report.violations[i].rule << "] " << report.violations[i].message
                      << "\n";
        if (report.violations.size() > show)
            std::cout << "  ... " << (report.violations.size() - show) << " more\n";
    };

    for (const pdcq::SequenceRecord& seq : manifest.sequences)
        for (const pdcq::FrameRecord& f : seq.frames)
            check_pair(manifest.resolve(f.pan_path), manifest.resolve(f.depth_path));

    if (!args.predictions_root.empty()) {
        pdcq::PdcqConfig config;
        config.deltas = manifest.deltas;
        config.validate();
        const pdcq::PredictionLayout layout{fs::path(args.predictions_root)};
        const pdcq::ResolveResult resolved = pdcq::resolve_eval_frames(manifest, layout, config);
        for (const pdcq::EvalTask& task : resolved.tasks) check_pair(task.pred_pan, task.pred_depth);
        for (const pdcq::EvalTask& t : resolved.missing)
            std::cout << "missing prediction: " << t.sequence_id << "/" << t.t << "/" << t.delta
                      << "\n";
        if (!resolved.missing.empty()) {
            std::cout << files << " file pair(s) checked, " << resolved.missing.size()
                      << " prediction pair(s) missing\n";
            return kExitDivergence;
        }
    }

    std::cout << files << " file pair(s) checked, " << bad_files << " with violations ("
              << total_violations << " total)\n";
    return bad_files == 0 ? kExitOk : kExitDivergence;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pdcq: panoptic-depth forecast evaluation toolkit"};
    app.require_subcommand(1);

    EvaluateArgs eval_args;
    CLI::App* eval = app.add_subcommand("evaluate", "Score predictions against a manifest");
    eval->add_option("--manifest", eval_args.manifest_path, "Manifest JSON")->required();
    eval->add_option("--predictions", eval_args.predictions_root, "Prediction directory root")
        ->required();
    eval->add_option("--output", eval_args.output_path, "Report output path");
    eval->add_option("--format", eval_args.format, "Output format: json, csv, markdown");
    eval->add_option("--label", eval_args.label, "Method label used in reports");
    eval->add_option("--lambdas", eval_args.lambdas, "Depth error thresholds")->delimiter(',');
    eval->add_option("--deltas", eval_args.deltas, "Forecast horizons")->delimiter(',');
    eval->add_option("--min-depth", eval_args.min_depth, "Minimum valid ground-truth depth (m)");
    eval->add_option("--max-depth", eval_args.max_depth, "Maximum valid ground-truth depth (m)");
    eval->add_option("--aggregation", eval_args.aggregation, "Overall aggregation: mean or sum");
    eval->add_option("--filter-mode", eval_args.filter_mode,
                     "Depth filter: per-pixel or segment-mean");
    eval->add_flag("--exclusive-inlier", eval_args.exclusive_inlier,
                   "Use strict error < lambda instead of error <= lambda");
    eval->add_option("--threads", eval_args.threads,
                     "Worker threads (default: PDCQ_THREADS or hardware)")
        ->check(CLI::PositiveNumber);

    SynthArgs synth_args;
    CLI::App* synth = app.add_subcommand("synth", "Render a synthetic ground-truth sequence");
    synth->add_option("--spec", synth_args.spec_path, "Scene spec JSON")->required();
    synth->add_option("--output", synth_args.output_dir, "Output dataset root")->required();
    synth->add_option("--name", synth_args.dataset_name, "Dataset name in the manifest");
    synth->add_option("--sequence", synth_args.sequence_id, "Sequence id");
    synth->add_option("--observed-window", synth_args.observed_window,
                      "Past frames required before the current frame");
    synth->add_option("--deltas", synth_args.deltas, "Horizon set in the manifest")->delimiter(',');

    BaselineArgs baseline_args;
    CLI::App* baseline = app.add_subcommand("baseline", "Write non-learned baseline predictions");
    baseline->add_option("--name", baseline_args.name, "last-seen or const-velocity")->required();
    baseline->add_option("--manifest", baseline_args.manifest_path, "Manifest JSON")->required();
    baseline->add_option("--output", baseline_args.output_dir, "Prediction directory root")
        ->required();
    baseline->add_option("--deltas", baseline_args.deltas, "Horizon set (default: manifest)")
        ->delimiter(',');

    OracleArgs oracle_args;
    CLI::App* oracle = app.add_subcommand("oracle-check",
                                          "Differential check: pipeline vs brute-force oracle");
    oracle->add_option("--size", oracle_args.size, "Map side length (<= 64)");
    oracle->add_option("--trials", oracle_args.trials, "Number of random instances");
    oracle->add_option("--seed", oracle_args.seed, "RNG seed");
    oracle->add_flag("--inject-fault", oracle_args.inject_fault, "Corrupt one result on purpose")
        ->group("");  // hidden test hook

    ValidateArgs validate_args;
    CLI::App* validate = app.add_subcommand("validate", "Structurally validate dataset files");
    validate->add_option("--manifest", validate_args.manifest_path, "Manifest JSON")->required();
    validate->add_option("--predictions", validate_args.predictions_root,
                         "Also validate this prediction root");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (eval->parsed()) return cmd_evaluate(eval_args);
        if (synth->parsed()) return cmd_synth(synth_args);
        if (baseline->parsed()) return cmd_baseline(baseline_args);
        if (oracle->parsed()) return cmd_oracle_check(oracle_args);
        if (validate->parsed()) return cmd_validate(validate_args);
    } catch (const pdcq::ConfigError& e) {
        std::cerr << "{\"error\": \"config\", \"message\": " << nlohmann::json(e.what()).dump()
                  << "}\n";
        return kExitUsage;
    } catch (const pdcq::Error& e) {
        std::cerr << "{\"error\": \"io\", \"message\": " << nlohmann::json(e.what()).dump() << "}\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\": \"internal\", \"message\": " << nlohmann::json(e.what()).dump()
                  << "}\n";
        return kExitIo;
    }
    return kExitUsage;
}
