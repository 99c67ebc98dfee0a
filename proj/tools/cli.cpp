#include "cli.hpp"

#include "rvos/error.hpp"
#include "rvos/eval.hpp"
#include "rvos/http.hpp"
#include "rvos/image.hpp"
#include "rvos/pipeline.hpp"
#include "rvos/services.hpp"
#include "rvos/synthetic.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace rvos {

namespace {

enum Exit { kOk = 0, kDegraded = 1, kUsage = 2, kFatal = 3 };

bool usage_error(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::ShapeOutOfCanvas:
        return true;
    default:
        return false;
    }
}

struct RunFlags {
    RunConfig config;
    std::string manifest, clips, out;
};

struct EvalFlags {
    std::string manifest, pred, report, components;
    int tol = -1;
    double min_final = 0;
};

struct VizFlags {
    std::string clip, pred, out, color = "#ff0000";
    int width = 1;
};

struct GenFlags {
    std::string spec, out;
    std::uint64_t seed = 0;
};

struct ServeFlags {
    std::string chat, segmenter, tracker, host = "127.0.0.1";
    int port = 8080;
    std::uint64_t seed = 0;
};

int cmd_run(RunFlags& f, std::ostream& out, std::ostream& err) {
    auto& config = f.config;
    config.manifest = f.manifest;
    config.clips = f.clips;
    config.out = f.out;
    try {
        config.validate();
    } catch (const Error& e) {
        err << "error: " << e.detail() << "\n";
        return kUsage;
    }
    for (const auto* ref : {&config.endpoints.planner, &config.endpoints.refiner, &config.endpoints.segmenter,
                            &config.endpoints.tracker}) {
        if (ref->empty()) {
            err << "error: all four endpoints are required (flags, config file or RVOS_*_URL)\n";
            return kUsage;
        }
    }
    try {
        const auto summary = run_batch(config);
        out << "tasks " << summary.tasks << "  ok " << summary.ok << "  degraded " << summary.degraded << "  failed "
            << summary.failed << "\n";
        out << "predictions: " << (config.out / "predictions").string() << "\n";
        return summary.degraded + summary.failed == 0 ? kOk : kDegraded;
    } catch (const Error& e) {
        err << "fatal: " << e.what() << "\n";
        return kFatal;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << "\n";
        return kFatal;
    }
}

int cmd_evaluate(const EvalFlags& f, std::ostream& out, std::ostream& err) {
    try {
        const auto manifest = load_manifest(f.manifest);
        const std::optional<int> tol = f.tol >= 0 ? std::optional<int>(f.tol) : std::nullopt;
        const auto report = evaluate_dataset(manifest, f.pred, tol);
        std::filesystem::path report_path = f.report;
        if (report_path.empty()) report_path = std::filesystem::path(f.pred).parent_path() / "report.json";
        write_file(report_path, to_json(report).dump(2) + "\n");
        for (const auto& w : report.warnings) err << "warning: " << w << "\n";
        out << format_table(report);
        return report.final + 1e-12 < f.min_final ? kDegraded : kOk;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << "\n";
        return kFatal;
    }
}

// Rows of `name,jf,n_acc,t_acc` (header optional) scored with final_score only.
int cmd_evaluate_components(const EvalFlags& f, std::ostream& out, std::ostream& err) {
    try {
        std::istringstream in(read_file(f.components));
        std::string line;
        int line_no = 0, rows = 0, below = 0;
        out << "name                     J&F      N-acc    T-acc    Final\n";
        while (std::getline(in, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos || line.starts_with("name,")) continue;
            std::istringstream fields(line);
            std::string name, cell;
            std::vector<double> values;
            std::getline(fields, name, ',');
            while (std::getline(fields, cell, ',')) {
                std::size_t used = 0;
                double v = -1;
                try {
                    v = std::stod(cell, &used);
                } catch (const std::exception&) {
                }
                if (!(v >= 0.0 && v <= 1.0)) used = 0;
                if (used == 0) throw Error(ErrorCode::InvalidSpec, "bad number '" + cell + "'");
                values.push_back(v);
            }
            if (values.size() != 3) {
                throw Error(ErrorCode::InvalidSpec, f.components + ":" + std::to_string(line_no) +
                                                        ": expected name,jf,n_acc,t_acc");
            }
            const double fin = final_score(values[0], values[1], values[2]);
            char buf[160];
            std::snprintf(buf, sizeof buf, "%-24s %.4f   %.4f   %.4f   %.6f\n", name.c_str(), values[0], values[1],
                          values[2], fin);
            out << buf;
            ++rows;
            below += fin + 1e-12 < f.min_final;
        }
        if (rows == 0) throw Error(ErrorCode::InvalidSpec, f.components + ": no rows");
        return below ? kDegraded : kOk;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << "\n";
        return kFatal;
    }
}

int cmd_viz(const VizFlags& f, std::ostream& out, std::ostream& err) {
    OverlayStyle style;
    try {
        style.color = parse_color(f.color);
    } catch (const Error& e) {
        err << "error: " << e.detail() << "\n";
        return kUsage;
    }
    style.width = f.width;
    try {
        const auto clip = load_clip(f.clip);
        const auto prediction = parse_prediction(read_file(f.pred), f.pred);
        if (prediction.frames.size() > clip.size()) {
            throw Error(ErrorCode::LengthMismatch, f.pred + " has more frames than the clip");
        }
        for (std::size_t t = 0; t < clip.size(); ++t) {
            BinaryMask mask(clip.extent.height, clip.extent.width);
            if (t < prediction.frames.size()) mask = rle_decode(prediction.frames[t]);
            if (mask.extent() != clip.extent) throw Error(ErrorCode::DimensionMismatch, "mask size differs from clip");
            write_png(std::filesystem::path(f.out) / frame_file_name(t), overlay_boundary(clip.frame(t), mask, style));
        }
        out << "wrote " << clip.size() << " frames to " << f.out << "\n";
        return kOk;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << "\n";
        return kFatal;
    }
}

int cmd_gen_synthetic(const GenFlags& f, std::ostream& out, std::ostream& err) {
    try {
        SyntheticScene scene;
        try {
            scene = load_scene(f.spec);
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::InvalidSpec, f.spec + ": " + e.what());
        }
        const auto generated = gen_synthetic(scene, f.seed);
        write_synthetic(f.out, scene, generated);
        out << "clip " << scene.clip_id << ": " << scene.frames << " frames, " << scene.expressions.size()
            << " expressions -> " << f.out << "\n";
        return kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return usage_error(e.code()) ? kUsage : kFatal;
    } catch (const std::exception& e) {
        err << "fatal: " << e.what() << "\n";
        return kFatal;
    }
}

int cmd_serve_mock(const ServeFlags& f, std::ostream& out, std::ostream& err) {
    try {
        ServiceOptions options;
        options.seed = f.seed;
        BackendServer server(f.chat.empty() ? nullptr : make_chat(f.chat, options),
                             f.segmenter.empty() ? nullptr : make_segmenter(f.segmenter, options),
                             f.tracker.empty() ? nullptr : make_tracker(f.tracker, options));
        out << "serving on " << f.host << ":" << f.port << std::endl;
        server.listen(f.host, f.port);
        return kOk;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return usage_error(e.code()) ? kUsage : kFatal;
    }
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Training-free referring video object segmentation engine and evaluator", "rvos"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Key-value config file; keys go under a [run] section");

    RunFlags run_flags;
    auto& rc = run_flags.config;
    auto* run = app.add_subcommand("run", "Segment every task in a manifest");
    run->fallthrough();
    run->add_option("--manifest", run_flags.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
    run->add_option("--clips", run_flags.clips, "Directory holding one frame directory per clip")
        ->required()
        ->check(CLI::ExistingDirectory);
    run->add_option("--out", run_flags.out, "Output directory")->required();
    run->add_option("--workers", rc.workers, "Tasks processed in parallel")->capture_default_str();
    run->add_option("--seed", rc.seed, "Seed for every randomised component")->capture_default_str();
    run->add_option("--planner", rc.endpoints.planner, "Planner chat endpoint (URL or mock:<fixture>)")
        ->envname("RVOS_PLANNER_URL");
    run->add_option("--refiner", rc.endpoints.refiner, "Refinement chat endpoint")->envname("RVOS_REFINER_URL");
    run->add_option("--segmenter", rc.endpoints.segmenter, "Segmenter endpoint")->envname("RVOS_SEGMENTER_URL");
    run->add_option("--tracker", rc.endpoints.tracker, "Tracker endpoint")->envname("RVOS_TRACKER_URL");
    run->add_option("--frame-budget", rc.frame_budget, "Frames shown to the planner")->capture_default_str();
    run->add_option("--max-rounds", rc.max_rounds, "Agent rounds per grounding")->capture_default_str();
    run->add_option("--max-candidates", rc.max_candidates, "Segmenter candidates per call")->capture_default_str();
    run->add_option("--overlap-threshold", rc.overlap_threshold, "Mean IoU above which two targets are flagged")
        ->capture_default_str();
    run->add_option("--verify-frames", rc.verify_frames, "Frames sampled for behaviour verification")
        ->capture_default_str();
    run->add_option("--max-iterations", rc.max_iterations, "Refinement rounds per task")->capture_default_str();
    run->add_option("--retry-attempts", rc.retry_attempts, "Attempts per backend call")->capture_default_str();
    run->add_option("--retry-backoff-ms", rc.retry_backoff_ms, "First retry delay, doubled each attempt")
        ->capture_default_str();
    run->add_option("--timeout-ms", rc.timeout_ms, "Per-request timeout")->capture_default_str();
    run->add_option("--bearer-token", rc.bearer_token, "Sent as Authorization to http endpoints")
        ->envname("RVOS_BEARER_TOKEN");

    EvalFlags eval_flags;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions: J, F, J&F, N-acc, T-acc, Final");
    auto* manifest_opt =
        evaluate->add_option("--manifest", eval_flags.manifest, "Manifest JSON")->check(CLI::ExistingFile);
    auto* pred_opt =
        evaluate->add_option("--pred", eval_flags.pred, "Prediction directory")->check(CLI::ExistingDirectory);
    auto* components_opt =
        evaluate
            ->add_option("--components", eval_flags.components,
                         "CSV of name,jf,n_acc,t_acc rows; prints Final per row instead of scoring masks")
            ->check(CLI::ExistingFile);
    manifest_opt->needs(pred_opt);
    pred_opt->needs(manifest_opt);
    components_opt->excludes(manifest_opt)->excludes(pred_opt);
    evaluate->add_option("--report", eval_flags.report, "Report path (default: report.json beside --pred)");
    evaluate->add_option("--tol", eval_flags.tol, "Boundary tolerance in pixels (default: from frame size)")
        ->check(CLI::NonNegativeNumber);
    evaluate->add_option("--min-final", eval_flags.min_final, "Exit 1 when Final is below this")
        ->check(CLI::Range(0.0, 1.0));

    VizFlags viz_flags;
    auto* viz = app.add_subcommand("viz", "Write frames with the predicted mask outlined");
    viz->add_option("--clip", viz_flags.clip, "Clip frame directory")->required()->check(CLI::ExistingDirectory);
    viz->add_option("--pred", viz_flags.pred, "Prediction JSON")->required()->check(CLI::ExistingFile);
    viz->add_option("--out", viz_flags.out, "Output directory")->required();
    viz->add_option("--color", viz_flags.color, "Outline colour: #rrggbb or r,g,b")->capture_default_str();
    viz->add_option("--width", viz_flags.width, "Outline width in pixels")->check(CLI::PositiveNumber)->capture_default_str();

    GenFlags gen_flags;
    auto* gen = app.add_subcommand("gen-synthetic", "Render a synthetic scene with ground truth");
    gen->add_option("--spec", gen_flags.spec, "Scene JSON")->required()->check(CLI::ExistingFile);
    gen->add_option("--seed", gen_flags.seed, "Noise seed")->capture_default_str();
    gen->add_option("--out", gen_flags.out, "Suite root")->required();

    ServeFlags serve_flags;
    auto* serve = app.add_subcommand("serve-mock", "Serve mock backends over the HTTP protocol");
    serve->add_option("--chat", serve_flags.chat, "mock:<fixture> answering /v1/chat");
    serve->add_option("--segmenter", serve_flags.segmenter, "mock:<fixture> answering /v1/segment");
    serve->add_option("--tracker", serve_flags.tracker, "mock:<fixture> answering /v1/track/*");
    serve->add_option("--host", serve_flags.host)->capture_default_str();
    serve->add_option("--port", serve_flags.port)->capture_default_str();
    serve->add_option("--seed", serve_flags.seed)->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        if (code != 0) err << app.help();
        return code == 0 ? kOk : kUsage;
    }

    if (run->parsed()) return cmd_run(run_flags, out, err);
    if (evaluate->parsed()) {
        if (!eval_flags.components.empty()) return cmd_evaluate_components(eval_flags, out, err);
        if (eval_flags.manifest.empty()) {
            err << "error: evaluate needs --manifest and --pred, or --components\n" << evaluate->help();
            return kUsage;
        }
        return cmd_evaluate(eval_flags, out, err);
    }
    if (viz->parsed()) return cmd_viz(viz_flags, out, err);
    if (gen->parsed()) return cmd_gen_synthetic(gen_flags, out, err);
    if (serve->parsed()) return cmd_serve_mock(serve_flags, out, err);
    return kUsage;
}

} // namespace rvos
