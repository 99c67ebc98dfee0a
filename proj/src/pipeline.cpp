#include "rvos/pipeline.hpp"

#include "rvos/error.hpp"
#include "rvos/image.hpp"
#include "rvos/stage2.hpp"
#include "rvos/stage3.hpp"

#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

namespace rvos {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

Prediction empty_prediction(const std::string& task_id, std::size_t frames, Extent extent) {
    Prediction p{task_id, {}};
    p.frames.assign(frames, rle_empty_mask(extent.height, extent.width));
    return p;
}

class ClipCache {
public:
    explicit ClipCache(std::filesystem::path root) : root_(std::move(root)) {}

    std::shared_ptr<const VideoClip> get(const std::string& clip_id) {
        std::shared_ptr<Slot> slot;
        {
            std::lock_guard lock(mutex_);
            auto& s = slots_[clip_id];
            if (!s) s = std::make_shared<Slot>();
            slot = s;
        }
        std::call_once(slot->once, [&] {
            try {
                slot->clip = std::make_shared<const VideoClip>(load_clip(root_ / clip_id));
            } catch (const Error& e) {
                slot->error = e.code();
                slot->message = e.detail();
            }
        });
        if (!slot->clip) throw Error(slot->error, slot->message);
        return slot->clip;
    }

private:
    struct Slot {
        std::once_flag once;
        std::shared_ptr<const VideoClip> clip;
        ErrorCode error = ErrorCode::Io;
        std::string message;
    };
    std::filesystem::path root_;
    std::mutex mutex_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

} // namespace

void RunConfig::validate() const {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw Error(ErrorCode::InvalidSpec, what);
    };
    need(frame_budget >= 2, "frame_budget must be >= 2");
    need(max_rounds >= 1, "max_rounds must be >= 1");
    need(max_candidates >= 1, "max_candidates must be >= 1");
    need(overlap_threshold >= 0 && overlap_threshold <= 1, "overlap_threshold must lie in [0, 1]");
    need(verify_frames >= 2, "verify_frames must be >= 2");
    need(max_iterations >= 0, "max_iterations must be >= 0");
    need(workers >= 1, "workers must be >= 1");
    need(retry_attempts >= 1, "retry_attempts must be >= 1");
    need(retry_backoff_ms >= 0, "retry_backoff_ms must be >= 0");
    need(timeout_ms >= 1, "timeout_ms must be >= 1");
}

ServiceOptions RunConfig::service_options() const {
    ServiceOptions o;
    o.seed = seed;
    o.retry.attempts = retry_attempts;
    o.retry.initial_backoff = std::chrono::milliseconds(retry_backoff_ms);
    o.timeout = std::chrono::milliseconds(timeout_ms);
    o.bearer_token = bearer_token;
    return o;
}

std::string_view to_string(TaskStatus status) {
    switch (status) {
    case TaskStatus::Ok: return "ok";
    case TaskStatus::Degraded: return "degraded";
    case TaskStatus::Failed: return "failed";
    }
    return "unknown";
}

TaskRun run_task(const ExpressionTask& task, const VideoClip& clip, const RunConfig& config, const Services& services) {
    const auto start = Clock::now();
    TaskRun run;
    run.prediction = empty_prediction(task.task_id, clip.size(), clip.extent);
    json& trace = run.trace;
    trace = {{"task_id", task.task_id}, {"clip_id", task.clip_id}, {"expression", task.expression}};
    json timing = json::object();
    json warnings = json::array();

    DecompositionRecord record;
    auto t0 = Clock::now();
    try {
        record = decompose_event(clip, task, *services.planner, config.frame_budget);
    } catch (const Error& e) {
        timing["stage1_ms"] = ms_since(t0);
        trace["stage1"] = {{"error", e.what()}};
        trace["stages_run"] = json::array({"stage1"});
        trace["error"] = e.what();
        trace["status"] = to_string(run.status = TaskStatus::Degraded);
        timing["total_ms"] = ms_since(start);
        trace["timing"] = timing;
        trace["warnings"] = warnings;
        return run;
    }
    timing["stage1_ms"] = ms_since(t0);
    trace["stage1"] = to_json(record);
    for (const auto& w : record.warnings) warnings.push_back(w);

    if (record.result.no_target) {
        trace["stages_run"] = json::array({"stage1"});
        trace["skipped"] = json::array({"stage2", "stage3"});
    } else {
        AgentOptions agent{config.max_rounds, config.max_candidates, 1};
        t0 = Clock::now();
        const auto stage2 = run_stage2(clip, record.result.targets, services, agent, task.task_id);
        timing["stage2_ms"] = ms_since(t0);

        t0 = Clock::now();
        RefineOptions refine{config.overlap_threshold, config.verify_frames, config.max_iterations, agent};
        const auto refined = run_refinement_loop(clip, task, stage2, services, refine);
        timing["stage3_ms"] = ms_since(t0);

        json targets = json::array();
        json transcripts = json::array();
        for (const auto& t : stage2.transcripts) transcripts.push_back(to_json(t));
        for (const auto& t : refined.transcripts) transcripts.push_back(to_json(t));
        bool any_failed = false;
        bool all_failed = !refined.results.empty();
        for (const auto& r : refined.results) {
            targets.push_back(to_json(r));
            any_failed = any_failed || r.failed;
            all_failed = all_failed && r.failed;
            if (r.failed) warnings.push_back("target " + r.target_id + " failed: " + r.error);
        }
        int max_rounds_used = 0;
        for (const auto& t : stage2.transcripts) max_rounds_used = std::max<int>(max_rounds_used, t.rounds.size());
        for (const auto& t : refined.transcripts) max_rounds_used = std::max<int>(max_rounds_used, t.rounds.size());

        trace["stage2"] = {{"targets", targets}, {"transcripts", transcripts}, {"max_agent_rounds", max_rounds_used}};
        trace["stage3"] = to_json(refined);
        trace["stages_run"] = json::array({"stage1", "stage2", "stage3"});

        for (std::size_t t = 0; t < refined.merged.size(); ++t) run.prediction.frames[t] = rle_encode(refined.merged[t]);
        if (any_failed) run.status = TaskStatus::Degraded;
        if (all_failed) trace["error"] = "every target failed";
    }
    trace["status"] = to_string(run.status);
    timing["total_ms"] = ms_since(start);
    trace["timing"] = timing;
    trace["warnings"] = warnings;
    return run;
}

json to_json(const RunSummary& summary) {
    return {{"tasks", summary.tasks}, {"ok", summary.ok}, {"degraded", summary.degraded}, {"failed", summary.failed}};
}

RunSummary run_batch(const RunConfig& config) {
    config.validate();
    const auto services = make_services(config.endpoints, config.service_options());
    return run_batch(config, services);
}

RunSummary run_batch(const RunConfig& config, const Services& services) {
    config.validate();
    const auto manifest = load_manifest(config.manifest);
    const auto pred_dir = config.out / "predictions";
    std::filesystem::create_directories(pred_dir);

    std::mutex trace_mutex;
    std::ofstream trace_out(config.out / "trace.jsonl", std::ios::trunc);
    if (!trace_out) throw Error(ErrorCode::Io, "cannot write " + (config.out / "trace.jsonl").string());

    ClipCache clips(config.clips);
    std::vector<TaskStatus> statuses(manifest.tasks.size(), TaskStatus::Failed);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < manifest.tasks.size(); i = next++) {
            const auto& task = manifest.tasks[i];
            TaskRun run;
            try {
                const auto clip = clips.get(task.clip_id);
                run = run_task(task, *clip, config, services);
            } catch (const std::exception& e) {
                run.prediction = Prediction{task.task_id, {}};
                run.status = TaskStatus::Failed;
                run.trace = {{"task_id", task.task_id}, {"clip_id", task.clip_id}, {"status", "failed"}, {"error", e.what()}};
            }
            try {
                write_file(prediction_path(pred_dir, task.task_id), prediction_to_json_text(run.prediction));
            } catch (const std::exception& e) {
                run.status = TaskStatus::Failed;
                run.trace["status"] = "failed";
                run.trace["error"] = e.what();
            }
            statuses[i] = run.status;
            std::lock_guard lock(trace_mutex);
            trace_out << run.trace.dump() << '\n';
            trace_out.flush();
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.workers), std::max<std::size_t>(1, manifest.tasks.size()));
        for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
    }

    RunSummary summary;
    summary.tasks = statuses.size();
    for (auto s : statuses) {
        if (s == TaskStatus::Ok) ++summary.ok;
        if (s == TaskStatus::Degraded) ++summary.degraded;
        if (s == TaskStatus::Failed) ++summary.failed;
    }
    write_file(config.out / "summary.json", to_json(summary).dump(2) + "\n");
    return summary;
}

} // namespace rvos
