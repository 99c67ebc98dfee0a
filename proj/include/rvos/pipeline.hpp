#pragma once

#include "rvos/dataset.hpp"
#include "rvos/services.hpp"
#include "rvos/stage1.hpp"
#include "rvos/video.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace rvos {

struct RunConfig {
    EndpointConfig endpoints;
    int frame_budget = kDefaultFrameBudget;
    int max_rounds = 6;
    int max_candidates = 3;
    double overlap_threshold = 0.5;
    int verify_frames = 8;
    int max_iterations = 2;
    int workers = 1;
    std::filesystem::path manifest;
    std::filesystem::path clips;  // one directory per clip_id
    std::filesystem::path out;
    std::uint64_t seed = 0;
    int retry_attempts = 3;
    int retry_backoff_ms = 1000;
    int timeout_ms = 60000;
    std::string bearer_token;  // for every http endpoint

    /// Throws InvalidSpec naming the first bad field.
    void validate() const;
    ServiceOptions service_options() const;
};

enum class TaskStatus { Ok, Degraded, Failed };
std::string_view to_string(TaskStatus status);

struct TaskRun {
    Prediction prediction;
    nlohmann::json trace;
    TaskStatus status = TaskStatus::Ok;
};

/// Stage 1, then stages 2 and 3 unless the planner reports no target.
/// Never throws for backend trouble: the prediction degrades to all-empty.
TaskRun run_task(const ExpressionTask& task, const VideoClip& clip, const RunConfig& config, const Services& services);

struct RunSummary {
    std::size_t tasks = 0;
    std::size_t ok = 0;
    std::size_t degraded = 0;
    std::size_t failed = 0;
};

nlohmann::json to_json(const RunSummary& summary);

/// Writes out/predictions/{task}.json, out/trace.jsonl and out/summary.json.
RunSummary run_batch(const RunConfig& config);
RunSummary run_batch(const RunConfig& config, const Services& services);

} // namespace rvos
