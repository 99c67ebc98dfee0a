#pragma once

#include "rvos/dataset.hpp"
#include "rvos/mask.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rvos {

struct JfScore {
    double j = 1;
    double f = 1;
    double jf = 1;
};

/// Per-frame means of iou and boundary_f. `tol` unset means the default
/// tolerance for the frame size. Zero frames score 1. Throws LengthMismatch, DimensionMismatch.
JfScore task_jf(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt,
                std::optional<int> tol = std::nullopt);

struct PresenceOutcome {
    bool gt_no_target = false;
    bool pred_all_empty = false;
};

/// Share of no-target tasks predicted empty everywhere; 1 when there are none.
double n_accuracy(std::span<const PresenceOutcome> tasks);
/// Share of target tasks predicted non-empty somewhere; 1 when there are none.
double t_accuracy(std::span<const PresenceOutcome> tasks);
double final_score(double mean_jf, double n_acc, double t_acc);

struct TaskMetrics {
    std::string task_id;
    bool no_target = false;
    bool pred_all_empty = true;
    std::size_t frames = 0;
    JfScore score;
};

struct MetricsReport {
    std::vector<TaskMetrics> tasks;
    double mean_jf = 1;
    double n_acc = 1;
    double t_acc = 1;
    double final = 1;
    std::vector<std::string> warnings;
};

/// Missing prediction files score as all-empty and add a warning.
/// Throws ManifestParse (via the caller's load), PredictionParse, LengthMismatch, DimensionMismatch.
MetricsReport evaluate_dataset(const Manifest& manifest, const std::filesystem::path& pred_dir,
                               std::optional<int> tol = std::nullopt);

nlohmann::json to_json(const MetricsReport& report);
std::string format_table(const MetricsReport& report);

} // namespace rvos
