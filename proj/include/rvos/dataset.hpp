#pragma once

#include "rvos/mask.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rvos {

/// One (clip, expression) pair plus its ground-truth linkage.
struct ExpressionTask {
    std::string task_id;
    std::string clip_id;
    std::string expression;
    bool no_target = false;
    std::optional<std::filesystem::path> gt_dir;  // absolute once loaded
};

/// `{"tasks": [{task_id, clip_id, expression, no_target, gt_dir?}]}`;
/// gt_dir is stored relative to the manifest's directory.
struct Manifest {
    std::vector<ExpressionTask> tasks;
    std::filesystem::path base_dir;
};

Manifest load_manifest(const std::filesystem::path& path);   // throws ManifestParse
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

/// Per-frame prediction for one task: `{task_id, frames: [{frame_index, rle}]}`.
struct Prediction {
    std::string task_id;
    std::vector<RleMask> frames;
};

std::string prediction_to_json_text(const Prediction& prediction);
/// Frames missing below the highest listed index stay empty. Throws PredictionParse.
Prediction parse_prediction(std::string_view text, const std::string& origin);

std::filesystem::path prediction_path(const std::filesystem::path& pred_dir, std::string_view task_id);

/// Reads `gt_dir/00000.png ...` in lexicographic order.
std::vector<BinaryMask> load_mask_sequence(const std::filesystem::path& dir);

} // namespace rvos
