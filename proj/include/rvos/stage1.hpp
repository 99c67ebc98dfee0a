#pragma once

#include "rvos/dataset.hpp"
#include "rvos/protocol.hpp"
#include "rvos/video.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace rvos {

/// One instance-level grounding unit produced by decomposition.
struct GroundingTarget {
    std::string target_id;
    int keyframe_index = 0;
    std::string description;
    bool is_central_subject = true;

    friend bool operator==(const GroundingTarget&, const GroundingTarget&) = default;
};

struct DecompositionResult {
    std::vector<GroundingTarget> targets;
    bool no_target = false;
    std::string rationale;

    friend bool operator==(const DecompositionResult&, const DecompositionResult&) = default;
};

struct DecompositionRecord {
    DecompositionResult result;
    std::vector<int> shown_frames;
    std::vector<std::string> warnings;
    int repairs = 0;
};

inline constexpr int kDefaultFrameBudget = 16;

std::string stage1_tag(std::string_view task_id);

/// Up to `budget` uniformly sampled frames, each captioned with its absolute index.
ChatRequest build_decomposition_prompt(const VideoClip& clip, std::string_view expression, int budget,
                                       std::string_view task_id = {});

/// Enforces target invariants and drops targets whose description repeats an
/// earlier one. Throws InvariantViolation.
DecompositionResult validate_decomposition(DecompositionResult result, const VideoClip& clip);

/// Nearest member of `shown` (ties go to the earlier frame). `shown` must be sorted and non-empty.
int snap_to_shown(int index, const std::vector<int>& shown);

/// One planner round (plus at most one repair re-ask). Keyframes not among the
/// shown frames are snapped and noted in `warnings`.
DecompositionRecord decompose_event(const VideoClip& clip, const ExpressionTask& task, ChatBackend& planner,
                                    int frame_budget = kDefaultFrameBudget);

nlohmann::json to_json(const DecompositionRecord& record);

} // namespace rvos
