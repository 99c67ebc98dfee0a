#pragma once

#include "rvos/image.hpp"
#include "rvos/protocol.hpp"
#include "rvos/services.hpp"
#include "rvos/stage1.hpp"
#include "rvos/video.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace rvos {

// Planner tool actions, one per round.
struct SegmentByText {
    std::string text;
};
struct RefineByPoints {
    std::vector<PointPrompt> points;
};
struct RefineByBox {
    BoxPrompt box;
};
struct SelectCandidate {
    int index = 0;
};
struct Accept {};
struct DeclareAbsent {};

using ToolAction = std::variant<SegmentByText, RefineByPoints, RefineByBox, SelectCandidate, Accept, DeclareAbsent>;

/// From a validated agent-action-v1 document.
ToolAction tool_action_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ToolAction& action);

enum class AgentOutcome { Accepted, Absent, BudgetExhausted };
std::string_view to_string(AgentOutcome outcome);

struct AgentRound {
    std::string planner_message;  // raw planner reply
    ToolAction action;
    std::string result_summary;
    bool wasted = false;  // protocol violation; the planner was re-prompted
};

struct AgentTranscript {
    std::string transcript_id;
    std::vector<AgentRound> rounds;
    AgentOutcome outcome = AgentOutcome::BudgetExhausted;
    /// The accepted mask, or for BudgetExhausted the best-scoring candidate seen (if any).
    std::optional<BinaryMask> mask;
    double score = 0;
};

nlohmann::json to_json(const AgentTranscript& transcript);

struct AgentOptions {
    int max_rounds = 6;
    int max_candidates = 3;
    int overlay_width = 1;
};

std::string agent_tag(std::string_view task_id, std::string_view target_id, int generation);

/// Multi-round planner/segmenter loop on one frame. Always ends within max_rounds.
/// Throws on backend failures and on a planner reply that stays malformed after one repair.
AgentTranscript agent_ground(const RgbImage& frame, std::string_view description, ChatBackend& planner,
                             SegmenterBackend& segmenter, const AgentOptions& options, std::string_view tag,
                             std::string transcript_id = {});

ClipRef clip_ref_for(const VideoClip& clip);

/// Full-length mask sequence: backward run + seed + forward run. Only the runs
/// that have frames to cover are issued. Throws EmptySeed, BackendFailure.
std::vector<BinaryMask> propagate_bidirectional(const VideoClip& clip, int seed_frame, const BinaryMask& seed,
                                                TrackerBackend& tracker);

struct TrackResult {
    std::string target_id;
    std::string description;
    bool is_central_subject = true;
    int seed_frame = 0;
    std::vector<BinaryMask> masks;  // one per clip frame
    std::string transcript_ref;
    int generation = 0;
    std::optional<AgentOutcome> outcome;  // unset when the target failed before the agent finished
    bool failed = false;
    std::string error;

    bool all_empty() const;
};

nlohmann::json to_json(const TrackResult& result);

/// Agent grounding on the keyframe then propagation. Backend failures are
/// caught: the result is all-empty with `failed` set.
TrackResult ground_and_track(const VideoClip& clip, const GroundingTarget& target, const Services& services,
                             const AgentOptions& options, std::string_view task_id, int generation,
                             AgentTranscript* transcript_out = nullptr);

/// Per-frame union of central-subject masks.
std::vector<BinaryMask> merge_subjects(const std::vector<TrackResult>& results, const VideoClip& clip);

struct Stage2Output {
    std::vector<TrackResult> results;
    std::vector<AgentTranscript> transcripts;  // parallel to results
    std::vector<BinaryMask> merged;
};

Stage2Output run_stage2(const VideoClip& clip, const std::vector<GroundingTarget>& targets, const Services& services,
                        const AgentOptions& options, std::string_view task_id);

} // namespace rvos
