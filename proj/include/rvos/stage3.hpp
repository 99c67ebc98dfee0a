#pragma once

#include "rvos/dataset.hpp"
#include "rvos/services.hpp"
#include "rvos/stage2.hpp"
#include "rvos/video.hpp"

#include <nlohmann/json.hpp>

#include <set>
#include <string>
#include <variant>
#include <vector>

namespace rvos {

struct EmptyPrediction {
    std::string target_id;
};
struct HighOverlap {
    std::string target_a;
    std::string target_b;  // target_a < target_b
    double mean_iou = 0;
};
struct BehaviorInconsistent {
    std::string reason;
};

using RefinementFlag = std::variant<EmptyPrediction, HighOverlap, BehaviorInconsistent>;

std::string_view flag_kind(const RefinementFlag& flag);
/// Identity used to decide whether a flag reappeared on a later pass.
std::string flag_key(const RefinementFlag& flag);
nlohmann::json to_json(const RefinementFlag& flag);

struct Verdict {
    bool consistent = true;
    std::string reason;
};

/// EmptyPrediction for targets that were neither declared absent nor failed by a
/// backend; HighOverlap for pairs whose mean IoU over co-occupied frames exceeds the threshold.
std::vector<RefinementFlag> structural_check(const std::vector<TrackResult>& results, double overlap_threshold);

bool keyword_needs_verification(std::string_view expression);

/// Classifier chat call; any backend or schema failure falls back to the keyword rule.
bool needs_behavior_verification(std::string_view expression, ChatBackend& refiner, std::string_view task_id = {});

/// Builds the verification request: k sampled frames with the merged mask outlined.
ChatRequest build_verification_prompt(const VideoClip& clip, const std::vector<BinaryMask>& merged,
                                      std::string_view expression, int k, std::string_view tag);

/// Fails open: any backend failure yields consistent=true, "verifier unavailable".
Verdict verify_behavior(const VideoClip& clip, const std::vector<BinaryMask>& merged, std::string_view expression,
                        ChatBackend& refiner, int k, std::string_view tag = "verify");

struct Regeneration {
    std::string description;  // the prior description when unrefinable
    bool unrefinable = false;
    std::string error;
};

/// Asks the refiner for a sharper description. An empty or echoed reply gets one re-ask.
Regeneration regenerate_description(const VideoClip& clip, const ExpressionTask& task, const TrackResult& target,
                                    const AgentTranscript& prior_transcript, const std::vector<RefinementFlag>& flags,
                                    ChatBackend& refiner, std::string_view tag);

struct RefineOptions {
    double overlap_threshold = 0.5;
    int verify_frames = 8;
    int max_iterations = 2;
    AgentOptions agent;
};

struct AuditRecord {
    int iteration = 0;  // pass on which the flag was raised
    RefinementFlag flag;
    std::string action;
    bool resolved = false;
};

nlohmann::json to_json(const AuditRecord& record);

struct RefinementOutcome {
    std::vector<TrackResult> results;
    std::vector<AgentTranscript> transcripts;  // added by re-grounding
    std::vector<BinaryMask> merged;
    std::vector<AuditRecord> audit;
    int iterations = 0;
    bool verification_needed = false;
    std::vector<Verdict> verdicts;
    std::set<std::string> unrefinable;
};

nlohmann::json to_json(const RefinementOutcome& outcome);

std::string classify_tag(std::string_view task_id);
std::string verify_tag(std::string_view task_id, int pass);
std::string regen_tag(std::string_view task_id, std::string_view target_id, int iteration);

/// Check, regenerate, re-ground, re-propagate; at most max_iterations rounds.
RefinementOutcome run_refinement_loop(const VideoClip& clip, const ExpressionTask& task, const Stage2Output& stage2,
                                      const Services& services, const RefineOptions& options);

} // namespace rvos
