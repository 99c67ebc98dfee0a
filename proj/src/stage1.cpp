#include "rvos/stage1.hpp"

#include "rvos/error.hpp"
#include "rvos/prompting.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace rvos {

using nlohmann::json;

namespace {

constexpr std::string_view kInstructions =
    "You plan grounding for a video segmentation engine. You receive frames sampled from one video, "
    "each labelled with its frame index, and a referring expression about something that happens in the video.\n"
    "1. List every object instance that matches the expression over the whole video. Mark the instance(s) the "
    "expression is about with is_central_subject=true; objects that are only mentioned to locate them get false.\n"
    "2. For each instance choose the labelled frame in which it is easiest to see.\n"
    "3. For each instance write a description that picks out that one object in that frame alone "
    "(colour, shape, size, position, neighbours). Do not rely on motion that a single frame cannot show.\n"
    "If no object matches, set no_target to true and return no targets.\n"
    "Reply with one JSON object, schema decomposition-v1:\n"
    "{\"no_target\": bool, \"targets\": [{\"keyframe_index\": int, \"description\": string, "
    "\"is_central_subject\": bool}], \"rationale\": string}";

std::string consistency_problem(const json& doc) {
    const bool no_target = doc["no_target"].get<bool>();
    const auto& targets = doc["targets"];
    if (no_target && !targets.empty()) return "no_target is true but targets were listed";
    if (!no_target && targets.empty()) return "no_target is false but no targets were listed";
    for (const auto& t : targets) {
        const auto d = t["description"].get<std::string>();
        if (d.find_first_not_of(" \t\r\n") == std::string::npos) return "a target has an empty description";
    }
    return {};
}

} // namespace

std::string stage1_tag(std::string_view task_id) {
    return task_id.empty() ? std::string("stage1") : "stage1/" + std::string(task_id);
}

ChatRequest build_decomposition_prompt(const VideoClip& clip, std::string_view expression, int budget,
                                       std::string_view task_id) {
    if (budget < 2) throw Error(ErrorCode::InvalidSpec, "frame budget must be >= 2");
    const auto shown = sample_uniform(clip, budget);

    ChatRequest request;
    request.schema = std::string(schema::kDecomposition);
    request.messages.push_back(text_message("system", std::string(kInstructions)));

    ChatMessage user{"user", {}};
    std::string header = tag_line(stage1_tag(task_id)) + "\nExpression: \"" + std::string(expression) +
                         "\"\nThe video has " + std::to_string(clip.size()) + " frames. Shown frame indices:";
    for (int i : shown) header += " " + std::to_string(i);
    user.parts.emplace_back(TextPart{header});
    for (int i : shown) {
        user.parts.emplace_back(TextPart{"Frame " + std::to_string(i) + ":"});
        user.parts.emplace_back(image_part(clip.frame(static_cast<std::size_t>(i))));
    }
    request.messages.push_back(std::move(user));
    return request;
}

int snap_to_shown(int index, const std::vector<int>& shown) {
    int best = shown.front();
    for (int s : shown) {
        if (std::abs(s - index) < std::abs(best - index)) best = s;
    }
    return best;
}

DecompositionResult validate_decomposition(DecompositionResult result, const VideoClip& clip) {
    if (result.no_target && !result.targets.empty()) {
        throw Error(ErrorCode::InvariantViolation, "no_target set while targets are present");
    }
    if (!result.no_target && result.targets.empty()) {
        throw Error(ErrorCode::InvariantViolation, "no targets listed and no_target not set");
    }
    std::set<std::string> descriptions;
    std::set<std::string> ids;
    std::vector<GroundingTarget> kept;
    for (auto& t : result.targets) {
        if (t.keyframe_index < 0 || static_cast<std::size_t>(t.keyframe_index) >= clip.size()) {
            throw Error(ErrorCode::InvariantViolation,
                        "keyframe " + std::to_string(t.keyframe_index) + " outside the clip");
        }
        if (t.description.empty()) throw Error(ErrorCode::InvariantViolation, "empty target description");
        if (!descriptions.insert(t.description).second) continue;
        if (!ids.insert(t.target_id).second) {
            throw Error(ErrorCode::InvariantViolation, "duplicate target_id '" + t.target_id + "'");
        }
        kept.push_back(std::move(t));
    }
    result.targets = std::move(kept);
    return result;
}

DecompositionRecord decompose_event(const VideoClip& clip, const ExpressionTask& task, ChatBackend& planner,
                                    int frame_budget) {
    DecompositionRecord record;
    auto request = build_decomposition_prompt(clip, task.expression, frame_budget, task.task_id);
    record.shown_frames = sample_uniform(clip, frame_budget);

    const auto reply = ask_structured(planner, std::move(request), stage1_tag(task.task_id), consistency_problem);
    record.repairs = reply.repairs;

    DecompositionResult result;
    result.no_target = reply.doc["no_target"].get<bool>();
    result.rationale = reply.doc["rationale"].get<std::string>();
    int n = 0;
    for (const auto& t : reply.doc["targets"]) {
        GroundingTarget target;
        target.target_id = "target" + std::to_string(n++);
        target.keyframe_index = t["keyframe_index"].get<int>();
        target.description = t["description"].get<std::string>();
        target.is_central_subject = t["is_central_subject"].get<bool>();
        const int snapped = snap_to_shown(target.keyframe_index, record.shown_frames);
        if (snapped != target.keyframe_index) {
            record.warnings.push_back(target.target_id + ": keyframe " + std::to_string(target.keyframe_index) +
                                      " was not shown; snapped to " + std::to_string(snapped));
            target.keyframe_index = snapped;
        }
        result.targets.push_back(std::move(target));
    }
    const auto before = result.targets.size();
    record.result = validate_decomposition(std::move(result), clip);
    if (record.result.targets.size() != before) {
        record.warnings.push_back(std::to_string(before - record.result.targets.size()) +
                                  " duplicate target description(s) dropped");
    }
    return record;
}

json to_json(const DecompositionRecord& record) {
    json targets = json::array();
    for (const auto& t : record.result.targets) {
        targets.push_back({{"target_id", t.target_id},
                           {"keyframe_index", t.keyframe_index},
                           {"description", t.description},
                           {"is_central_subject", t.is_central_subject}});
    }
    return {{"no_target", record.result.no_target},
            {"targets", targets},
            {"rationale", record.result.rationale},
            {"shown_frames", record.shown_frames},
            {"warnings", record.warnings},
            {"repairs", record.repairs}};
}

} // namespace rvos
