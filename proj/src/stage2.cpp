#include "rvos/stage2.hpp"

#include "rvos/error.hpp"
#include "rvos/prompting.hpp"

#include <array>
#include <cstdio>

namespace rvos {

using nlohmann::json;

namespace {

constexpr std::string_view kAgentInstructions =
    "You drive an interactive image segmenter to produce one mask for the described object. "
    "Each round you choose exactly one action and reply with one JSON object, schema agent-action-v1:\n"
    "  {\"action\": \"segment_by_text\", \"text\": <short noun phrase>}\n"
    "  {\"action\": \"refine_by_points\", \"points\": [{\"x\": px, \"y\": px, \"positive\": bool}, ...]}\n"
    "  {\"action\": \"refine_by_box\", \"box\": [x0, y0, x1, y1]}\n"
    "  {\"action\": \"select_candidate\", \"index\": <candidate number>}\n"
    "  {\"action\": \"accept\"}            keep the selected candidate as the final mask\n"
    "  {\"action\": \"declare_absent\"}    the object is not in this frame\n"
    "Segmenter calls replace the candidate list and select the best-scoring candidate. "
    "Candidates are shown as coloured outlines on the frame. "
    "You may add a \"thought\" string. Accept only when the selected candidate covers the described object "
    "and nothing else.";

constexpr std::array<Rgb, 6> kPalette{{{255, 0, 0}, {0, 255, 0}, {0, 128, 255}, {255, 255, 0}, {255, 0, 255}, {0, 255, 255}}};

std::string format_score(double s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", s);
    return buf;
}

struct LoopState {
    std::vector<SegmentCandidate> candidates;
    std::vector<BinaryMask> decoded;
    std::optional<int> selected;
    std::optional<BinaryMask> best;
    double best_score = -1;
};

void append_candidates(ChatMessage& msg, const RgbImage& frame, const LoopState& state, int overlay_width) {
    if (state.candidates.empty()) {
        msg.parts.emplace_back(TextPart{"No candidates."});
        return;
    }
    for (std::size_t i = 0; i < state.candidates.size(); ++i) {
        std::string caption = "Candidate " + std::to_string(i) + " (score " + format_score(state.candidates[i].score) +
                              ", area " + std::to_string(area(state.decoded[i])) + ")";
        if (state.selected && *state.selected == static_cast<int>(i)) caption += " [selected]";
        msg.parts.emplace_back(TextPart{caption});
        const OverlayStyle style{kPalette[i % kPalette.size()], overlay_width};
        msg.parts.emplace_back(image_part(overlay_boundary(frame, state.decoded[i], style)));
    }
}

} // namespace

ToolAction tool_action_from_json(const json& doc) {
    const auto action = doc.at("action").get<std::string>();
    if (action == "segment_by_text") return SegmentByText{doc.at("text").get<std::string>()};
    if (action == "refine_by_points") {
        RefineByPoints r;
        for (const auto& p : doc.at("points")) {
            r.points.push_back({p.at("x").get<double>(), p.at("y").get<double>(), p.value("positive", true)});
        }
        return r;
    }
    if (action == "refine_by_box") {
        const auto& b = doc.at("box");
        return RefineByBox{{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()}};
    }
    if (action == "select_candidate") return SelectCandidate{doc.at("index").get<int>()};
    if (action == "accept") return Accept{};
    if (action == "declare_absent") return DeclareAbsent{};
    throw Error(ErrorCode::ProtocolViolation, "unknown action '" + action + "'");
}

json to_json(const ToolAction& action) {
    return std::visit(
        [](const auto& a) -> json {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, SegmentByText>) {
                return {{"action", "segment_by_text"}, {"text", a.text}};
            } else if constexpr (std::is_same_v<T, RefineByPoints>) {
                json pts = json::array();
                for (const auto& p : a.points) pts.push_back({{"x", p.x}, {"y", p.y}, {"positive", p.positive}});
                return {{"action", "refine_by_points"}, {"points", pts}};
            } else if constexpr (std::is_same_v<T, RefineByBox>) {
                return {{"action", "refine_by_box"}, {"box", {a.box.x0, a.box.y0, a.box.x1, a.box.y1}}};
            } else if constexpr (std::is_same_v<T, SelectCandidate>) {
                return {{"action", "select_candidate"}, {"index", a.index}};
            } else if constexpr (std::is_same_v<T, Accept>) {
                return {{"action", "accept"}};
            } else {
                return {{"action", "declare_absent"}};
            }
        },
        action);
}

std::string_view to_string(AgentOutcome outcome) {
    switch (outcome) {
    case AgentOutcome::Accepted: return "accepted";
    case AgentOutcome::Absent: return "absent";
    case AgentOutcome::BudgetExhausted: return "budget_exhausted";
    }
    return "unknown";
}

json to_json(const AgentTranscript& transcript) {
    json rounds = json::array();
    for (const auto& r : transcript.rounds) {
        rounds.push_back({{"planner_message", r.planner_message},
                          {"tool_action", to_json(r.action)},
                          {"tool_result", r.result_summary},
                          {"wasted", r.wasted}});
    }
    json out{{"transcript_id", transcript.transcript_id},
             {"rounds", rounds},
             {"outcome", to_string(transcript.outcome)},
             {"score", transcript.score}};
    out["mask_area"] = transcript.mask ? json(area(*transcript.mask)) : json(nullptr);
    return out;
}

std::string agent_tag(std::string_view task_id, std::string_view target_id, int generation) {
    return "agent/" + std::string(task_id) + "/" + std::string(target_id) + "/g" + std::to_string(generation);
}

AgentTranscript agent_ground(const RgbImage& frame, std::string_view description, ChatBackend& planner,
                             SegmenterBackend& segmenter, const AgentOptions& options, std::string_view tag,
                             std::string transcript_id) {
    if (options.max_rounds < 1) throw Error(ErrorCode::InvalidSpec, "max_rounds must be >= 1");
    AgentTranscript transcript;
    transcript.transcript_id = std::move(transcript_id);

    ChatRequest request;
    request.schema = std::string(schema::kAgentAction);
    request.messages.push_back(text_message("system", std::string(kAgentInstructions)));
    ChatMessage first{"user", {}};
    first.parts.emplace_back(TextPart{tag_line(tag) + "\nTarget description: \"" + std::string(description) +
                                      "\"\nImage size: " + std::to_string(frame.width()) + "x" +
                                      std::to_string(frame.height()) + " (width x height).\nRound 1 of " +
                                      std::to_string(options.max_rounds) + "."});
    first.parts.emplace_back(image_part(frame));
    first.parts.emplace_back(TextPart{"No candidates yet."});
    request.messages.push_back(std::move(first));

    LoopState state;
    auto run_segment = [&](SegmentPrompt prompt) {
        state.candidates = segment(segmenter, SegmentRequest{frame, std::move(prompt), options.max_candidates});
        state.decoded.clear();
        for (const auto& c : state.candidates) {
            state.decoded.push_back(rle_decode(c.mask));
            if (c.score > state.best_score) {
                state.best_score = c.score;
                state.best = state.decoded.back();
            }
        }
        state.selected = state.candidates.empty() ? std::nullopt : std::optional<int>(0);
        std::string summary = std::to_string(state.candidates.size()) + " candidate(s)";
        for (std::size_t i = 0; i < state.candidates.size(); ++i) {
            summary += i ? ", " : ": ";
            summary += "#" + std::to_string(i) + " score " + format_score(state.candidates[i].score);
        }
        return summary;
    };

    for (int round = 1; round <= options.max_rounds; ++round) {
        const auto reply = ask_structured(planner, request, tag);
        AgentRound record{reply.raw, tool_action_from_json(reply.doc), {}, false};
        std::optional<AgentOutcome> done;

        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, SegmentByText>) {
                    record.result_summary = run_segment(TextPrompt{a.text});
                } else if constexpr (std::is_same_v<T, RefineByPoints>) {
                    record.result_summary = run_segment(PointsPrompt{a.points});
                } else if constexpr (std::is_same_v<T, RefineByBox>) {
                    record.result_summary = run_segment(a.box);
                } else if constexpr (std::is_same_v<T, SelectCandidate>) {
                    if (a.index < 0 || static_cast<std::size_t>(a.index) >= state.candidates.size()) {
                        record.wasted = true;
                        record.result_summary = "protocol violation: candidate " + std::to_string(a.index) +
                                                " does not exist (" + std::to_string(state.candidates.size()) +
                                                " available)";
                    } else {
                        state.selected = a.index;
                        record.result_summary = "selected candidate " + std::to_string(a.index);
                    }
                } else if constexpr (std::is_same_v<T, Accept>) {
                    if (!state.selected) {
                        record.wasted = true;
                        record.result_summary = "protocol violation: accept with no selected candidate";
                    } else {
                        const auto i = static_cast<std::size_t>(*state.selected);
                        transcript.mask = state.decoded[i];
                        transcript.score = state.candidates[i].score;
                        record.result_summary = "accepted candidate " + std::to_string(i);
                        done = AgentOutcome::Accepted;
                    }
                } else {
                    record.result_summary = "declared absent";
                    done = AgentOutcome::Absent;
                }
            },
            record.action);

        transcript.rounds.push_back(record);
        if (done) {
            transcript.outcome = *done;
            return transcript;
        }

        request.messages.push_back(text_message("assistant", reply.raw));
        ChatMessage next{"user", {}};
        std::string header = tag_line(tag) + "\nResult: " + record.result_summary;
        if (round < options.max_rounds) {
            header += "\nRound " + std::to_string(round + 1) + " of " + std::to_string(options.max_rounds) + ".";
        }
        next.parts.emplace_back(TextPart{header});
        append_candidates(next, frame, state, options.overlay_width);
        request.messages.push_back(std::move(next));
    }

    transcript.outcome = AgentOutcome::BudgetExhausted;
    if (state.best) {
        transcript.mask = state.best;
        transcript.score = state.best_score;
    }
    return transcript;
}

ClipRef clip_ref_for(const VideoClip& clip) {
    return ClipRef{clip.clip_id, clip.source.string(), static_cast<int>(clip.size()), clip.extent};
}

std::vector<BinaryMask> propagate_bidirectional(const VideoClip& clip, int seed_frame, const BinaryMask& seed,
                                                TrackerBackend& tracker) {
    if (empty(seed)) throw Error(ErrorCode::EmptySeed, "cannot propagate an empty seed");
    const int n = static_cast<int>(clip.size());
    const auto session = tracker.track_init(clip_ref_for(clip), seed_frame, rle_encode(seed));

    std::vector<std::optional<BinaryMask>> slots(clip.size());
    slots[static_cast<std::size_t>(seed_frame)] = seed;
    auto absorb = [&](Direction dir) {
        const int lo = dir == Direction::Forward ? seed_frame + 1 : 0;
        const int hi = dir == Direction::Forward ? n : seed_frame;  // exclusive
        const auto frames = tracker.track_propagate(session, dir);
        if (frames.size() != static_cast<std::size_t>(hi - lo)) {
            throw Error(ErrorCode::BackendFailure, std::string(wire::direction_name(dir)) + " run returned " +
                                                       std::to_string(frames.size()) + " frames, expected " +
                                                       std::to_string(hi - lo));
        }
        for (const auto& f : frames) {
            if (f.frame_index < lo || f.frame_index >= hi || slots[static_cast<std::size_t>(f.frame_index)]) {
                throw Error(ErrorCode::BackendFailure,
                            "tracker returned unexpected frame " + std::to_string(f.frame_index));
            }
            auto mask = rle_decode(f.mask);
            if (mask.extent() != clip.extent) throw Error(ErrorCode::BackendFailure, "tracker mask has the wrong size");
            slots[static_cast<std::size_t>(f.frame_index)] = std::move(mask);
        }
    };
    if (seed_frame > 0) absorb(Direction::Backward);
    if (seed_frame < n - 1) absorb(Direction::Forward);

    std::vector<BinaryMask> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

bool TrackResult::all_empty() const {
    return std::all_of(masks.begin(), masks.end(), [](const BinaryMask& m) { return empty(m); });
}

json to_json(const TrackResult& r) {
    std::size_t nonempty = 0;
    for (const auto& m : r.masks) nonempty += !empty(m);
    return {{"target_id", r.target_id},
            {"description", r.description},
            {"is_central_subject", r.is_central_subject},
            {"seed_frame", r.seed_frame},
            {"generation", r.generation},
            {"transcript_ref", r.transcript_ref},
            {"outcome", r.outcome ? json(to_string(*r.outcome)) : json(nullptr)},
            {"failed", r.failed},
            {"error", r.error},
            {"nonempty_frames", nonempty}};
}

TrackResult ground_and_track(const VideoClip& clip, const GroundingTarget& target, const Services& services,
                             const AgentOptions& options, std::string_view task_id, int generation,
                             AgentTranscript* transcript_out) {
    TrackResult result;
    result.target_id = target.target_id;
    result.description = target.description;
    result.is_central_subject = target.is_central_subject;
    result.seed_frame = target.keyframe_index;
    result.generation = generation;
    result.transcript_ref = agent_tag(task_id, target.target_id, generation);
    result.masks.assign(clip.size(), BinaryMask(clip.extent.height, clip.extent.width));

    AgentTranscript transcript;
    transcript.transcript_id = result.transcript_ref;
    try {
        transcript = agent_ground(clip.frame(static_cast<std::size_t>(target.keyframe_index)), target.description,
                                  *services.planner, *services.segmenter, options, result.transcript_ref,
                                  result.transcript_ref);
        result.outcome = transcript.outcome;
        if (transcript.outcome != AgentOutcome::Absent && transcript.mask && !empty(*transcript.mask)) {
            result.masks = propagate_bidirectional(clip, target.keyframe_index, *transcript.mask, *services.tracker);
        }
    } catch (const Error& e) {
        result.masks.assign(clip.size(), BinaryMask(clip.extent.height, clip.extent.width));
        result.failed = true;
        result.error = e.what();
    }
    if (transcript_out) *transcript_out = std::move(transcript);
    return result;
}

std::vector<BinaryMask> merge_subjects(const std::vector<TrackResult>& results, const VideoClip& clip) {
    std::vector<BinaryMask> merged(clip.size(), BinaryMask(clip.extent.height, clip.extent.width));
    for (const auto& r : results) {
        if (!r.is_central_subject) continue;
        for (std::size_t t = 0; t < merged.size(); ++t) merged[t] = mask_union(merged[t], r.masks[t]);
    }
    return merged;
}

Stage2Output run_stage2(const VideoClip& clip, const std::vector<GroundingTarget>& targets, const Services& services,
                        const AgentOptions& options, std::string_view task_id) {
    Stage2Output out;
    for (const auto& target : targets) {
        AgentTranscript transcript;
        out.results.push_back(ground_and_track(clip, target, services, options, task_id, 0, &transcript));
        out.transcripts.push_back(std::move(transcript));
    }
    out.merged = merge_subjects(out.results, clip);
    return out;
}

} // namespace rvos
