#include "rvos/stage3.hpp"

#include "rvos/error.hpp"
#include "rvos/prompting.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <map>

namespace rvos {

using nlohmann::json;

namespace {

constexpr std::string_view kClassifyInstructions =
    "Decide whether a referring expression about a video constrains behaviour in a way that is easy to get "
    "wrong from a single frame: a direction of motion or a negation. "
    "Reply with one JSON object, schema needs-verification-v1: {\"needs_verification\": true|false}.";

constexpr std::string_view kVerifyInstructions =
    "You check the output of a video segmentation engine. Each frame below has the predicted object outlined. "
    "Judge whether the outlined object, over these frames, does what the expression says. "
    "Reply with one JSON object, schema verdict-v1: {\"consistent\": true|false, \"reason\": string}. "
    "The reason must say what is wrong when consistent is false.";

constexpr std::string_view kRegenInstructions =
    "A segmentation agent grounded an object from a text description, and a check found the result unreliable. "
    "Write a new description of the same intended object that separates it from everything else in the frame: "
    "mention appearance, position and relations to nearby objects. "
    "Reply with one JSON object, schema description-v1: {\"description\": string}. "
    "The new description must differ from the previous one.";

constexpr std::array<std::string_view, 3> kNegations{"not", "without", "except"};
constexpr std::array<std::string_view, 8> kDirections{"left",      "right",            "toward",  "away",
                                                      "clockwise", "counterclockwise", "forward", "backward"};

std::string trimmed(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string describe(const RefinementFlag& flag, std::string_view self) {
    return std::visit(
        [&](const auto& f) -> std::string {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, EmptyPrediction>) {
                return "EmptyPrediction: the mask was empty on every frame.";
            } else if constexpr (std::is_same_v<T, HighOverlap>) {
                const auto& other = f.target_a == self ? f.target_b : f.target_a;
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.3f", f.mean_iou);
                return "HighOverlap: the mask overlaps target " + other + " with mean IoU " + buf + ".";
            } else {
                return "BehaviorInconsistent: " + f.reason;
            }
        },
        flag);
}

std::vector<std::string> flagged_targets(const RefinementFlag& flag, const std::vector<TrackResult>& results) {
    return std::visit(
        [&](const auto& f) -> std::vector<std::string> {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, EmptyPrediction>) {
                return {f.target_id};
            } else if constexpr (std::is_same_v<T, HighOverlap>) {
                return {f.target_a, f.target_b};
            } else {
                std::vector<std::string> ids;
                for (const auto& r : results) {
                    if (r.is_central_subject) ids.push_back(r.target_id);
                }
                return ids;
            }
        },
        flag);
}

} // namespace

std::string_view flag_kind(const RefinementFlag& flag) {
    static constexpr std::array<std::string_view, 3> kNames{"EmptyPrediction", "HighOverlap", "BehaviorInconsistent"};
    return kNames[flag.index()];
}

std::string flag_key(const RefinementFlag& flag) {
    std::string key(flag_kind(flag));
    if (const auto* e = std::get_if<EmptyPrediction>(&flag)) key += ":" + e->target_id;
    if (const auto* h = std::get_if<HighOverlap>(&flag)) key += ":" + h->target_a + "," + h->target_b;
    return key;
}

json to_json(const RefinementFlag& flag) {
    json out{{"kind", flag_kind(flag)}};
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, EmptyPrediction>) {
                out["target_id"] = f.target_id;
            } else if constexpr (std::is_same_v<T, HighOverlap>) {
                out["target_a"] = f.target_a;
                out["target_b"] = f.target_b;
                out["mean_iou"] = f.mean_iou;
            } else {
                out["reason"] = f.reason;
            }
        },
        flag);
    return out;
}

std::vector<RefinementFlag> structural_check(const std::vector<TrackResult>& results, double overlap_threshold) {
    std::vector<RefinementFlag> flags;
    for (const auto& r : results) {
        if (r.failed || r.outcome == AgentOutcome::Absent) continue;
        if (r.all_empty()) flags.push_back(EmptyPrediction{r.target_id});
    }
    for (std::size_t i = 0; i < results.size(); ++i) {
        for (std::size_t j = i + 1; j < results.size(); ++j) {
            const auto& a = results[i];
            const auto& b = results[j];
            if (a.target_id == b.target_id) continue;
            if (a.masks.size() != b.masks.size()) {
                throw Error(ErrorCode::LengthMismatch, "targets " + a.target_id + " and " + b.target_id +
                                                           " cover different frame counts");
            }
            double sum = 0;
            std::size_t shared = 0;
            for (std::size_t t = 0; t < a.masks.size(); ++t) {
                if (empty(a.masks[t]) || empty(b.masks[t])) continue;
                sum += iou(a.masks[t], b.masks[t]);
                ++shared;
            }
            if (shared == 0) continue;
            const double mean = sum / static_cast<double>(shared);
            if (mean > overlap_threshold) {
                const bool ordered = a.target_id < b.target_id;
                flags.push_back(HighOverlap{ordered ? a.target_id : b.target_id, ordered ? b.target_id : a.target_id,
                                            mean});
            }
        }
    }
    return flags;
}

bool keyword_needs_verification(std::string_view expression) {
    std::string word;
    auto hit = [&] {
        const bool found = std::find(kNegations.begin(), kNegations.end(), word) != kNegations.end() ||
                           std::find(kDirections.begin(), kDirections.end(), word) != kDirections.end();
        word.clear();
        return found;
    };
    for (char c : expression) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
            word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        } else if (!word.empty() && hit()) {
            return true;
        }
    }
    return !word.empty() && hit();
}

std::string classify_tag(std::string_view task_id) { return "classify/" + std::string(task_id); }

std::string verify_tag(std::string_view task_id, int pass) {
    return "verify/" + std::string(task_id) + "/p" + std::to_string(pass);
}

std::string regen_tag(std::string_view task_id, std::string_view target_id, int iteration) {
    return "regen/" + std::string(task_id) + "/" + std::string(target_id) + "/i" + std::to_string(iteration);
}

bool needs_behavior_verification(std::string_view expression, ChatBackend& refiner, std::string_view task_id) {
    ChatRequest request;
    request.schema = std::string(schema::kNeedsVerification);
    request.messages.push_back(text_message("system", std::string(kClassifyInstructions)));
    const auto tag = classify_tag(task_id);
    request.messages.push_back(
        text_message("user", tag_line(tag) + "\nExpression: \"" + std::string(expression) + "\""));
    try {
        return ask_structured(refiner, std::move(request), tag).doc["needs_verification"].get<bool>();
    } catch (const Error&) {
        return keyword_needs_verification(expression);
    }
}

ChatRequest build_verification_prompt(const VideoClip& clip, const std::vector<BinaryMask>& merged,
                                      std::string_view expression, int k, std::string_view tag) {
    if (k < 2) throw Error(ErrorCode::InvalidSpec, "verification needs k >= 2");
    if (merged.size() != clip.size()) throw Error(ErrorCode::LengthMismatch, "mask count differs from clip length");

    std::vector<int> occupied;
    for (std::size_t t = 0; t < merged.size(); ++t) {
        if (!empty(merged[t])) occupied.push_back(static_cast<int>(t));
    }
    std::vector<int> frames;
    if (occupied.size() >= static_cast<std::size_t>(k)) {
        for (int i : sample_uniform(occupied.size(), k)) frames.push_back(occupied[static_cast<std::size_t>(i)]);
    } else {
        frames = sample_uniform(clip, k);
    }

    ChatRequest request;
    request.schema = std::string(schema::kVerdict);
    request.messages.push_back(text_message("system", std::string(kVerifyInstructions)));
    ChatMessage user{"user", {}};
    user.parts.emplace_back(TextPart{tag_line(tag) + "\nExpression: \"" + std::string(expression) + "\"\nThe video has " +
                                     std::to_string(clip.size()) + " frames."});
    for (int t : frames) {
        const auto i = static_cast<std::size_t>(t);
        user.parts.emplace_back(TextPart{"Frame " + std::to_string(t) + ":"});
        user.parts.emplace_back(image_part(overlay_boundary(clip.frame(i), merged[i], OverlayStyle{})));
    }
    request.messages.push_back(std::move(user));
    return request;
}

Verdict verify_behavior(const VideoClip& clip, const std::vector<BinaryMask>& merged, std::string_view expression,
                        ChatBackend& refiner, int k, std::string_view tag) {
    auto request = build_verification_prompt(clip, merged, expression, k, tag);
    if (std::all_of(merged.begin(), merged.end(), [](const BinaryMask& m) { return empty(m); })) {
        return {true, "nothing to verify"};
    }
    try {
        const auto reply = ask_structured(refiner, std::move(request), tag);
        return {reply.doc["consistent"].get<bool>(), reply.doc["reason"].get<std::string>()};
    } catch (const Error&) {
        return {true, "verifier unavailable"};
    }
}

Regeneration regenerate_description(const VideoClip& clip, const ExpressionTask& task, const TrackResult& target,
                                    const AgentTranscript& prior_transcript, const std::vector<RefinementFlag>& flags,
                                    ChatBackend& refiner, std::string_view tag) {
    ChatRequest request;
    request.schema = std::string(schema::kDescription);
    request.messages.push_back(text_message("system", std::string(kRegenInstructions)));

    std::string text = tag_line(tag) + "\nExpression: \"" + task.expression + "\"\nPrevious description: \"" +
                       target.description + "\"\nKeyframe: " + std::to_string(target.seed_frame) + "\nProblems:";
    for (const auto& f : flags) text += "\n- " + describe(f, target.target_id);
    if (!prior_transcript.rounds.empty()) {
        text += "\nAgent rounds (outcome " + std::string(to_string(prior_transcript.outcome)) + "):";
        for (std::size_t i = 0; i < prior_transcript.rounds.size(); ++i) {
            const auto& r = prior_transcript.rounds[i];
            text += "\n" + std::to_string(i + 1) + ". " + to_json(r.action).dump() + " -> " + r.result_summary;
        }
    }
    text += "\nThe keyframe with the current mask outlined:";
    ChatMessage user{"user", {TextPart{text}}};
    const auto seed = static_cast<std::size_t>(target.seed_frame);
    user.parts.emplace_back(image_part(overlay_boundary(clip.frame(seed), target.masks.at(seed), OverlayStyle{})));
    request.messages.push_back(std::move(user));

    const std::string prior = trimmed(target.description);
    const ReplyCheck differs = [&](const json& doc) -> std::string {
        if (trimmed(doc["description"].get<std::string>()) == prior) return "the description repeats the previous one";
        return {};
    };
    try {
        const auto reply = ask_structured(refiner, std::move(request), tag, differs);
        return {trimmed(reply.doc["description"].get<std::string>()), false, {}};
    } catch (const Error& e) {
        return {target.description, true, e.what()};
    }
}

json to_json(const AuditRecord& record) {
    return {{"iteration", record.iteration},
            {"flag", to_json(record.flag)},
            {"action", record.action},
            {"resolved", record.resolved}};
}

json to_json(const RefinementOutcome& outcome) {
    json audit = json::array();
    for (const auto& r : outcome.audit) audit.push_back(to_json(r));
    json verdicts = json::array();
    for (const auto& v : outcome.verdicts) verdicts.push_back({{"consistent", v.consistent}, {"reason", v.reason}});
    return {{"iterations", outcome.iterations},
            {"verification_needed", outcome.verification_needed},
            {"verdicts", verdicts},
            {"audit", audit},
            {"unrefinable", outcome.unrefinable}};
}

RefinementOutcome run_refinement_loop(const VideoClip& clip, const ExpressionTask& task, const Stage2Output& stage2,
                                      const Services& services, const RefineOptions& options) {
    if (options.max_iterations < 0) throw Error(ErrorCode::InvalidSpec, "max_iterations must be >= 0");
    RefinementOutcome out;
    out.results = stage2.results;
    out.merged = stage2.merged;

    std::map<std::string, AgentTranscript> latest;
    for (std::size_t i = 0; i < stage2.results.size() && i < stage2.transcripts.size(); ++i) {
        latest[stage2.results[i].target_id] = stage2.transcripts[i];
    }
    if (out.results.empty()) return out;

    out.verification_needed = needs_behavior_verification(task.expression, *services.refiner, task.task_id);

    std::vector<std::size_t> open;  // audit rows waiting for the next pass to settle
    for (int pass = 0;; ++pass) {
        auto flags = structural_check(out.results, options.overlap_threshold);
        if (out.verification_needed) {
            auto verdict = verify_behavior(clip, out.merged, task.expression, *services.refiner, options.verify_frames,
                                           verify_tag(task.task_id, pass));
            if (!verdict.consistent) flags.push_back(BehaviorInconsistent{verdict.reason});
            out.verdicts.push_back(std::move(verdict));
        }

        std::set<std::string> raised;
        for (const auto& f : flags) raised.insert(flag_key(f));
        for (auto idx : open) out.audit[idx].resolved = !raised.count(flag_key(out.audit[idx].flag));
        open.clear();
        if (flags.empty()) break;

        if (pass >= options.max_iterations) {
            for (auto& f : flags) out.audit.push_back({pass, std::move(f), "kept: iteration budget exhausted", false});
            break;
        }

        // Per target, every flag that names it, in result order.
        std::map<std::string, std::vector<RefinementFlag>> by_target;
        for (const auto& f : flags) {
            for (const auto& id : flagged_targets(f, out.results)) by_target[id].push_back(f);
        }

        const int iteration = pass + 1;
        std::map<std::string, std::string> action_for;
        bool regrounded = false;
        for (auto& result : out.results) {
            const auto it = by_target.find(result.target_id);
            if (it == by_target.end()) continue;
            const auto& id = result.target_id;
            if (out.unrefinable.count(id)) {
                action_for[id] = "kept " + id + " (unrefinable)";
                continue;
            }
            const auto regen = regenerate_description(clip, task, result, latest[id], it->second, *services.refiner,
                                                      regen_tag(task.task_id, id, iteration));
            if (regen.unrefinable) {
                out.unrefinable.insert(id);
                action_for[id] = "kept " + id + " (unrefinable: " + regen.error + ")";
                continue;
            }
            const GroundingTarget target{id, result.seed_frame, regen.description, result.is_central_subject};
            AgentTranscript transcript;
            result = ground_and_track(clip, target, services, options.agent, task.task_id, result.generation + 1,
                                      &transcript);
            latest[id] = transcript;
            out.transcripts.push_back(std::move(transcript));
            action_for[id] = "regrounded " + id + " as \"" + regen.description + "\"";
            regrounded = true;
        }

        for (auto& f : flags) {
            std::string action;
            for (const auto& id : flagged_targets(f, out.results)) {
                if (!action_for.count(id)) continue;
                if (!action.empty()) action += "; ";
                action += action_for[id];
            }
            if (action.empty()) action = "no target to reground";
            out.audit.push_back({pass, std::move(f), action, false});
            if (regrounded) open.push_back(out.audit.size() - 1);
        }
        if (!regrounded) break;  // nothing changed; another pass would raise the same flags
        out.iterations = iteration;
        out.merged = merge_subjects(out.results, clip);
    }
    return out;
}

} // namespace rvos
