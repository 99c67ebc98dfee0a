#include "rvos/protocol.hpp"

#include "rvos/error.hpp"

#include <algorithm>

namespace rvos {

using nlohmann::json;

namespace {

bool is_int(const json& j) { return j.is_number_integer() || j.is_number_unsigned(); }

std::string require_fields(const json& doc, std::initializer_list<std::pair<const char*, json::value_t>> fields) {
    for (const auto& [name, type] : fields) {
        if (!doc.contains(name)) return std::string("missing field '") + name + "'";
        const auto& v = doc[name];
        const bool ok = type == json::value_t::number_integer ? is_int(v)
                        : type == json::value_t::number_float ? v.is_number()
                                                              : v.type() == type;
        if (!ok) return std::string("field '") + name + "' has the wrong type";
    }
    return {};
}

std::string decomposition_problem(const json& doc) {
    if (auto p = require_fields(doc, {{"no_target", json::value_t::boolean},
                                      {"targets", json::value_t::array},
                                      {"rationale", json::value_t::string}});
        !p.empty()) {
        return p;
    }
    for (const auto& t : doc["targets"]) {
        if (!t.is_object()) return "targets[] entries must be objects";
        if (auto p = require_fields(t, {{"keyframe_index", json::value_t::number_integer},
                                        {"description", json::value_t::string},
                                        {"is_central_subject", json::value_t::boolean}});
            !p.empty()) {
            return "targets[]: " + p;
        }
    }
    return {};
}

std::string agent_action_problem(const json& doc) {
    if (auto p = require_fields(doc, {{"action", json::value_t::string}}); !p.empty()) return p;
    const auto action = doc["action"].get<std::string>();
    if (action == "segment_by_text") {
        auto p = require_fields(doc, {{"text", json::value_t::string}});
        if (p.empty() && doc["text"].get<std::string>().empty()) return "segment_by_text needs non-empty text";
        return p;
    }
    if (action == "refine_by_points") {
        if (auto p = require_fields(doc, {{"points", json::value_t::array}}); !p.empty()) return p;
        if (doc["points"].empty()) return "refine_by_points needs at least one point";
        for (const auto& pt : doc["points"]) {
            if (!pt.is_object()) return "points[] entries must be objects";
            if (auto p = require_fields(pt, {{"x", json::value_t::number_float}, {"y", json::value_t::number_float}});
                !p.empty()) {
                return "points[]: " + p;
            }
            if (pt.contains("positive") && !pt["positive"].is_boolean()) return "points[].positive must be a boolean";
        }
        return {};
    }
    if (action == "refine_by_box") {
        if (auto p = require_fields(doc, {{"box", json::value_t::array}}); !p.empty()) return p;
        if (doc["box"].size() != 4) return "box must be [x0, y0, x1, y1]";
        for (const auto& v : doc["box"]) {
            if (!v.is_number()) return "box coordinates must be numbers";
        }
        return {};
    }
    if (action == "select_candidate") return require_fields(doc, {{"index", json::value_t::number_integer}});
    if (action == "accept" || action == "declare_absent") return {};
    return "unknown action '" + action + "'";
}

std::string verdict_problem(const json& doc) {
    if (auto p = require_fields(doc, {{"consistent", json::value_t::boolean}, {"reason", json::value_t::string}});
        !p.empty()) {
        return p;
    }
    if (!doc["consistent"].get<bool>() && doc["reason"].get<std::string>().empty()) {
        return "an inconsistent verdict needs a reason";
    }
    return {};
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

std::string schema_problem(std::string_view schema_name, const json& doc) {
    if (!doc.is_object()) return "reply must be a JSON object";
    if (schema_name == schema::kDecomposition) return decomposition_problem(doc);
    if (schema_name == schema::kAgentAction) return agent_action_problem(doc);
    if (schema_name == schema::kNeedsVerification) {
        return require_fields(doc, {{"needs_verification", json::value_t::boolean}});
    }
    if (schema_name == schema::kVerdict) return verdict_problem(doc);
    if (schema_name == schema::kDescription) {
        auto p = require_fields(doc, {{"description", json::value_t::string}});
        if (p.empty() && trim(doc["description"].get<std::string>()).empty()) return "description must be non-empty";
        return p;
    }
    return "unknown schema '" + std::string(schema_name) + "'";
}

json parse_structured(std::string_view schema_name, std::string_view text) {
    std::string_view body = trim(text);
    if (body.starts_with("```")) {
        const auto nl = body.find('\n');
        body = nl == std::string_view::npos ? std::string_view{} : body.substr(nl + 1);
        if (const auto fence = body.rfind("```"); fence != std::string_view::npos) body = body.substr(0, fence);
        body = trim(body);
    }
    json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) {
        const auto open = body.find('{');
        const auto close = body.rfind('}');
        if (open != std::string_view::npos && close != std::string_view::npos && close > open) {
            doc = json::parse(body.substr(open, close - open + 1), nullptr, false);
        }
    }
    if (doc.is_discarded()) {
        throw SchemaViolation(std::string(schema_name) + ": reply is not JSON", std::string(text));
    }
    if (auto problem = schema_problem(schema_name, doc); !problem.empty()) {
        throw SchemaViolation(std::string(schema_name) + ": " + problem, std::string(text));
    }
    return doc;
}

std::string prompt_tag(const ChatRequest& request) {
    constexpr std::string_view kPrefix = "#tag:";
    for (auto msg = request.messages.rbegin(); msg != request.messages.rend(); ++msg) {
        std::string found;
        for (const auto& part : msg->parts) {
            const auto* text = std::get_if<TextPart>(&part);
            if (!text) continue;
            std::string_view rest = text->text;
            while (!rest.empty()) {
                const auto nl = rest.find('\n');
                const auto line = trim(rest.substr(0, nl));
                if (line.starts_with(kPrefix)) found = std::string(trim(line.substr(kPrefix.size())));
                if (nl == std::string_view::npos) break;
                rest = rest.substr(nl + 1);
            }
        }
        if (!found.empty()) return found;
    }
    return {};
}

ChatMessage text_message(std::string role, std::string text) {
    return ChatMessage{std::move(role), {TextPart{std::move(text)}}};
}

ChatResponse chat(ChatBackend& backend, const ChatRequest& request) {
    if (request.messages.empty()) throw Error(ErrorCode::InvalidSpec, "chat request needs at least one message");
    ChatResponse response{backend.complete(request), std::nullopt};
    if (request.schema) response.parsed = parse_structured(*request.schema, response.text);
    return response;
}

std::vector<SegmentCandidate> segment(SegmenterBackend& backend, const SegmentRequest& request) {
    if (request.max_candidates < 1) throw Error(ErrorCode::InvalidSpec, "max_candidates must be >= 1");
    auto candidates = backend.segment(request);
    for (const auto& c : candidates) {
        if (c.mask.height != request.image.height() || c.mask.width != request.image.width()) {
            throw Error(ErrorCode::ProtocolViolation, "segmenter returned a mask of the wrong size");
        }
        if (!(c.score >= 0.0 && c.score <= 1.0)) {
            throw Error(ErrorCode::ProtocolViolation, "segmenter score outside [0, 1]");
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const SegmentCandidate& a, const SegmentCandidate& b) { return a.score > b.score; });
    if (candidates.size() > static_cast<std::size_t>(request.max_candidates)) {
        candidates.resize(static_cast<std::size_t>(request.max_candidates));
    }
    return candidates;
}

void check_track_init(const ClipRef& clip, int frame_index, const RleMask& seed) {
    if (frame_index < 0 || frame_index >= clip.num_frames) {
        throw Error(ErrorCode::OutOfRange, "seed frame " + std::to_string(frame_index) + " outside clip of " +
                                               std::to_string(clip.num_frames) + " frames");
    }
    if (seed.height != clip.extent.height || seed.width != clip.extent.width) {
        throw Error(ErrorCode::DimensionMismatch, "seed mask does not match clip size");
    }
    if (rle_empty(seed)) throw Error(ErrorCode::EmptySeed, "seed mask is empty");
}

namespace wire {

namespace {

json prompt_json(const SegmentPrompt& prompt) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, TextPrompt>) {
                return {{"type", "text"}, {"text", p.text}};
            } else if constexpr (std::is_same_v<T, PointsPrompt>) {
                json pts = json::array();
                for (const auto& pt : p.points) pts.push_back({{"x", pt.x}, {"y", pt.y}, {"positive", pt.positive}});
                return {{"type", "points"}, {"points", pts}};
            } else {
                return {{"type", "box"}, {"box", {p.x0, p.y0, p.x1, p.y1}}};
            }
        },
        prompt);
}

SegmentPrompt prompt_from_json(const json& j) {
    const auto type = j.at("type").get<std::string>();
    if (type == "text") return TextPrompt{j.at("text").get<std::string>()};
    if (type == "points") {
        PointsPrompt p;
        for (const auto& pt : j.at("points")) {
            p.points.push_back({pt.at("x").get<double>(), pt.at("y").get<double>(), pt.value("positive", true)});
        }
        if (p.points.empty()) throw Error(ErrorCode::InvalidSpec, "points prompt without points");
        return p;
    }
    if (type == "box") {
        const auto& b = j.at("box");
        if (b.size() != 4) throw Error(ErrorCode::InvalidSpec, "box prompt needs 4 coordinates");
        return BoxPrompt{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    }
    throw Error(ErrorCode::InvalidSpec, "unknown prompt type '" + type + "'");
}

} // namespace

json chat_request(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) {
        json content = json::array();
        for (const auto& part : m.parts) {
            if (const auto* t = std::get_if<TextPart>(&part)) {
                content.push_back({{"type", "text"}, {"text", t->text}});
            } else {
                content.push_back({{"type", "image"}, {"png_base64", base64_encode(std::get<ImagePart>(part).png)}});
            }
        }
        messages.push_back({{"role", m.role}, {"content", content}});
    }
    json body{{"messages", messages}, {"temperature", request.temperature}};
    if (request.schema) body["schema"] = *request.schema;
    return body;
}

ChatRequest chat_request(const json& body) {
    ChatRequest request;
    for (const auto& m : body.at("messages")) {
        ChatMessage msg{m.at("role").get<std::string>(), {}};
        for (const auto& c : m.at("content")) {
            const auto type = c.at("type").get<std::string>();
            if (type == "text") {
                msg.parts.emplace_back(TextPart{c.at("text").get<std::string>()});
            } else if (type == "image") {
                msg.parts.emplace_back(ImagePart{base64_decode(c.at("png_base64").get<std::string>())});
            } else {
                throw Error(ErrorCode::InvalidSpec, "unknown content part type '" + type + "'");
            }
        }
        request.messages.push_back(std::move(msg));
    }
    if (body.contains("schema") && !body["schema"].is_null()) request.schema = body["schema"].get<std::string>();
    request.temperature = body.value("temperature", 0.0);
    return request;
}

json chat_response(const ChatResponse& response) {
    json body{{"text", response.text}};
    if (response.parsed) body["parsed"] = *response.parsed;
    return body;
}

ChatResponse chat_response(const json& body) {
    ChatResponse r{body.at("text").get<std::string>(), std::nullopt};
    if (body.contains("parsed") && !body["parsed"].is_null()) r.parsed = body["parsed"];
    return r;
}

json segment_request(const SegmentRequest& request) {
    return {{"image", base64_encode(encode_png(request.image))},
            {"prompt", prompt_json(request.prompt)},
            {"max_candidates", request.max_candidates}};
}

SegmentRequest segment_request(const json& body) {
    SegmentRequest request;
    request.image = decode_png(base64_decode(body.at("image").get<std::string>()));
    request.prompt = prompt_from_json(body.at("prompt"));
    request.max_candidates = body.value("max_candidates", 3);
    return request;
}

json segment_response(const std::vector<SegmentCandidate>& candidates) {
    json list = json::array();
    for (const auto& c : candidates) list.push_back({{"mask", rle_to_text(c.mask)}, {"score", c.score}});
    return {{"candidates", list}};
}

std::vector<SegmentCandidate> segment_response(const json& body) {
    std::vector<SegmentCandidate> out;
    for (const auto& c : body.at("candidates")) {
        out.push_back({rle_from_text(c.at("mask").get<std::string>()), c.at("score").get<double>()});
    }
    return out;
}

json clip_ref(const ClipRef& clip) {
    return {{"clip_id", clip.clip_id},
            {"path", clip.path},
            {"num_frames", clip.num_frames},
            {"height", clip.extent.height},
            {"width", clip.extent.width}};
}

ClipRef clip_ref(const json& body) {
    return {body.at("clip_id").get<std::string>(), body.value("path", std::string{}), body.at("num_frames").get<int>(),
            Extent{body.at("height").get<int>(), body.at("width").get<int>()}};
}

json track_init_request(const ClipRef& clip, int frame_index, const RleMask& seed) {
    return {{"clip", clip_ref(clip)}, {"frame_index", frame_index}, {"seed", rle_to_text(seed)}};
}

json track_init_response(const TrackSession& session) {
    return {{"session_id", session.session_id},
            {"clip", clip_ref(session.clip)},
            {"frame_index", session.seed_frame},
            {"seed", rle_to_text(session.seed)}};
}

TrackSession track_session(const json& body) {
    return {body.at("session_id").get<std::string>(), clip_ref(body.at("clip")), body.at("frame_index").get<int>(),
            rle_from_text(body.at("seed").get<std::string>())};
}

json track_propagate_request(const TrackSession& session, Direction direction) {
    return {{"session_id", session.session_id}, {"direction", direction_name(direction)}};
}

json track_propagate_response(const std::vector<FrameMask>& frames) {
    json list = json::array();
    for (const auto& f : frames) list.push_back({{"frame_index", f.frame_index}, {"mask", rle_to_text(f.mask)}});
    return {{"frames", list}};
}

std::vector<FrameMask> track_propagate_response(const json& body) {
    std::vector<FrameMask> out;
    for (const auto& f : body.at("frames")) {
        out.push_back({f.at("frame_index").get<int>(), rle_from_text(f.at("mask").get<std::string>())});
    }
    return out;
}

std::string_view direction_name(Direction direction) {
    return direction == Direction::Forward ? "forward" : "backward";
}

Direction direction_from_name(std::string_view name) {
    if (name == "forward") return Direction::Forward;
    if (name == "backward") return Direction::Backward;
    throw Error(ErrorCode::InvalidSpec, "direction must be 'forward' or 'backward'");
}

json error_body(ErrorCode code, std::string_view message) {
    return {{"code", to_string(code)}, {"message", message}};
}

} // namespace wire

} // namespace rvos
