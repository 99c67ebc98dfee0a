#pragma once

#include "rvos/error.hpp"
#include "rvos/image.hpp"
#include "rvos/mask.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rvos {

// ---------------------------------------------------------------------------
// Chat
// ---------------------------------------------------------------------------

struct TextPart {
    std::string text;
};

/// Image payload carried as PNG bytes (base64 on the wire).
struct ImagePart {
    std::string png;
};

using ChatPart = std::variant<TextPart, ImagePart>;

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::vector<ChatPart> parts;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::optional<std::string> schema;
    double temperature = 0.0;
};

struct ChatResponse {
    std::string text;
    std::optional<nlohmann::json> parsed;
};

// Structured-reply schema names.
namespace schema {
inline constexpr std::string_view kDecomposition = "decomposition-v1";
inline constexpr std::string_view kAgentAction = "agent-action-v1";
inline constexpr std::string_view kNeedsVerification = "needs-verification-v1";
inline constexpr std::string_view kVerdict = "verdict-v1";
inline constexpr std::string_view kDescription = "description-v1";
} // namespace schema

/// Empty string when `doc` satisfies the named schema, otherwise the first problem found.
std::string schema_problem(std::string_view schema_name, const nlohmann::json& doc);

/// Pulls a JSON document out of model text (tolerates code fences and prose
/// around the object) and validates it. Throws SchemaViolation.
nlohmann::json parse_structured(std::string_view schema_name, std::string_view text);

/// The `#tag:` line the engine embeds in every prompt; empty when absent.
/// Scans messages from the last one backwards and returns the last tag line found.
std::string prompt_tag(const ChatRequest& request);

ChatMessage text_message(std::string role, std::string text);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    /// Raw model text for the request.
    virtual std::string complete(const ChatRequest& request) = 0;
};

/// Sends `request` and, when a schema is named, parses and validates the reply.
ChatResponse chat(ChatBackend& backend, const ChatRequest& request);

// ---------------------------------------------------------------------------
// Segmenter
// ---------------------------------------------------------------------------

struct TextPrompt {
    std::string text;
};

struct PointPrompt {
    double x = 0;
    double y = 0;
    bool positive = true;
};

struct PointsPrompt {
    std::vector<PointPrompt> points;
};

struct BoxPrompt {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

using SegmentPrompt = std::variant<TextPrompt, PointsPrompt, BoxPrompt>;

struct SegmentRequest {
    RgbImage image;
    SegmentPrompt prompt;
    int max_candidates = 3;
};

struct SegmentCandidate {
    RleMask mask;
    double score = 0;
};

class SegmenterBackend {
public:
    virtual ~SegmenterBackend() = default;
    virtual std::vector<SegmentCandidate> segment(const SegmentRequest& request) = 0;
};

/// Calls the backend and enforces the candidate contract (sorted, bounded, sized).
std::vector<SegmentCandidate> segment(SegmenterBackend& backend, const SegmentRequest& request);

// ---------------------------------------------------------------------------
// Tracker
// ---------------------------------------------------------------------------

/// How a tracker finds a clip: by id, plus a frame directory on a shared filesystem.
struct ClipRef {
    std::string clip_id;
    std::string path;
    int num_frames = 0;
    Extent extent;
};

struct TrackSession {
    std::string session_id;
    ClipRef clip;
    int seed_frame = 0;
    RleMask seed;
};

enum class Direction { Forward, Backward };

struct FrameMask {
    int frame_index = 0;
    RleMask mask;
};

class TrackerBackend {
public:
    virtual ~TrackerBackend() = default;
    virtual TrackSession track_init(const ClipRef& clip, int frame_index, const RleMask& seed) = 0;
    virtual std::vector<FrameMask> track_propagate(const TrackSession& session, Direction direction) = 0;
};

/// Argument checks shared by every tracker implementation (OutOfRange, EmptySeed, DimensionMismatch).
void check_track_init(const ClipRef& clip, int frame_index, const RleMask& seed);

// ---------------------------------------------------------------------------
// Wire format (JSON bodies of /v1/*)
// ---------------------------------------------------------------------------

namespace wire {

nlohmann::json chat_request(const ChatRequest& request);
ChatRequest chat_request(const nlohmann::json& body);
nlohmann::json chat_response(const ChatResponse& response);
ChatResponse chat_response(const nlohmann::json& body);

nlohmann::json segment_request(const SegmentRequest& request);
SegmentRequest segment_request(const nlohmann::json& body);
nlohmann::json segment_response(const std::vector<SegmentCandidate>& candidates);
std::vector<SegmentCandidate> segment_response(const nlohmann::json& body);

nlohmann::json clip_ref(const ClipRef& clip);
ClipRef clip_ref(const nlohmann::json& body);

nlohmann::json track_init_request(const ClipRef& clip, int frame_index, const RleMask& seed);
nlohmann::json track_init_response(const TrackSession& session);
TrackSession track_session(const nlohmann::json& body);

nlohmann::json track_propagate_request(const TrackSession& session, Direction direction);
nlohmann::json track_propagate_response(const std::vector<FrameMask>& frames);
std::vector<FrameMask> track_propagate_response(const nlohmann::json& body);

std::string_view direction_name(Direction direction);
Direction direction_from_name(std::string_view name);

nlohmann::json error_body(ErrorCode code, std::string_view message);

} // namespace wire

} // namespace rvos
