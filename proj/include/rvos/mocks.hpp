#pragma once

#include "rvos/protocol.hpp"
#include "rvos/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace rvos {

/// Replays fixture replies keyed by the prompt's `#tag:` line.
///
/// Fixture document:
///
///     { "kind": "scripted-chat",
///       "script":   { "<tag>": [reply, reply, ...] },   // consumed in order
///       "fallback": { "<prefix>*": reply } }            // repeated, longest prefix wins
///
/// A reply is a string (returned verbatim), any other JSON value (returned as
/// its compact dump), or `{"$error": "<ErrorCode>"}` to simulate a backend fault.
/// A tag with nothing left raises FixtureExhausted.
class ScriptedChat final : public ChatBackend {
public:
    explicit ScriptedChat(const nlohmann::json& fixture);
    static std::shared_ptr<ScriptedChat> from_file(const std::filesystem::path& path);

    std::string complete(const ChatRequest& request) override;

    /// Tags in the order they were served.
    std::vector<std::string> served() const;
    std::size_t remaining(const std::string& tag) const;

private:
    std::string render(const nlohmann::json& reply) const;

    mutable std::mutex mutex_;
    std::map<std::string, std::deque<nlohmann::json>> script_;
    std::map<std::string, nlohmann::json> fallback_;
    std::vector<std::string> served_;
};

/// Answers segment requests from synthetic ground truth.
///
/// The frame is identified by content hash. Text prompts match a shape's name
/// (underscores read as spaces) or any of its concepts, case-insensitively and
/// ignoring a leading article. Points select the shapes under positive clicks
/// (excluding any shape under a negative click); boxes select shapes
/// overlapping the box. With `perturbation_rate` > 0 each returned mask has
/// that fraction of pixels flipped, seeded per request.
class OracleSegmenter final : public SegmenterBackend {
public:
    OracleSegmenter(std::shared_ptr<const GroundTruthStore> truth, double perturbation_rate, std::uint64_t seed);

    std::vector<SegmentCandidate> segment(const SegmentRequest& request) override;

private:
    std::shared_ptr<const GroundTruthStore> truth_;
    double perturbation_rate_;
    std::uint64_t seed_;
};

/// Replays ground-truth motion. A seed equal to a shape's truth mask yields that
/// shape's truth on every frame; any other seed is translated along the
/// best-overlapping shape's centroid path (or held still when nothing
/// overlaps). `jitter` > 0 adds a seeded shift in [-jitter, jitter]² per frame.
class SyntheticTracker final : public TrackerBackend {
public:
    SyntheticTracker(std::shared_ptr<const GroundTruthStore> truth, int jitter, std::uint64_t seed);

    TrackSession track_init(const ClipRef& clip, int frame_index, const RleMask& seed) override;
    std::vector<FrameMask> track_propagate(const TrackSession& session, Direction direction) override;

    std::size_t session_count() const;

private:
    struct SessionState {
        TrackSession session;
        BinaryMask seed_mask;
        const ClipTruth* clip = nullptr;
        int shape = -1;      // best-overlapping truth shape on the seed frame
        bool exact = false;  // seed equals that shape's truth mask
        bool busy = false;
    };

    BinaryMask mask_at(const SessionState& state, int frame) const;

    std::shared_ptr<const GroundTruthStore> truth_;
    int jitter_;
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<SessionState>> sessions_;
    std::atomic<std::uint64_t> next_id_{1};
};

/// Normalized form used for text-prompt matching.
std::string normalize_concept(std::string_view text);

} // namespace rvos
