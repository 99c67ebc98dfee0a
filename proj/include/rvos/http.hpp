#pragma once

#include "rvos/protocol.hpp"

#include <chrono>
#include <functional>
#include <memory>
#include <string>
#include <thread>

namespace rvos {

/// Timeout/Transport failures are retried; everything else surfaces immediately.
struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
};

struct HttpOptions {
    std::string base_url;  // http://host:port[/prefix]
    std::chrono::milliseconds timeout{60000};
    RetryPolicy retry;
    std::string bearer_token;  // sent as Authorization when non-empty
};

/// JSON POST with the retry policy and {code, message} error bodies mapped to Error.
class HttpTransport {
public:
    explicit HttpTransport(HttpOptions options);

    nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

    const HttpOptions& options() const { return options_; }

    // Test hook: replaces the sleep between attempts.
    void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

private:
    nlohmann::json post_once(const std::string& path, const std::string& payload) const;

    HttpOptions options_;
    std::string scheme_host_port_;
    std::string prefix_;
    std::function<void(std::chrono::milliseconds)> sleeper_;
};

class HttpChat final : public ChatBackend {
public:
    explicit HttpChat(HttpOptions options) : transport_(std::move(options)) {}
    std::string complete(const ChatRequest& request) override;
    HttpTransport& transport() { return transport_; }

private:
    HttpTransport transport_;
};

class HttpSegmenter final : public SegmenterBackend {
public:
    explicit HttpSegmenter(HttpOptions options) : transport_(std::move(options)) {}
    std::vector<SegmentCandidate> segment(const SegmentRequest& request) override;

private:
    HttpTransport transport_;
};

class HttpTracker final : public TrackerBackend {
public:
    explicit HttpTracker(HttpOptions options) : transport_(std::move(options)) {}
    TrackSession track_init(const ClipRef& clip, int frame_index, const RleMask& seed) override;
    std::vector<FrameMask> track_propagate(const TrackSession& session, Direction direction) override;

private:
    HttpTransport transport_;
};

/// Serves backends over POST /v1/chat, /v1/segment, /v1/track/init and
/// /v1/track/propagate. Roles left null answer 501.
class BackendServer {
public:
    BackendServer(std::shared_ptr<ChatBackend> chat, std::shared_ptr<SegmenterBackend> segmenter,
                  std::shared_ptr<TrackerBackend> tracker);
    ~BackendServer();
    BackendServer(const BackendServer&) = delete;
    BackendServer& operator=(const BackendServer&) = delete;

    /// Binds (port 0 picks a free one), starts serving on a background thread, returns the port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();

    /// Handles one request body without a socket; used by the server and by tests.
    /// Returns the HTTP status and response body.
    std::pair<int, nlohmann::json> handle(const std::string& path, const std::string& body) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    std::shared_ptr<ChatBackend> chat_;
    std::shared_ptr<SegmenterBackend> segmenter_;
    std::shared_ptr<TrackerBackend> tracker_;
};

int http_status_for(ErrorCode code);

} // namespace rvos
