#include "rvos/http.hpp"

#include "rvos/error.hpp"

#include <httplib.h>

namespace rvos {

using nlohmann::json;

int http_status_for(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::BadImage:
    case ErrorCode::OutOfRange:
    case ErrorCode::EmptySeed:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::MalformedRle:
        return 400;
    case ErrorCode::UnknownSession:
        return 404;
    case ErrorCode::SessionBusy:
        return 409;
    case ErrorCode::Timeout:
        return 504;
    case ErrorCode::Transport:
        return 502;
    default:
        return 500;
    }
}

HttpTransport::HttpTransport(HttpOptions options) : options_(std::move(options)) {
    const auto& url = options_.base_url;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidSpec, "endpoint URL needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    scheme_host_port_ = url.substr(0, path_start);
    if (path_start != std::string::npos) {
        prefix_ = url.substr(path_start);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
    sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

json HttpTransport::post_once(const std::string& path, const std::string& payload) const {
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!options_.bearer_token.empty()) headers.emplace("Authorization", "Bearer " + options_.bearer_token);

    const std::string url = prefix_ + path;
    auto res = client.Post(url, headers, payload, "application/json");
    if (!res) {
        const auto err = res.error();
        const auto code = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                              ? ErrorCode::Timeout
                              : ErrorCode::Transport;
        throw Error(code, options_.base_url + url + ": " + httplib::to_string(err));
    }
    json body = json::parse(res->body, nullptr, false);
    if (res->status >= 200 && res->status < 300) {
        if (body.is_discarded()) throw Error(ErrorCode::BackendFailure, url + ": response is not JSON");
        return body;
    }
    if (!body.is_discarded() && body.is_object() && body.contains("code")) {
        throw Error(error_code_from_string(body["code"].get<std::string>()),
                    body.value("message", std::string("HTTP ") + std::to_string(res->status)));
    }
    const auto code = (res->status == 502 || res->status == 503) ? ErrorCode::Transport
                      : res->status == 504                        ? ErrorCode::Timeout
                                                                  : ErrorCode::BackendFailure;
    throw Error(code, url + ": HTTP " + std::to_string(res->status));
}

json HttpTransport::post(const std::string& path, const json& body) const {
    const std::string payload = body.dump();
    auto backoff = options_.retry.initial_backoff;
    for (int attempt = 1;; ++attempt) {
        try {
            return post_once(path, payload);
        } catch (const Error& e) {
            if (!is_transient(e.code()) || attempt >= options_.retry.attempts) throw;
        }
        sleeper_(backoff);
        backoff = std::chrono::milliseconds(
            static_cast<std::chrono::milliseconds::rep>(static_cast<double>(backoff.count()) * options_.retry.multiplier));
    }
}

std::string HttpChat::complete(const ChatRequest& request) {
    const auto body = transport_.post("/v1/chat", wire::chat_request(request));
    try {
        return wire::chat_response(body).text;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendFailure, std::string("/v1/chat response: ") + e.what());
    }
}

std::vector<SegmentCandidate> HttpSegmenter::segment(const SegmentRequest& request) {
    const auto body = transport_.post("/v1/segment", wire::segment_request(request));
    try {
        return wire::segment_response(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendFailure, std::string("/v1/segment response: ") + e.what());
    }
}

TrackSession HttpTracker::track_init(const ClipRef& clip, int frame_index, const RleMask& seed) {
    const auto body = transport_.post("/v1/track/init", wire::track_init_request(clip, frame_index, seed));
    try {
        return wire::track_session(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendFailure, std::string("/v1/track/init response: ") + e.what());
    }
}

std::vector<FrameMask> HttpTracker::track_propagate(const TrackSession& session, Direction direction) {
    const auto body = transport_.post("/v1/track/propagate", wire::track_propagate_request(session, direction));
    try {
        return wire::track_propagate_response(body);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendFailure, std::string("/v1/track/propagate response: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

struct BackendServer::Impl {
    httplib::Server server;
    std::thread thread;
};

BackendServer::BackendServer(std::shared_ptr<ChatBackend> chat, std::shared_ptr<SegmenterBackend> segmenter,
                             std::shared_ptr<TrackerBackend> tracker)
    : impl_(std::make_unique<Impl>()), chat_(std::move(chat)), segmenter_(std::move(segmenter)),
      tracker_(std::move(tracker)) {
    for (const char* path : {"/v1/chat", "/v1/segment", "/v1/track/init", "/v1/track/propagate"}) {
        impl_->server.Post(path, [this, path](const httplib::Request& req, httplib::Response& res) {
            auto [status, body] = handle(path, req.body);
            res.status = status;
            res.set_content(body.dump(), "application/json");
        });
    }
}

BackendServer::~BackendServer() { stop(); }

std::pair<int, json> BackendServer::handle(const std::string& path, const std::string& body) const {
    auto unavailable = [&](const char* role) {
        return std::pair{501, wire::error_body(ErrorCode::BackendFailure, std::string("no ") + role + " configured")};
    };
    try {
        const json request = json::parse(body);
        if (path == "/v1/chat") {
            if (!chat_) return unavailable("chat backend");
            const ChatRequest req = wire::chat_request(request);
            ChatResponse response{chat_->complete(req), std::nullopt};
            if (req.schema) {
                try {
                    response.parsed = parse_structured(*req.schema, response.text);
                } catch (const SchemaViolation&) {
                    // The client validates and decides on a repair round.
                }
            }
            return {200, wire::chat_response(response)};
        }
        if (path == "/v1/segment") {
            if (!segmenter_) return unavailable("segmenter");
            return {200, wire::segment_response(segment(*segmenter_, wire::segment_request(request)))};
        }
        if (path == "/v1/track/init") {
            if (!tracker_) return unavailable("tracker");
            const auto session = tracker_->track_init(wire::clip_ref(request.at("clip")), request.at("frame_index").get<int>(),
                                                      rle_from_text(request.at("seed").get<std::string>()));
            return {200, wire::track_init_response(session)};
        }
        if (path == "/v1/track/propagate") {
            if (!tracker_) return unavailable("tracker");
            TrackSession session;
            session.session_id = request.at("session_id").get<std::string>();
            const auto dir = wire::direction_from_name(request.at("direction").get<std::string>());
            return {200, wire::track_propagate_response(tracker_->track_propagate(session, dir))};
        }
        return {404, wire::error_body(ErrorCode::InvalidSpec, "unknown endpoint " + path)};
    } catch (const Error& e) {
        return {http_status_for(e.code()), wire::error_body(e.code(), e.detail())};
    } catch (const json::exception& e) {
        return {400, wire::error_body(ErrorCode::InvalidSpec, e.what())};
    }
}

int BackendServer::start(const std::string& host, int port) {
    int bound = port;
    if (port == 0) {
        bound = impl_->server.bind_to_any_port(host);
    } else if (!impl_->server.bind_to_port(host, port)) {
        bound = -1;
    }
    if (bound < 0) throw Error(ErrorCode::Transport, "cannot bind " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return bound;
}

void BackendServer::listen(const std::string& host, int port) {
    if (!impl_->server.listen(host, port)) {
        throw Error(ErrorCode::Transport, "cannot listen on " + host + ":" + std::to_string(port));
    }
}

void BackendServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace rvos
