#pragma once

#include "rvos/http.hpp"
#include "rvos/protocol.hpp"

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

namespace rvos {

/// Endpoint reference per role: an http(s) URL, or `mock:<fixture-path>`.
struct EndpointConfig {
    std::string planner;
    std::string refiner;
    std::string segmenter;
    std::string tracker;
};

/// RVOS_PLANNER_URL, RVOS_REFINER_URL, RVOS_SEGMENTER_URL, RVOS_TRACKER_URL override `base`.
EndpointConfig endpoints_from_env(EndpointConfig base);

struct ServiceOptions {
    std::uint64_t seed = 0;  // feeds every mock's randomness
    RetryPolicy retry;
    std::chrono::milliseconds timeout{60000};
    std::string bearer_token;
};

struct Services {
    std::shared_ptr<ChatBackend> planner;
    std::shared_ptr<ChatBackend> refiner;
    std::shared_ptr<SegmenterBackend> segmenter;
    std::shared_ptr<TrackerBackend> tracker;
};

/// Mock fixture kinds: "scripted-chat", "oracle-segmenter" {truth_root, perturbation_rate},
/// "synthetic-tracker" {truth_root, jitter}. truth_root is relative to the fixture file.
/// Throws InvalidSpec for an empty or malformed reference.
std::shared_ptr<ChatBackend> make_chat(const std::string& ref, const ServiceOptions& options);
std::shared_ptr<SegmenterBackend> make_segmenter(const std::string& ref, const ServiceOptions& options);
std::shared_ptr<TrackerBackend> make_tracker(const std::string& ref, const ServiceOptions& options);

Services make_services(const EndpointConfig& endpoints, const ServiceOptions& options);

} // namespace rvos
