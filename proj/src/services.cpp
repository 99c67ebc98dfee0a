#include "rvos/services.hpp"

#include "rvos/error.hpp"
#include "rvos/mocks.hpp"

#include <cstdlib>
#include <filesystem>
#include <map>
#include <mutex>

namespace rvos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kMockPrefix = "mock:";

struct Fixture {
    json doc;
    fs::path dir;
};

Fixture load_fixture(const std::string& ref, std::string_view expected_kind) {
    const fs::path path = ref.substr(kMockPrefix.size());
    Fixture f;
    try {
        f.doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, path.string() + ": " + e.what());
    }
    f.dir = path.parent_path();
    const auto kind = f.doc.value("kind", std::string{});
    if (kind != expected_kind) {
        throw Error(ErrorCode::InvalidSpec,
                    path.string() + ": fixture kind '" + kind + "', expected '" + std::string(expected_kind) + "'");
    }
    return f;
}

// Segmenter and tracker fixtures usually share one truth root; load it once.
std::shared_ptr<const GroundTruthStore> truth_for(const Fixture& f) {
    static std::mutex mutex;
    static std::map<std::string, std::weak_ptr<const GroundTruthStore>> cache;
    const fs::path root = fs::weakly_canonical(f.dir / f.doc.at("truth_root").get<std::string>());
    std::lock_guard lock(mutex);
    auto& slot = cache[root.string()];
    if (auto existing = slot.lock()) return existing;
    auto store = std::make_shared<const GroundTruthStore>(GroundTruthStore::load(root));
    slot = store;
    return store;
}

HttpOptions http_options(const std::string& ref, const ServiceOptions& options) {
    return HttpOptions{ref, options.timeout, options.retry, options.bearer_token};
}

void require_ref(const std::string& ref) {
    if (ref.empty()) throw Error(ErrorCode::InvalidSpec, "endpoint not configured");
    if (!ref.starts_with(kMockPrefix) && !ref.starts_with("http://") && !ref.starts_with("https://")) {
        throw Error(ErrorCode::InvalidSpec, "endpoint must be http(s)://... or mock:<fixture>, got '" + ref + "'");
    }
}

} // namespace

EndpointConfig endpoints_from_env(EndpointConfig base) {
    auto pick = [](const char* name, std::string& slot) {
        if (const char* v = std::getenv(name); v && *v) slot = v;
    };
    pick("RVOS_PLANNER_URL", base.planner);
    pick("RVOS_REFINER_URL", base.refiner);
    pick("RVOS_SEGMENTER_URL", base.segmenter);
    pick("RVOS_TRACKER_URL", base.tracker);
    return base;
}

std::shared_ptr<ChatBackend> make_chat(const std::string& ref, const ServiceOptions& options) {
    require_ref(ref);
    if (ref.starts_with(kMockPrefix)) return std::make_shared<ScriptedChat>(load_fixture(ref, "scripted-chat").doc);
    return std::make_shared<HttpChat>(http_options(ref, options));
}

std::shared_ptr<SegmenterBackend> make_segmenter(const std::string& ref, const ServiceOptions& options) {
    require_ref(ref);
    if (ref.starts_with(kMockPrefix)) {
        const auto f = load_fixture(ref, "oracle-segmenter");
        return std::make_shared<OracleSegmenter>(truth_for(f), f.doc.value("perturbation_rate", 0.0), options.seed);
    }
    return std::make_shared<HttpSegmenter>(http_options(ref, options));
}

std::shared_ptr<TrackerBackend> make_tracker(const std::string& ref, const ServiceOptions& options) {
    require_ref(ref);
    if (ref.starts_with(kMockPrefix)) {
        const auto f = load_fixture(ref, "synthetic-tracker");
        return std::make_shared<SyntheticTracker>(truth_for(f), f.doc.value("jitter", 0), options.seed);
    }
    return std::make_shared<HttpTracker>(http_options(ref, options));
}

Services make_services(const EndpointConfig& endpoints, const ServiceOptions& options) {
    return Services{make_chat(endpoints.planner, options), make_chat(endpoints.refiner, options),
                    make_segmenter(endpoints.segmenter, options), make_tracker(endpoints.tracker, options)};
}

} // namespace rvos
