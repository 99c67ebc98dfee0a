#include "rvos/mocks.hpp"

#include "rvos/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>

namespace rvos {

using nlohmann::json;

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    // splitmix64 finalizer over the running value
    std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t mix(std::uint64_t h, std::string_view s) {
    for (char c : s) h = mix(h, static_cast<std::uint8_t>(c));
    return mix(h, s.size());
}

BinaryMask perturb(const BinaryMask& mask, double rate, std::uint64_t seed) {
    if (rate <= 0.0) return mask;
    std::mt19937_64 rng(seed);
    const auto threshold = static_cast<std::uint64_t>(rate * 18446744073709551615.0);
    BinaryMask out = mask;
    for (int r = 0; r < mask.height(); ++r) {
        for (int c = 0; c < mask.width(); ++c) {
            if (rng() < threshold) out.set(r, c, !mask.at(r, c));
        }
    }
    return out;
}

BinaryMask box_mask(const BoxPrompt& box, Extent extent) {
    BinaryMask m(extent.height, extent.width);
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(box.x0, box.x1))));
    const int x1 = std::min(extent.width - 1, static_cast<int>(std::floor(std::max(box.x0, box.x1))));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(box.y0, box.y1))));
    const int y1 = std::min(extent.height - 1, static_cast<int>(std::floor(std::max(box.y0, box.y1))));
    for (int r = y0; r <= y1; ++r) {
        for (int c = x0; c <= x1; ++c) m.set(r, c);
    }
    return m;
}

bool mask_contains(const BinaryMask& m, double x, double y) {
    const int col = static_cast<int>(std::floor(x));
    const int row = static_cast<int>(std::floor(y));
    return m.in_bounds(row, col) && m.at(row, col);
}

} // namespace

std::string normalize_concept(std::string_view text) {
    std::string out;
    bool space = false;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c) || ch == '_') {
            space = !out.empty();
            continue;
        }
        if (space) out += ' ';
        space = false;
        out += static_cast<char>(std::tolower(c));
    }
    for (std::string_view article : {"the ", "a ", "an "}) {
        if (out.starts_with(article)) return out.substr(article.size());
    }
    return out;
}

// ---------------------------------------------------------------------------

ScriptedChat::ScriptedChat(const json& fixture) {
    if (fixture.value("kind", std::string{}) != "scripted-chat") {
        throw Error(ErrorCode::InvalidSpec, "chat fixture kind must be 'scripted-chat'");
    }
    const json script = fixture.value("script", json::object());
    const json fallback = fixture.value("fallback", json::object());
    for (const auto& [tag, replies] : script.items()) {
        if (!replies.is_array()) throw Error(ErrorCode::InvalidSpec, "script entry '" + tag + "' must be a list");
        auto& queue = script_[tag];
        for (const auto& r : replies) queue.push_back(r);
    }
    for (const auto& [pattern, reply] : fallback.items()) fallback_[pattern] = reply;
}

std::shared_ptr<ScriptedChat> ScriptedChat::from_file(const std::filesystem::path& path) {
    try {
        return std::make_shared<ScriptedChat>(json::parse(read_file(path)));
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidSpec, path.string() + ": " + e.what());
    }
}

std::string ScriptedChat::render(const json& reply) const {
    if (reply.is_object() && reply.contains("$error")) {
        const auto code = error_code_from_string(reply["$error"].get<std::string>());
        throw Error(code, reply.value("message", std::string("scripted failure")));
    }
    return reply.is_string() ? reply.get<std::string>() : reply.dump();
}

std::string ScriptedChat::complete(const ChatRequest& request) {
    const std::string tag = prompt_tag(request);
    json reply;
    {
        std::lock_guard lock(mutex_);
        if (auto it = script_.find(tag); it != script_.end() && !it->second.empty()) {
            reply = std::move(it->second.front());
            it->second.pop_front();
        } else {
            const std::string* best = nullptr;
            for (const auto& [pattern, _] : fallback_) {
                const bool wildcard = !pattern.empty() && pattern.back() == '*';
                const std::string_view prefix(pattern.data(), pattern.size() - (wildcard ? 1 : 0));
                const bool hit = wildcard ? std::string_view(tag).starts_with(prefix) : tag == pattern;
                if (hit && (!best || pattern.size() > best->size())) best = &pattern;
            }
            if (!best) throw Error(ErrorCode::FixtureExhausted, "no scripted reply left for tag '" + tag + "'");
            reply = fallback_.at(*best);
        }
        served_.push_back(tag);
    }
    return render(reply);
}

std::vector<std::string> ScriptedChat::served() const {
    std::lock_guard lock(mutex_);
    return served_;
}

std::size_t ScriptedChat::remaining(const std::string& tag) const {
    std::lock_guard lock(mutex_);
    const auto it = script_.find(tag);
    return it == script_.end() ? 0 : it->second.size();
}

// ---------------------------------------------------------------------------

OracleSegmenter::OracleSegmenter(std::shared_ptr<const GroundTruthStore> truth, double perturbation_rate,
                                 std::uint64_t seed)
    : truth_(std::move(truth)), perturbation_rate_(perturbation_rate), seed_(seed) {
    if (perturbation_rate < 0.0 || perturbation_rate > 1.0) {
        throw Error(ErrorCode::InvalidSpec, "perturbation_rate must be in [0, 1]");
    }
}

std::vector<SegmentCandidate> OracleSegmenter::segment(const SegmentRequest& request) {
    const std::uint64_t frame_hash = content_hash(request.image);
    const auto located = truth_->locate(frame_hash);
    if (!located) return {};
    const auto& [clip, frame] = *located;

    struct Hit {
        std::size_t shape;
        double score;
    };
    std::vector<Hit> hits;
    std::uint64_t request_seed = mix(mix(seed_, frame_hash), static_cast<std::uint64_t>(request.prompt.index()));

    for (std::size_t k = 0; k < clip->shapes.size(); ++k) {
        const auto& shape = clip->shapes[k];
        const BinaryMask& m = shape.masks[frame];
        if (empty(m)) continue;
        if (const auto* text = std::get_if<TextPrompt>(&request.prompt)) {
            const auto wanted = normalize_concept(text->text);
            bool match = normalize_concept(shape.name) == wanted;
            for (const auto& c : shape.concepts) match = match || normalize_concept(c) == wanted;
            if (match) hits.push_back({k, 1.0});
        } else if (const auto* points = std::get_if<PointsPrompt>(&request.prompt)) {
            std::size_t positives = 0, inside = 0;
            bool vetoed = false;
            for (const auto& p : points->points) {
                const bool in = mask_contains(m, p.x, p.y);
                if (p.positive) {
                    ++positives;
                    inside += in;
                } else {
                    vetoed = vetoed || in;
                }
            }
            if (!vetoed && inside > 0) hits.push_back({k, static_cast<double>(inside) / static_cast<double>(positives)});
        } else {
            const double overlap = iou(m, box_mask(std::get<BoxPrompt>(request.prompt), clip->extent));
            if (overlap > 0.0) hits.push_back({k, overlap});
        }
    }
    if (const auto* text = std::get_if<TextPrompt>(&request.prompt)) request_seed = mix(request_seed, text->text);

    std::stable_sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.score > b.score; });
    std::vector<SegmentCandidate> out;
    for (const auto& hit : hits) {
        if (out.size() >= static_cast<std::size_t>(std::max(1, request.max_candidates))) break;
        const BinaryMask& truth_mask = clip->shapes[hit.shape].masks[frame];
        BinaryMask m = perturb(truth_mask, perturbation_rate_, mix(request_seed, hit.shape));
        const double score = perturbation_rate_ > 0.0 ? hit.score * iou(m, truth_mask) : hit.score;
        out.push_back({rle_encode(m), score});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const SegmentCandidate& a, const SegmentCandidate& b) { return a.score > b.score; });
    return out;
}

// ---------------------------------------------------------------------------

SyntheticTracker::SyntheticTracker(std::shared_ptr<const GroundTruthStore> truth, int jitter, std::uint64_t seed)
    : truth_(std::move(truth)), jitter_(jitter), seed_(seed) {
    if (jitter < 0) throw Error(ErrorCode::InvalidSpec, "jitter must be >= 0");
}

TrackSession SyntheticTracker::track_init(const ClipRef& clip, int frame_index, const RleMask& seed) {
    check_track_init(clip, frame_index, seed);
    auto state = std::make_shared<SessionState>();
    state->session = {"trk-" + std::to_string(next_id_.fetch_add(1)), clip, frame_index, seed};
    state->seed_mask = rle_decode(seed);
    state->clip = truth_ ? truth_->clip(clip.clip_id) : nullptr;
    if (state->clip && (state->clip->extent != clip.extent ||
                        state->clip->frame_count != static_cast<std::size_t>(clip.num_frames))) {
        state->clip = nullptr;  // different clip under the same id; no motion to replay
    }
    if (state->clip) {
        double best = 0.0;
        for (std::size_t k = 0; k < state->clip->shapes.size(); ++k) {
            const auto& truth_mask = state->clip->shapes[k].masks[static_cast<std::size_t>(frame_index)];
            const double overlap = iou(state->seed_mask, truth_mask);
            if (overlap > best) {
                best = overlap;
                state->shape = static_cast<int>(k);
            }
        }
        if (state->shape >= 0) {
            state->exact = state->seed_mask ==
                           state->clip->shapes[static_cast<std::size_t>(state->shape)]
                               .masks[static_cast<std::size_t>(frame_index)];
        }
    }
    std::lock_guard lock(mutex_);
    sessions_[state->session.session_id] = state;
    return state->session;
}

BinaryMask SyntheticTracker::mask_at(const SessionState& state, int frame) const {
    BinaryMask m;
    if (state.shape < 0) {
        m = state.seed_mask;
    } else {
        const auto& masks = state.clip->shapes[static_cast<std::size_t>(state.shape)].masks;
        const auto& target = masks[static_cast<std::size_t>(frame)];
        if (state.exact) {
            m = target;
        } else {
            const auto from = centroid(masks[static_cast<std::size_t>(state.session.seed_frame)]);
            const auto to = centroid(target);
            if (!to) return BinaryMask(state.seed_mask.height(), state.seed_mask.width());  // target lost
            m = translate(state.seed_mask, static_cast<int>(std::lround(to->x - from->x)),
                          static_cast<int>(std::lround(to->y - from->y)));
        }
    }
    if (jitter_ > 0) {
        std::mt19937_64 rng(mix(mix(mix(seed_, state.session.clip.clip_id), static_cast<std::uint64_t>(frame)),
                                static_cast<std::uint64_t>(state.session.seed_frame)));
        const auto span = static_cast<std::uint64_t>(2 * jitter_ + 1);
        const int dx = static_cast<int>(rng() % span) - jitter_;
        const int dy = static_cast<int>(rng() % span) - jitter_;
        m = translate(m, dx, dy);
    }
    return m;
}

std::vector<FrameMask> SyntheticTracker::track_propagate(const TrackSession& session, Direction direction) {
    std::shared_ptr<SessionState> state;
    {
        std::lock_guard lock(mutex_);
        const auto it = sessions_.find(session.session_id);
        if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + session.session_id + "'");
        state = it->second;
        if (state->busy) throw Error(ErrorCode::SessionBusy, "session '" + session.session_id + "' is propagating");
        state->busy = true;
    }
    auto release = [&] {
        std::lock_guard lock(mutex_);
        state->busy = false;
    };
    std::vector<FrameMask> out;
    const int seed_frame = state->session.seed_frame;
    const int n = state->session.clip.num_frames;
    try {
        if (direction == Direction::Forward) {
            for (int t = seed_frame + 1; t < n; ++t) out.push_back({t, rle_encode(mask_at(*state, t))});
        } else {
            for (int t = 0; t < seed_frame; ++t) out.push_back({t, rle_encode(mask_at(*state, t))});
        }
    } catch (...) {
        release();
        throw;
    }
    release();
    return out;
}

std::size_t SyntheticTracker::session_count() const {
    std::lock_guard lock(mutex_);
    return sessions_.size();
}

} // namespace rvos
