#include "rvos/synthetic.hpp"

#include "rvos/dataset.hpp"
#include "rvos/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace rvos {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); }

Rgb color_from_json(const json& j) {
    if (j.is_string()) return parse_color(j.get<std::string>());
    if (j.is_array() && j.size() == 3) {
        auto channel = [&](std::size_t i) {
            const int v = j[i].get<int>();
            if (v < 0 || v > 255) invalid("color channel out of range");
            return static_cast<std::uint8_t>(v);
        };
        return {channel(0), channel(1), channel(2)};
    }
    invalid("color must be a string or [r,g,b]");
}

std::pair<double, double> pair_from_json(const json& j, const char* what) {
    if (!j.is_array() || j.size() != 2) invalid(std::string(what) + " must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

ShapeSpec shape_from_json(const json& j) {
    ShapeSpec s;
    s.name = j.at("name").get<std::string>();
    if (s.name.empty()) invalid("shape name must be non-empty");
    if (j.contains("concepts")) s.concepts = j["concepts"].get<std::vector<std::string>>();
    const auto kind = j.value("kind", std::string("square"));
    if (kind == "square") {
        s.kind = ShapeKind::Square;
        s.width = s.height = j.at("size").get<int>();
    } else if (kind == "rect") {
        s.kind = ShapeKind::Rect;
        auto [w, h] = pair_from_json(j.at("size"), "rect size");
        s.width = static_cast<int>(w);
        s.height = static_cast<int>(h);
    } else if (kind == "disc") {
        s.kind = ShapeKind::Disc;
        s.radius = j.at("radius").get<int>();
        if (s.radius < 0) invalid("disc radius must be >= 0");
    } else {
        invalid("unknown shape kind '" + kind + "'");
    }
    if (s.kind != ShapeKind::Disc && (s.width < 1 || s.height < 1)) invalid("shape size must be >= 1");
    s.color = color_from_json(j.at("color"));

    const json motion = j.value("motion", json{{"type", "linear"}, {"velocity", json::array({0, 0})}});
    const auto type = motion.value("type", std::string("linear"));
    if (type == "linear") {
        auto [x, y] = pair_from_json(j.at("center"), "center");
        s.x = x;
        s.y = y;
        auto [vx, vy] = pair_from_json(motion.value("velocity", json::array({0, 0})), "velocity");
        s.motion = LinearMotion{vx, vy};
    } else if (type == "circular") {
        CircularMotion c;
        std::tie(c.cx, c.cy) = pair_from_json(motion.at("center"), "orbit center");
        c.radius = motion.at("radius").get<double>();
        c.degrees_per_frame = motion.at("degrees_per_frame").get<double>();
        c.phase_degrees = motion.value("phase", 0.0);
        s.motion = c;
    } else {
        invalid("unknown motion type '" + type + "'");
    }
    return s;
}

std::pair<double, double> center_at(const ShapeSpec& s, int t) {
    if (const auto* lin = std::get_if<LinearMotion>(&s.motion)) {
        return {s.x + lin->vx * t, s.y + lin->vy * t};
    }
    const auto& c = std::get<CircularMotion>(s.motion);
    const double theta = (c.phase_degrees + c.degrees_per_frame * t) * std::numbers::pi / 180.0;
    return {c.cx + c.radius * std::cos(theta), c.cy + c.radius * std::sin(theta)};
}

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

// Pixel coverage of one shape at one frame; empty when it would leave the canvas.
struct Footprint {
    int top = 0, left = 0, bottom = 0, right = 0;  // inclusive
};

Footprint footprint(const ShapeSpec& s, double cx, double cy) {
    if (s.kind == ShapeKind::Disc) {
        return {static_cast<int>(std::ceil(cy - s.radius)), static_cast<int>(std::ceil(cx - s.radius)),
                static_cast<int>(std::floor(cy + s.radius)), static_cast<int>(std::floor(cx + s.radius))};
    }
    const int left = round_half_up(cx - s.width / 2.0);
    const int top = round_half_up(cy - s.height / 2.0);
    return {top, left, top + s.height - 1, left + s.width - 1};
}

bool covers(const ShapeSpec& s, double cx, double cy, int row, int col) {
    if (s.kind != ShapeKind::Disc) return true;  // the footprint is the rectangle
    const double dx = col - cx;
    const double dy = row - cy;
    return dx * dx + dy * dy <= static_cast<double>(s.radius) * s.radius;
}

std::uint64_t string_hash(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

SyntheticScene parse_scene(const json& doc) {
    try {
        SyntheticScene scene;
        scene.clip_id = doc.at("clip_id").get<std::string>();
        if (scene.clip_id.empty()) invalid("clip_id must be non-empty");
        scene.height = doc.value("height", 64);
        scene.width = doc.value("width", 64);
        scene.frames = doc.value("frames", 10);
        scene.fps = doc.value("fps", 10.0);
        if (doc.contains("background")) scene.background = color_from_json(doc["background"]);
        scene.noise = doc.value("noise", 0);
        if (scene.height < 1 || scene.width < 1) invalid("canvas must be at least 1x1");
        if (scene.frames < 1) invalid("frames must be >= 1");
        if (scene.noise < 0 || scene.noise > 127) invalid("noise must be in [0, 127]");
        for (const auto& s : doc.value("shapes", json::array())) scene.shapes.push_back(shape_from_json(s));
        for (const auto& e : doc.value("expressions", json::array())) {
            ExpressionSpec expr;
            expr.task_id = e.at("task_id").get<std::string>();
            expr.expression = e.at("expression").get<std::string>();
            expr.targets = e.value("targets", std::vector<std::string>{});
            if (expr.task_id.empty() || expr.expression.empty()) invalid("expression needs task_id and text");
            for (const auto& t : expr.targets) {
                const bool known = std::any_of(scene.shapes.begin(), scene.shapes.end(),
                                               [&](const ShapeSpec& s) { return s.name == t; });
                if (!known) invalid("expression " + expr.task_id + " targets unknown shape '" + t + "'");
            }
            scene.expressions.push_back(std::move(expr));
        }
        std::vector<std::string> names;
        for (const auto& s : scene.shapes) names.push_back(s.name);
        std::sort(names.begin(), names.end());
        if (std::adjacent_find(names.begin(), names.end()) != names.end()) invalid("duplicate shape name");
        return scene;
    } catch (const json::exception& e) {
        invalid(std::string("scene: ") + e.what());
    }
}

SyntheticScene load_scene(const fs::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        invalid(path.string() + ": " + e.what());
    }
    return parse_scene(doc);
}

const ShapeTruth* ClipTruth::find_shape(std::string_view name) const {
    for (const auto& s : shapes) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

SyntheticClip gen_synthetic(const SyntheticScene& scene, std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ string_hash(scene.clip_id));
    const int h = scene.height;
    const int w = scene.width;

    SyntheticClip out;
    out.truth.clip_id = scene.clip_id;
    out.truth.extent = {h, w};
    out.truth.frame_count = static_cast<std::size_t>(scene.frames);
    for (const auto& s : scene.shapes) {
        out.truth.shapes.push_back({s.name, s.concepts, {}});
    }

    std::vector<RgbImage> frames;
    for (int t = 0; t < scene.frames; ++t) {
        RgbImage img(h, w, scene.background);
        if (scene.noise > 0) {
            const auto span = static_cast<std::uint64_t>(2 * scene.noise + 1);
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    auto jitter = [&](std::uint8_t base) {
                        const int v = base + static_cast<int>(rng() % span) - scene.noise;
                        return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
                    };
                    const Rgb bg = scene.background;
                    img.set(r, c, {jitter(bg.r), jitter(bg.g), jitter(bg.b)});
                }
            }
        }
        // Owner index per pixel; later shapes paint over earlier ones.
        std::vector<int> owner(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), -1);
        for (std::size_t k = 0; k < scene.shapes.size(); ++k) {
            const auto& s = scene.shapes[k];
            const auto [cx, cy] = center_at(s, t);
            const auto fp = footprint(s, cx, cy);
            if (fp.top < 0 || fp.left < 0 || fp.bottom >= h || fp.right >= w) {
                throw Error(ErrorCode::ShapeOutOfCanvas,
                            "shape '" + s.name + "' leaves the canvas at frame " + std::to_string(t));
            }
            for (int r = fp.top; r <= fp.bottom; ++r) {
                for (int c = fp.left; c <= fp.right; ++c) {
                    if (!covers(s, cx, cy, r, c)) continue;
                    owner[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)] =
                        static_cast<int>(k);
                    img.set(r, c, s.color);
                }
            }
        }
        for (std::size_t k = 0; k < scene.shapes.size(); ++k) {
            BinaryMask m(h, w);
            for (int r = 0; r < h; ++r) {
                for (int c = 0; c < w; ++c) {
                    if (owner[static_cast<std::size_t>(r) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)] ==
                        static_cast<int>(k)) {
                        m.set(r, c);
                    }
                }
            }
            out.truth.shapes[k].masks.push_back(std::move(m));
        }
        out.truth.frame_hashes.push_back(content_hash(img));
        frames.push_back(std::move(img));
    }
    out.clip = make_clip(scene.clip_id, std::move(frames), scene.fps);
    return out;
}

std::vector<BinaryMask> expression_truth(const ClipTruth& truth, const ExpressionSpec& expr) {
    std::vector<BinaryMask> merged(truth.frame_count, BinaryMask(truth.extent.height, truth.extent.width));
    for (const auto& name : expr.targets) {
        const auto* shape = truth.find_shape(name);
        if (!shape) throw Error(ErrorCode::InvalidSpec, "unknown shape '" + name + "'");
        for (std::size_t t = 0; t < truth.frame_count; ++t) merged[t] = mask_union(merged[t], shape->masks[t]);
    }
    return merged;
}

json clip_truth_to_json(const ClipTruth& truth) {
    json shapes = json::array();
    for (const auto& s : truth.shapes) {
        json masks = json::array();
        for (const auto& m : s.masks) masks.push_back(rle_to_text(rle_encode(m)));
        shapes.push_back({{"name", s.name}, {"concepts", s.concepts}, {"masks", masks}});
    }
    json hashes = json::array();
    for (auto h : truth.frame_hashes) {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
        hashes.push_back(buf);
    }
    return {{"clip_id", truth.clip_id},
            {"height", truth.extent.height},
            {"width", truth.extent.width},
            {"frames", truth.frame_count},
            {"frame_hashes", hashes},
            {"shapes", shapes}};
}

ClipTruth clip_truth_from_json(const json& doc) {
    try {
        ClipTruth truth;
        truth.clip_id = doc.at("clip_id").get<std::string>();
        truth.extent = {doc.at("height").get<int>(), doc.at("width").get<int>()};
        truth.frame_count = doc.at("frames").get<std::size_t>();
        for (const auto& h : doc.at("frame_hashes")) {
            truth.frame_hashes.push_back(std::stoull(h.get<std::string>(), nullptr, 16));
        }
        for (const auto& s : doc.at("shapes")) {
            ShapeTruth shape;
            shape.name = s.at("name").get<std::string>();
            shape.concepts = s.value("concepts", std::vector<std::string>{});
            for (const auto& m : s.at("masks")) shape.masks.push_back(rle_decode(rle_from_text(m.get<std::string>())));
            if (shape.masks.size() != truth.frame_count) invalid("shape '" + shape.name + "' has wrong mask count");
            truth.shapes.push_back(std::move(shape));
        }
        if (truth.frame_hashes.size() != truth.frame_count) invalid("frame hash count mismatch");
        return truth;
    } catch (const json::exception& e) {
        invalid(std::string("clip truth: ") + e.what());
    }
}

void write_synthetic(const fs::path& root, const SyntheticScene& scene, const SyntheticClip& generated) {
    write_clip(root / "clips" / scene.clip_id, generated.clip);
    write_file(root / "shapes" / (scene.clip_id + ".json"), clip_truth_to_json(generated.truth).dump() + "\n");

    const fs::path manifest_path = root / "manifest.json";
    Manifest manifest;
    if (fs::exists(manifest_path)) manifest = load_manifest(manifest_path);
    for (const auto& expr : scene.expressions) {
        ExpressionTask task{expr.task_id, scene.clip_id, expr.expression, expr.targets.empty(), std::nullopt};
        if (!expr.targets.empty()) {
            const fs::path gt = root / "gt" / expr.task_id;
            fs::remove_all(gt);
            const auto masks = expression_truth(generated.truth, expr);
            for (std::size_t t = 0; t < masks.size(); ++t) write_mask_png(gt / frame_file_name(t), masks[t]);
            task.gt_dir = gt;
        }
        std::erase_if(manifest.tasks, [&](const ExpressionTask& e) { return e.task_id == task.task_id; });
        manifest.tasks.push_back(std::move(task));
    }
    std::sort(manifest.tasks.begin(), manifest.tasks.end(),
              [](const ExpressionTask& a, const ExpressionTask& b) { return a.task_id < b.task_id; });
    save_manifest(manifest_path, manifest);
}

GroundTruthStore::GroundTruthStore(std::vector<ClipTruth> clips) {
    for (auto& c : clips) {
        for (std::size_t i = 0; i < c.frame_hashes.size(); ++i) by_hash_.emplace(c.frame_hashes[i], std::pair{c.clip_id, i});
        auto id = c.clip_id;
        clips_.emplace(std::move(id), std::move(c));
    }
}

GroundTruthStore GroundTruthStore::load(const fs::path& root) {
    const fs::path dir = root / "shapes";
    if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "no shapes/ directory under " + root.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<ClipTruth> clips;
    for (const auto& f : files) {
        try {
            clips.push_back(clip_truth_from_json(json::parse(read_file(f))));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidSpec, f.string() + ": " + e.what());
        }
    }
    return GroundTruthStore(std::move(clips));
}

const ClipTruth* GroundTruthStore::clip(std::string_view clip_id) const {
    const auto it = clips_.find(clip_id);
    return it == clips_.end() ? nullptr : &it->second;
}

std::optional<std::pair<const ClipTruth*, std::size_t>> GroundTruthStore::locate(std::uint64_t frame_hash) const {
    auto [lo, hi] = by_hash_.equal_range(frame_hash);
    std::optional<std::pair<std::string, std::size_t>> best;
    for (auto it = lo; it != hi; ++it) {
        if (!best || it->second < *best) best = it->second;
    }
    if (!best) return std::nullopt;
    return std::pair{clip(best->first), best->second};
}

} // namespace rvos
