#pragma once

#include "rvos/video.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace rvos {

enum class ShapeKind { Square, Rect, Disc };

struct LinearMotion {
    double vx = 0;  // pixels per frame
    double vy = 0;
};

// Image coordinates (y down): positive angular speed runs clockwise on screen.
struct CircularMotion {
    double cx = 0;
    double cy = 0;
    double radius = 0;
    double degrees_per_frame = 0;
    double phase_degrees = 0;
};

using Motion = std::variant<LinearMotion, CircularMotion>;

struct ShapeSpec {
    std::string name;
    std::vector<std::string> concepts;  // text prompts the oracle segmenter answers to
    ShapeKind kind = ShapeKind::Square;
    int width = 8;   // side for squares, diameter-free extent for rects
    int height = 8;
    int radius = 4;  // discs only
    Rgb color{255, 255, 255};
    double x = 0;  // centre at frame 0 (ignored for circular motion)
    double y = 0;
    Motion motion = LinearMotion{};
};

/// One referring expression over the scene; an empty target list is a no-target task.
struct ExpressionSpec {
    std::string task_id;
    std::string expression;
    std::vector<std::string> targets;
};

struct SyntheticScene {
    std::string clip_id;
    int height = 64;
    int width = 64;
    int frames = 10;
    double fps = 10;
    Rgb background{32, 32, 32};
    int noise = 0;  // uniform per-channel background noise amplitude
    std::vector<ShapeSpec> shapes;
    std::vector<ExpressionSpec> expressions;
};

SyntheticScene parse_scene(const nlohmann::json& doc);
SyntheticScene load_scene(const std::filesystem::path& path);

struct ShapeTruth {
    std::string name;
    std::vector<std::string> concepts;
    std::vector<BinaryMask> masks;  // one per frame; visible pixels only
};

/// Per-clip ground truth as the mock backends see it.
struct ClipTruth {
    std::string clip_id;
    Extent extent;
    std::size_t frame_count = 0;
    std::vector<std::uint64_t> frame_hashes;  // content_hash of each frame
    std::vector<ShapeTruth> shapes;

    const ShapeTruth* find_shape(std::string_view name) const;
};

struct SyntheticClip {
    VideoClip clip;
    ClipTruth truth;
};

/// Deterministic in (scene, seed). Throws ShapeOutOfCanvas if any shape leaves the canvas.
SyntheticClip gen_synthetic(const SyntheticScene& scene, std::uint64_t seed);

/// Union of the named shapes' masks per frame (all-empty for a no-target expression).
std::vector<BinaryMask> expression_truth(const ClipTruth& truth, const ExpressionSpec& expr);

nlohmann::json clip_truth_to_json(const ClipTruth& truth);
ClipTruth clip_truth_from_json(const nlohmann::json& doc);

/// Writes the generator output under `root`:
///   clips/{clip_id}/00000.png ...      frames
///   shapes/{clip_id}.json              per-shape truth (RLE text per frame)
///   gt/{task_id}/00000.png ...         merged truth per positive expression
///   manifest.json                      tasks merged in (same task_id replaced)
void write_synthetic(const std::filesystem::path& root, const SyntheticScene& scene, const SyntheticClip& generated);

/// All shapes/*.json under a generator root, keyed by clip id.
class GroundTruthStore {
public:
    GroundTruthStore() = default;
    explicit GroundTruthStore(std::vector<ClipTruth> clips);
    static GroundTruthStore load(const std::filesystem::path& root);

    const ClipTruth* clip(std::string_view clip_id) const;
    // Clip and frame with the given content; ties resolve to the smallest clip id.
    std::optional<std::pair<const ClipTruth*, std::size_t>> locate(std::uint64_t frame_hash) const;

    std::size_t size() const { return clips_.size(); }

private:
    std::map<std::string, ClipTruth, std::less<>> clips_;
    std::multimap<std::uint64_t, std::pair<std::string, std::size_t>> by_hash_;
};

} // namespace rvos
