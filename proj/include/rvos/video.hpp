#pragma once

#include "rvos/image.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace rvos {

using FramePtr = std::shared_ptr<const RgbImage>;

/// Immutable frame sequence; all frames share one extent.
struct VideoClip {
    std::string clip_id;
    std::vector<FramePtr> frames;
    double fps = 0;  // informational
    Extent extent;
    std::filesystem::path source;  // empty for in-memory clips

    std::size_t size() const { return frames.size(); }
    const RgbImage& frame(std::size_t index) const { return *frames.at(index); }
};

/// Builds a clip from in-memory frames, validating the shared extent.
VideoClip make_clip(std::string clip_id, std::vector<RgbImage> frames, double fps = 0);

/// Loads `*.png` from a directory in lexicographic order. The clip id is the directory name.
VideoClip load_clip(const std::filesystem::path& dir);

/// Writes frames as 00000.png, 00001.png, ...
void write_clip(const std::filesystem::path& dir, const VideoClip& clip);

std::string frame_file_name(std::size_t index, std::string_view extension = ".png");

/// k indices evenly spaced over [0, len-1] by round(i*(len-1)/(k-1)),
/// deduplicated. k >= len returns every index.
std::vector<int> sample_uniform(std::size_t length, int k);
inline std::vector<int> sample_uniform(const VideoClip& clip, int k) { return sample_uniform(clip.size(), k); }

} // namespace rvos
