#include "rvos/video.hpp"

#include "rvos/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace rvos {

namespace fs = std::filesystem;

VideoClip make_clip(std::string clip_id, std::vector<RgbImage> frames, double fps) {
    if (frames.empty()) throw Error(ErrorCode::EmptyClip, "clip '" + clip_id + "' has no frames");
    VideoClip clip;
    clip.clip_id = std::move(clip_id);
    clip.fps = fps;
    clip.extent = frames.front().extent();
    for (auto& f : frames) {
        if (f.extent() != clip.extent) {
            throw Error(ErrorCode::InconsistentDimensions, "clip '" + clip.clip_id + "' mixes frame sizes");
        }
        clip.frames.push_back(std::make_shared<const RgbImage>(std::move(f)));
    }
    return clip;
}

VideoClip load_clip(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::EmptyClip, "not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    if (files.empty()) throw Error(ErrorCode::EmptyClip, "no frames in " + dir.string());

    std::vector<RgbImage> frames;
    frames.reserve(files.size());
    for (const auto& f : files) {
        try {
            frames.push_back(read_png(f));
        } catch (const Error& e) {
            throw Error(ErrorCode::UnreadableFrame, f.string() + ": " + e.detail());
        }
    }
    auto clip = make_clip(dir.filename().string(), std::move(frames));
    clip.source = dir;
    return clip;
}

std::string frame_file_name(std::size_t index, std::string_view extension) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%05zu", index);
    return std::string(buf) + std::string(extension);
}

void write_clip(const fs::path& dir, const VideoClip& clip) {
    fs::create_directories(dir);
    for (std::size_t i = 0; i < clip.size(); ++i) write_png(dir / frame_file_name(i), clip.frame(i));
}

std::vector<int> sample_uniform(std::size_t length, int k) {
    if (k < 1) throw Error(ErrorCode::InvalidSpec, "sample count must be >= 1");
    if (length == 0) return {};
    const auto len = static_cast<int>(length);
    if (k >= len) {
        std::vector<int> all(length);
        for (int i = 0; i < len; ++i) all[static_cast<std::size_t>(i)] = i;
        return all;
    }
    if (k == 1) return {0};
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) {
        const double pos = static_cast<double>(i) * static_cast<double>(len - 1) / static_cast<double>(k - 1);
        const int idx = static_cast<int>(std::lround(pos));
        if (out.empty() || out.back() != idx) out.push_back(idx);
    }
    return out;
}

} // namespace rvos
