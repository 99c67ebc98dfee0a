#include "rvos/dataset.hpp"

#include "rvos/error.hpp"
#include "rvos/image.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>

namespace rvos {

namespace fs = std::filesystem;
using nlohmann::json;

Manifest load_manifest(const fs::path& path) {
    Manifest manifest;
    manifest.base_dir = path.parent_path();
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        throw Error(ErrorCode::ManifestParse, e.detail());
    }
    try {
        const json doc = json::parse(text);
        for (const auto& t : doc.at("tasks")) {
            ExpressionTask task;
            task.task_id = t.at("task_id").get<std::string>();
            task.clip_id = t.at("clip_id").get<std::string>();
            task.expression = t.at("expression").get<std::string>();
            task.no_target = t.value("no_target", false);
            if (t.contains("gt_dir") && !t["gt_dir"].is_null()) {
                fs::path gt = t["gt_dir"].get<std::string>();
                task.gt_dir = gt.is_absolute() ? gt : manifest.base_dir / gt;
            }
            if (task.task_id.empty()) throw Error(ErrorCode::ManifestParse, "empty task_id");
            if (task.expression.empty()) throw Error(ErrorCode::ManifestParse, "empty expression in " + task.task_id);
            manifest.tasks.push_back(std::move(task));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ManifestParse, path.string() + ": " + e.what());
    }
    std::vector<std::string> ids;
    for (const auto& t : manifest.tasks) ids.push_back(t.task_id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
        throw Error(ErrorCode::ManifestParse, path.string() + ": duplicate task_id");
    }
    return manifest;
}

void save_manifest(const fs::path& path, const Manifest& manifest) {
    json tasks = json::array();
    const fs::path base = path.parent_path();
    for (const auto& t : manifest.tasks) {
        json entry{{"task_id", t.task_id}, {"clip_id", t.clip_id}, {"expression", t.expression},
                   {"no_target", t.no_target}};
        if (t.gt_dir) {
            const fs::path gt = base.empty() ? *t.gt_dir : t.gt_dir->lexically_relative(base);
            entry["gt_dir"] = (gt.empty() ? *t.gt_dir : gt).generic_string();
        }
        tasks.push_back(std::move(entry));
    }
    write_file(path, json{{"tasks", tasks}}.dump(2) + "\n");
}

std::string prediction_to_json_text(const Prediction& prediction) {
    json frames = json::array();
    for (std::size_t i = 0; i < prediction.frames.size(); ++i) {
        frames.push_back({{"frame_index", i}, {"rle", rle_to_text(prediction.frames[i])}});
    }
    return json{{"task_id", prediction.task_id}, {"frames", frames}}.dump(1) + "\n";
}

Prediction parse_prediction(std::string_view text, const std::string& origin) {
    try {
        const json doc = json::parse(text);
        Prediction pred;
        pred.task_id = doc.at("task_id").get<std::string>();
        std::vector<std::pair<std::size_t, RleMask>> entries;
        for (const auto& f : doc.at("frames")) {
            const auto index = f.at("frame_index").get<std::int64_t>();
            if (index < 0) throw Error(ErrorCode::PredictionParse, origin + ": negative frame_index");
            entries.emplace_back(static_cast<std::size_t>(index), rle_from_text(f.at("rle").get<std::string>()));
        }
        std::size_t count = 0;
        for (const auto& [i, _] : entries) count = std::max(count, i + 1);
        if (entries.empty()) return pred;
        const int h = entries.front().second.height;
        const int w = entries.front().second.width;
        pred.frames.assign(count, rle_empty_mask(h, w));
        std::vector<bool> seen(count, false);
        for (auto& [i, rle] : entries) {
            if (rle.height != h || rle.width != w) {
                throw Error(ErrorCode::PredictionParse, origin + ": frames differ in size");
            }
            if (seen[i]) throw Error(ErrorCode::PredictionParse, origin + ": duplicate frame_index " + std::to_string(i));
            seen[i] = true;
            pred.frames[i] = std::move(rle);
        }
        return pred;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::PredictionParse, origin + ": " + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::PredictionParse) throw;
        throw Error(ErrorCode::PredictionParse, origin + ": " + e.detail());
    }
}

fs::path prediction_path(const fs::path& pred_dir, std::string_view task_id) {
    return pred_dir / (std::string(task_id) + ".json");
}

std::vector<BinaryMask> load_mask_sequence(const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
        }
    }
    if (files.empty()) throw Error(ErrorCode::ManifestParse, "no ground-truth masks in " + dir.string());
    std::sort(files.begin(), files.end());
    std::vector<BinaryMask> masks;
    for (const auto& f : files) masks.push_back(read_mask_png(f));
    for (const auto& m : masks) {
        if (m.extent() != masks.front().extent()) {
            throw Error(ErrorCode::InconsistentDimensions, "ground-truth masks differ in size in " + dir.string());
        }
    }
    return masks;
}

} // namespace rvos
