#include "rvos/eval.hpp"

#include "rvos/error.hpp"
#include "rvos/image.hpp"

#include <algorithm>
#include <cstdio>

namespace rvos {

using nlohmann::json;

JfScore task_jf(const std::vector<BinaryMask>& pred, const std::vector<BinaryMask>& gt, std::optional<int> tol) {
    if (pred.size() != gt.size()) {
        throw Error(ErrorCode::LengthMismatch,
                    std::to_string(pred.size()) + " predicted frames vs " + std::to_string(gt.size()) + " ground truth");
    }
    if (pred.empty()) return {};
    double j = 0;
    double f = 0;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (pred[t].extent() != gt[t].extent()) {
            throw Error(ErrorCode::DimensionMismatch, "frame " + std::to_string(t) + " sizes differ");
        }
        const int frame_tol = tol ? *tol : default_boundary_tolerance(gt[t].height(), gt[t].width());
        j += iou(pred[t], gt[t]);
        f += boundary_f(pred[t], gt[t], frame_tol);
    }
    const auto n = static_cast<double>(pred.size());
    JfScore s{j / n, f / n, 0};
    s.jf = (s.j + s.f) / 2;
    return s;
}

namespace {

double share(std::span<const PresenceOutcome> tasks, bool no_target) {
    std::size_t total = 0;
    std::size_t right = 0;
    for (const auto& t : tasks) {
        if (t.gt_no_target != no_target) continue;
        ++total;
        // No-target tasks are right when empty, target tasks when not.
        if (t.pred_all_empty == no_target) ++right;
    }
    return total == 0 ? 1.0 : static_cast<double>(right) / static_cast<double>(total);
}

bool all_empty(const std::vector<BinaryMask>& masks) {
    return std::all_of(masks.begin(), masks.end(), [](const BinaryMask& m) { return empty(m); });
}

} // namespace

double n_accuracy(std::span<const PresenceOutcome> tasks) { return share(tasks, true); }
double t_accuracy(std::span<const PresenceOutcome> tasks) { return share(tasks, false); }
double final_score(double mean_jf, double n_acc, double t_acc) { return (mean_jf + n_acc + t_acc) / 3.0; }

MetricsReport evaluate_dataset(const Manifest& manifest, const std::filesystem::path& pred_dir, std::optional<int> tol) {
    MetricsReport report;
    std::vector<PresenceOutcome> presence;
    double jf_sum = 0;

    for (const auto& task : manifest.tasks) {
        std::vector<BinaryMask> gt;
        if (task.gt_dir) gt = load_mask_sequence(*task.gt_dir);
        if (!task.no_target && !task.gt_dir) {
            throw Error(ErrorCode::ManifestParse, "task " + task.task_id + " has a target but no gt_dir");
        }

        std::vector<BinaryMask> pred;
        const auto path = prediction_path(pred_dir, task.task_id);
        if (std::filesystem::exists(path)) {
            const auto prediction = parse_prediction(read_file(path), path.string());
            for (const auto& rle : prediction.frames) pred.push_back(rle_decode(rle));
        } else {
            report.warnings.push_back("missing prediction for " + task.task_id + ", scored as all-empty");
        }

        if (!task.gt_dir) {
            // No-target task without stored ground truth: empty frames shaped like the prediction.
            for (const auto& p : pred) gt.emplace_back(p.height(), p.width());
        }
        if (pred.size() > gt.size()) {
            throw Error(ErrorCode::LengthMismatch, path.string() + ": " + std::to_string(pred.size()) +
                                                       " frames, ground truth has " + std::to_string(gt.size()));
        }
        // Omitted trailing frames are empty, as are all frames of a missing file.
        while (pred.size() < gt.size()) pred.emplace_back(gt[pred.size()].height(), gt[pred.size()].width());

        const bool gt_empty = all_empty(gt);
        if (task.no_target != gt_empty) {
            throw Error(ErrorCode::ManifestParse, "task " + task.task_id + ": no_target disagrees with its ground truth");
        }

        TaskMetrics m;
        m.task_id = task.task_id;
        m.no_target = task.no_target;
        m.pred_all_empty = all_empty(pred);
        m.frames = pred.size();
        try {
            m.score = task_jf(pred, gt, tol);
        } catch (const Error& e) {
            throw Error(e.code(), path.string() + ": " + e.detail());
        }
        jf_sum += m.score.jf;
        presence.push_back({task.no_target, m.pred_all_empty});
        report.tasks.push_back(std::move(m));
    }

    if (!report.tasks.empty()) report.mean_jf = jf_sum / static_cast<double>(report.tasks.size());
    report.n_acc = n_accuracy(presence);
    report.t_acc = t_accuracy(presence);
    report.final = final_score(report.mean_jf, report.n_acc, report.t_acc);
    return report;
}

json to_json(const MetricsReport& report) {
    json tasks = json::array();
    for (const auto& t : report.tasks) {
        tasks.push_back({{"task_id", t.task_id},
                         {"no_target", t.no_target},
                         {"predicted_empty", t.pred_all_empty},
                         {"frames", t.frames},
                         {"J", t.score.j},
                         {"F", t.score.f},
                         {"JF", t.score.jf}});
    }
    return {{"tasks", tasks},
            {"dataset",
             {{"mean_JF", report.mean_jf}, {"n_acc", report.n_acc}, {"t_acc", report.t_acc}, {"final", report.final}}},
            {"warnings", report.warnings}};
}

std::string format_table(const MetricsReport& report) {
    std::size_t width = 7;
    for (const auto& t : report.tasks) width = std::max(width, t.task_id.size());
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "%-*s  %9s  %6s  %6s  %6s\n", static_cast<int>(width), "task", "no_target", "J",
                  "F", "J&F");
    out += line;
    for (const auto& t : report.tasks) {
        std::snprintf(line, sizeof line, "%-*s  %9s  %6.4f  %6.4f  %6.4f\n", static_cast<int>(width), t.task_id.c_str(),
                      t.no_target ? "yes" : "no", t.score.j, t.score.f, t.score.jf);
        out += line;
    }
    std::snprintf(line, sizeof line, "\nJ&F %.4f  N-acc %.4f  T-acc %.4f  Final %.4f\n", report.mean_jf, report.n_acc,
                  report.t_acc, report.final);
    out += line;
    return out;
}

} // namespace rvos
