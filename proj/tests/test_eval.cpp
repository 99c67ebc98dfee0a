#include "oracles.hpp"
#include "support.hpp"

#include "rvos/eval.hpp"

using namespace rvos;
using nlohmann::json;
using testing_support::TempDir;

namespace {

struct TableRow {
    const char* name;
    double jf, n_acc, t_acc, reported;
};

// Published leaderboard components and their rounded Final.
constexpr TableRow kTable[] = {
    {"HITsz_Dragon", 0.7897, 0.9615, 0.9759, 0.909}, {"goodx", 0.7106, 1.0, 0.9652, 0.892},
    {"tobedone", 0.713, 0.9615, 0.9893, 0.888},      {"yahooo", 0.7038, 0.9615, 0.984, 0.883},
    {"junjie_zheng", 0.6837, 0.8846, 0.9679, 0.845}, {"rookie7777", 0.642, 0.8462, 0.9679, 0.819},
};

PresenceOutcome pos(bool empty_pred) { return {false, empty_pred}; }
PresenceOutcome neg(bool empty_pred) { return {true, empty_pred}; }

/// Small dataset on disk: one positive task with GT, one no-target task.
struct Dataset {
    TempDir dir;
    Manifest manifest;
    std::vector<BinaryMask> gt;

    Dataset() {
        gt = {oracle::rect(6, 6, 1, 1, 2, 2), oracle::rect(6, 6, 2, 2, 2, 2), oracle::rect(6, 6, 3, 3, 2, 2)};
        for (std::size_t t = 0; t < gt.size(); ++t) write_mask_png(dir / ("gt/pos/" + frame_file_name(t)), gt[t]);
        testing_support::write_json(
            dir / "manifest.json",
            {{"tasks",
              {{{"task_id", "pos"}, {"clip_id", "c"}, {"expression", "e"}, {"no_target", false}, {"gt_dir", "gt/pos"}},
               {{"task_id", "neg"}, {"clip_id", "c"}, {"expression", "f"}, {"no_target", true}}}}});
        manifest = load_manifest(dir / "manifest.json");
    }

    void predict(const std::string& task, const std::vector<BinaryMask>& masks) {
        Prediction p{task, {}};
        for (const auto& m : masks) p.frames.push_back(rle_encode(m));
        rvos::write_file(dir / ("pred/" + task + ".json"), prediction_to_json_text(p));
    }
};

} // namespace

TEST(FinalScore, ReproducesPublishedTable) {
    for (const auto& row : kTable) {
        EXPECT_NEAR(final_score(row.jf, row.n_acc, row.t_acc), row.reported, 5e-4) << row.name;
    }
    EXPECT_NEAR(final_score(0.7897, 0.9615, 0.9759), 0.909064, 5e-4);
    EXPECT_DOUBLE_EQ(final_score(1, 1, 1), 1.0);
}

TEST(TaskJf, Examples) {
    const std::vector<BinaryMask> gt{oracle::rect(8, 8, 1, 1, 4, 4), oracle::rect(8, 8, 2, 2, 4, 4)};
    const auto perfect = task_jf(gt, gt);
    EXPECT_DOUBLE_EQ(perfect.j, 1.0);
    EXPECT_DOUBLE_EQ(perfect.f, 1.0);
    EXPECT_DOUBLE_EQ(perfect.jf, 1.0);

    const std::vector<BinaryMask> none(2, BinaryMask(8, 8));
    const auto zero = task_jf(none, gt);
    EXPECT_DOUBLE_EQ(zero.j, 0.0);
    EXPECT_DOUBLE_EQ(zero.f, 0.0);
    EXPECT_DOUBLE_EQ(zero.jf, 0.0);

    // Frame 0 identical, frame 1 a left column against a top row of a 2x2 canvas (IoU 1/3).
    const auto left = oracle::rect(2, 2, 0, 0, 2, 1);
    const auto top = oracle::rect(2, 2, 0, 0, 1, 2);
    const auto mixed = task_jf({left, left}, {left, top});
    EXPECT_DOUBLE_EQ(mixed.j, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(mixed.jf, (mixed.j + mixed.f) / 2);

    const auto empty_set = task_jf({}, {});
    EXPECT_DOUBLE_EQ(empty_set.jf, 1.0);
    EXPECT_RVOS_ERROR(task_jf({left}, {left, top}), ErrorCode::LengthMismatch);
    EXPECT_RVOS_ERROR(task_jf({BinaryMask(3, 2)}, {left}), ErrorCode::DimensionMismatch);
}

TEST(TaskJf, MatchesPerFrameOracle) {
    std::mt19937_64 rng(23);
    std::vector<BinaryMask> pred, gt;
    for (int t = 0; t < 5; ++t) {
        pred.push_back(oracle::random_mask(rng, 9, 9, 0.4));
        gt.push_back(oracle::random_mask(rng, 9, 9, 0.4));
    }
    double j = 0, f = 0;
    for (int t = 0; t < 5; ++t) {
        j += oracle::iou(pred[t], gt[t]);
        f += oracle::boundary_f(pred[t], gt[t], 2);
    }
    const auto s = task_jf(pred, gt, 2);
    EXPECT_NEAR(s.j, j / 5, 1e-12);
    EXPECT_NEAR(s.f, f / 5, 1e-12);
}

TEST(PresenceAccuracy, Examples) {
    EXPECT_DOUBLE_EQ(n_accuracy(std::vector<PresenceOutcome>{neg(true), neg(true), pos(false)}), 1.0);
    EXPECT_DOUBLE_EQ(n_accuracy(std::vector<PresenceOutcome>{neg(true), neg(false)}), 0.5);
    EXPECT_DOUBLE_EQ(n_accuracy(std::vector<PresenceOutcome>{pos(true)}), 1.0);
    EXPECT_DOUBLE_EQ(t_accuracy(std::vector<PresenceOutcome>{pos(false), pos(false), neg(false)}), 1.0);
    EXPECT_DOUBLE_EQ(t_accuracy(std::vector<PresenceOutcome>{pos(false), pos(true), pos(false), pos(false)}), 0.75);
    EXPECT_DOUBLE_EQ(t_accuracy(std::vector<PresenceOutcome>{neg(true)}), 1.0);
    EXPECT_DOUBLE_EQ(t_accuracy({}), 1.0);
}

TEST(EvaluateDataset, PerfectAndEmptyPredictions) {
    Dataset ds;
    ds.predict("pos", ds.gt);
    ds.predict("neg", std::vector<BinaryMask>(3, BinaryMask(6, 6)));
    const auto report = evaluate_dataset(ds.manifest, ds.dir / "pred");
    EXPECT_DOUBLE_EQ(report.final, 1.0);
    EXPECT_TRUE(report.warnings.empty());
    ASSERT_EQ(report.tasks.size(), 2u);

    const auto doc = to_json(report);
    EXPECT_DOUBLE_EQ(doc["dataset"]["final"].get<double>(), 1.0);
    EXPECT_EQ(doc["tasks"].size(), 2u);
    EXPECT_NE(format_table(report).find("pos"), std::string::npos);
}

TEST(EvaluateDataset, OnlyNoTargetTasksPredictedEmptyScoreOne) {
    TempDir dir;
    testing_support::write_json(dir / "m.json", {{"tasks", {{{"task_id", "n1"}, {"clip_id", "c"}, {"expression", "x"},
                                                             {"no_target", true}}}}});
    Prediction p{"n1", {rle_empty_mask(4, 4), rle_empty_mask(4, 4)}};
    rvos::write_file(dir / "pred/n1.json", prediction_to_json_text(p));
    const auto report = evaluate_dataset(load_manifest(dir / "m.json"), dir / "pred");
    EXPECT_DOUBLE_EQ(report.mean_jf, 1.0);
    EXPECT_DOUBLE_EQ(report.final, 1.0);
}

TEST(EvaluateDataset, MissingPredictionWarnsAndScoresEmpty) {
    Dataset ds;
    ds.predict("neg", std::vector<BinaryMask>(3, BinaryMask(6, 6)));
    const auto report = evaluate_dataset(ds.manifest, ds.dir / "pred");
    ASSERT_EQ(report.warnings.size(), 1u);
    EXPECT_NE(report.warnings[0].find("pos"), std::string::npos);
    EXPECT_DOUBLE_EQ(report.t_acc, 0.0);
    EXPECT_DOUBLE_EQ(report.n_acc, 1.0);
    EXPECT_DOUBLE_EQ(report.mean_jf, 0.5);
    EXPECT_DOUBLE_EQ(report.final, 0.5);
}

TEST(EvaluateDataset, FalsePositiveOnNoTargetTask) {
    Dataset ds;
    ds.predict("pos", ds.gt);
    ds.predict("neg", {BinaryMask(6, 6), ds.gt[0], BinaryMask(6, 6)});
    const auto report = evaluate_dataset(ds.manifest, ds.dir / "pred");
    EXPECT_DOUBLE_EQ(report.n_acc, 0.0);
    EXPECT_DOUBLE_EQ(report.t_acc, 1.0);
    EXPECT_LT(report.mean_jf, 1.0);
}

TEST(EvaluateDataset, ShortPredictionsArePaddedLongOnesRejected) {
    Dataset ds;
    ds.predict("pos", {ds.gt[0], ds.gt[1]});
    ds.predict("neg", {BinaryMask(6, 6)});
    const auto report = evaluate_dataset(ds.manifest, ds.dir / "pred");
    EXPECT_NEAR(report.tasks[0].score.j, 2.0 / 3.0, 1e-12);

    ds.predict("pos", {ds.gt[0], ds.gt[1], ds.gt[2], ds.gt[2]});
    EXPECT_RVOS_ERROR(evaluate_dataset(ds.manifest, ds.dir / "pred"), ErrorCode::LengthMismatch);
}

TEST(EvaluateDataset, CorruptPredictionNamesFile) {
    Dataset ds;
    rvos::write_file(ds.dir / "pred/pos.json", R"({"task_id":"pos","frames":[{"frame_index":0,"rle":"6,6:99"}]})");
    try {
        evaluate_dataset(ds.manifest, ds.dir / "pred");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PredictionParse);
        EXPECT_NE(std::string(e.what()).find("pos.json"), std::string::npos);
    }
}
