#include "support.hpp"

#include "rvos/mocks.hpp"

using namespace rvos;
using nlohmann::json;
using testing_support::make_scene;
using testing_support::TempDir;

namespace {

ChatRequest tagged(const std::string& tag) {
    ChatRequest r;
    r.messages.push_back(text_message("user", "#tag: " + tag + "\nhello"));
    return r;
}

const json kTwoShapes = json::parse(R"({
    "clip_id": "two", "height": 48, "width": 48, "frames": 6, "noise": 6,
    "shapes": [
      {"name": "red_square", "kind": "square", "size": 8, "color": [230, 30, 30], "concepts": ["block"],
       "center": [10, 12], "motion": {"type": "linear", "velocity": [3, 1]}},
      {"name": "blue_disc", "kind": "disc", "radius": 5, "color": [30, 30, 230],
       "center": [34, 34], "motion": {"type": "linear", "velocity": [0, -2]}}]})");

} // namespace

TEST(ScriptedChat, ServesQueuesInOrderThenFallsBack) {
    ScriptedChat chat(json::parse(R"({"kind": "scripted-chat",
        "script": {"a/1": ["one", {"k": 2}]},
        "fallback": {"a/*": "wild", "a/1*": "longer", "exact": "e"}})"));
    EXPECT_EQ(chat.complete(tagged("a/1")), "one");
    EXPECT_EQ(chat.remaining("a/1"), 1u);
    EXPECT_EQ(chat.complete(tagged("a/1")), R"({"k":2})");
    EXPECT_EQ(chat.complete(tagged("a/1")), "longer");
    EXPECT_EQ(chat.complete(tagged("a/2")), "wild");
    EXPECT_EQ(chat.complete(tagged("exact")), "e");
    EXPECT_RVOS_ERROR(chat.complete(tagged("exactly")), ErrorCode::FixtureExhausted);
    EXPECT_RVOS_ERROR(chat.complete(tagged("b")), ErrorCode::FixtureExhausted);
    EXPECT_EQ(chat.served(), (std::vector<std::string>{"a/1", "a/1", "a/1", "a/2", "exact"}));
}

TEST(ScriptedChat, InjectedFaultsAndBadFixtures) {
    ScriptedChat chat(json::parse(R"({"kind": "scripted-chat",
        "script": {"t": [{"$error": "Timeout", "message": "slow"}, "ok"]}})"));
    EXPECT_RVOS_ERROR(chat.complete(tagged("t")), ErrorCode::Timeout);
    EXPECT_EQ(chat.complete(tagged("t")), "ok");
    EXPECT_RVOS_ERROR(ScriptedChat(json{{"kind", "other"}}), ErrorCode::InvalidSpec);
    EXPECT_RVOS_ERROR(ScriptedChat(json::parse(R"({"kind": "scripted-chat", "script": {"t": "x"}})")),
                      ErrorCode::InvalidSpec);
    TempDir dir;
    rvos::write_file(dir / "f.json", "{oops");
    EXPECT_RVOS_ERROR(ScriptedChat::from_file(dir / "f.json"), ErrorCode::InvalidSpec);
}

TEST(NormalizeConcept, FoldsCaseSpacingAndArticles) {
    EXPECT_EQ(normalize_concept("The  Red_Square "), "red square");
    EXPECT_EQ(normalize_concept("an apple"), "apple");
    EXPECT_EQ(normalize_concept("another"), "another");
}

TEST(OracleSegmenter, TextPromptsReturnTruth) {
    const auto s = make_scene(kTwoShapes);
    OracleSegmenter seg(s.store, 0.0, 1);
    for (std::size_t t = 0; t < s.out.clip.size(); ++t) {
        const auto got = seg.segment({s.out.clip.frame(t), TextPrompt{"the red square"}, 3});
        ASSERT_EQ(got.size(), 1u);
        EXPECT_DOUBLE_EQ(got[0].score, 1.0);
        EXPECT_EQ(rle_decode(got[0].mask), s.out.truth.shapes[0].masks[t]);
    }
    const auto concept_hit = seg.segment({s.out.clip.frame(0), TextPrompt{"Block"}, 3});
    ASSERT_EQ(concept_hit.size(), 1u);
    EXPECT_TRUE(seg.segment({s.out.clip.frame(0), TextPrompt{"giraffe"}, 3}).empty());
    EXPECT_TRUE(seg.segment({RgbImage(48, 48), TextPrompt{"red square"}, 3}).empty());
}

TEST(OracleSegmenter, PointsAndBoxes) {
    const auto s = make_scene(kTwoShapes);
    OracleSegmenter seg(s.store, 0.0, 1);
    const auto& frame = s.out.clip.frame(2);
    const auto disc = s.out.truth.shapes[1].masks[2];
    const auto c = *centroid(disc);

    const auto pos = seg.segment({frame, PointsPrompt{{{c.x, c.y, true}}}, 3});
    ASSERT_EQ(pos.size(), 1u);
    EXPECT_TRUE(rle_decode(pos[0].mask).at(static_cast<int>(c.y), static_cast<int>(c.x)));
    EXPECT_EQ(rle_decode(pos[0].mask), disc);

    const auto vetoed = seg.segment({frame, PointsPrompt{{{c.x, c.y, true}, {c.x, c.y, false}}}, 3});
    EXPECT_TRUE(vetoed.empty());

    const auto sq = *centroid(s.out.truth.shapes[0].masks[2]);
    const auto half = seg.segment({frame, PointsPrompt{{{sq.x, sq.y, true}, {0.5, 0.5, true}}}, 3});
    ASSERT_EQ(half.size(), 1u);
    EXPECT_DOUBLE_EQ(half[0].score, 0.5);

    const auto boxed = seg.segment({frame, BoxPrompt{c.x - 5, c.y - 5, c.x + 5, c.y + 5}, 3});
    ASSERT_FALSE(boxed.empty());
    EXPECT_EQ(rle_decode(boxed[0].mask), disc);
    const auto both = seg.segment({frame, BoxPrompt{0, 0, 47, 47}, 3});
    ASSERT_EQ(both.size(), 2u);
    EXPECT_GE(both[0].score, both[1].score);
}

TEST(OracleSegmenter, PerturbationIsSeededAndScored) {
    const auto s = make_scene(kTwoShapes);
    OracleSegmenter a(s.store, 0.05, 3), b(s.store, 0.05, 3);
    const SegmentRequest req{s.out.clip.frame(1), TextPrompt{"blue disc"}, 1};
    const auto ra = a.segment(req), rb = b.segment(req);
    ASSERT_EQ(ra.size(), 1u);
    EXPECT_EQ(ra[0].mask, rb[0].mask);
    const auto truth = s.out.truth.shapes[1].masks[1];
    EXPECT_NE(rle_decode(ra[0].mask), truth);
    EXPECT_NEAR(ra[0].score, iou(rle_decode(ra[0].mask), truth), 1e-12);
    EXPECT_RVOS_ERROR(OracleSegmenter(s.store, 1.5, 0), ErrorCode::InvalidSpec);
}

TEST(SyntheticTracker, ExactSeedReplaysTruthBothWays) {
    const auto s = make_scene(kTwoShapes);
    SyntheticTracker tracker(s.store, 0, 1);
    const ClipRef clip{"two", "/unused", 6, {48, 48}};
    const auto& truth = s.out.truth.shapes[0].masks;
    const auto session = tracker.track_init(clip, 2, rle_encode(truth[2]));
    EXPECT_EQ(session.seed_frame, 2);

    const auto fwd = tracker.track_propagate(session, Direction::Forward);
    const auto bwd = tracker.track_propagate(session, Direction::Backward);
    ASSERT_EQ(fwd.size(), 3u);
    ASSERT_EQ(bwd.size(), 2u);
    std::set<int> covered{2};
    for (const auto& f : fwd) {
        EXPECT_EQ(rle_decode(f.mask), truth[f.frame_index]);
        EXPECT_TRUE(covered.insert(f.frame_index).second);
    }
    for (const auto& f : bwd) {
        EXPECT_EQ(rle_decode(f.mask), truth[f.frame_index]);
        EXPECT_TRUE(covered.insert(f.frame_index).second);
    }
    EXPECT_EQ(covered.size(), 6u);
    EXPECT_EQ(bwd.front().frame_index, 0);

    const auto last = tracker.track_init(clip, 5, rle_encode(truth[5]));
    EXPECT_TRUE(tracker.track_propagate(last, Direction::Forward).empty());
}

TEST(SyntheticTracker, InexactSeedFollowsCentroidPath) {
    const auto s = make_scene(kTwoShapes);
    SyntheticTracker tracker(s.store, 0, 1);
    const ClipRef clip{"two", "/unused", 6, {48, 48}};
    const auto& truth = s.out.truth.shapes[0].masks;
    BinaryMask seed = truth[0];
    seed.set(0, 0);  // stray pixel; still overlaps the square best
    const auto session = tracker.track_init(clip, 0, rle_encode(seed));
    const auto fwd = tracker.track_propagate(session, Direction::Forward);
    for (const auto& f : fwd) EXPECT_EQ(rle_decode(f.mask), translate(seed, 3 * f.frame_index, f.frame_index));

    BinaryMask nowhere(48, 48);
    nowhere.set(47, 0);
    const auto still = tracker.track_init(clip, 0, rle_encode(nowhere));
    for (const auto& f : tracker.track_propagate(still, Direction::Forward)) EXPECT_EQ(rle_decode(f.mask), nowhere);
}

TEST(SyntheticTracker, ErrorsAndSessionReuse) {
    const auto s = make_scene(kTwoShapes);
    SyntheticTracker tracker(s.store, 0, 1);
    const ClipRef clip{"two", "/unused", 6, {48, 48}};
    const auto seed = rle_encode(s.out.truth.shapes[1].masks[0]);
    EXPECT_RVOS_ERROR(tracker.track_init(clip, 6, seed), ErrorCode::OutOfRange);
    EXPECT_RVOS_ERROR(tracker.track_init(clip, 0, rle_empty_mask(48, 48)), ErrorCode::EmptySeed);
    TrackSession ghost;
    ghost.session_id = "ghost";
    EXPECT_RVOS_ERROR(tracker.track_propagate(ghost, Direction::Forward), ErrorCode::UnknownSession);

    const auto session = tracker.track_init(clip, 0, seed);
    const auto first = tracker.track_propagate(session, Direction::Forward);
    EXPECT_EQ(tracker.track_propagate(session, Direction::Forward).size(), first.size());
    EXPECT_EQ(tracker.session_count(), 1u);
}

TEST(SyntheticTracker, JitterKeepsLargeShapesAboveIou08) {
    const auto s = make_scene(json::parse(R"({
        "clip_id": "big", "height": 96, "width": 96, "frames": 16,
        "shapes": [{"name": "slab", "kind": "square", "size": 32, "color": [200, 200, 0],
                    "center": [30, 40], "motion": {"type": "linear", "velocity": [2, 0]}}]})"));
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SyntheticTracker tracker(s.store, 1, seed);
        const auto& truth = s.out.truth.shapes[0].masks;
        const auto session = tracker.track_init({"big", "", 16, {96, 96}}, 0, rle_encode(truth[0]));
        for (const auto& f : tracker.track_propagate(session, Direction::Forward)) {
            EXPECT_GE(iou(rle_decode(f.mask), truth[f.frame_index]), 0.8) << f.frame_index;
        }
    }
}

TEST(MockFactories, ResolveTruthRootRelativeToFixture) {
    TempDir dir;
    const auto s = make_scene(kTwoShapes);
    write_synthetic(dir / "suite", s.spec, s.out);
    testing_support::write_json(dir / "suite/fx/seg.json",
                                {{"kind", "oracle-segmenter"}, {"truth_root", ".."}, {"perturbation_rate", 0}});
    testing_support::write_json(dir / "suite/fx/chat.json", {{"kind", "scripted-chat"}});
    const ServiceOptions opts;
    auto seg = make_segmenter("mock:" + (dir / "suite/fx/seg.json").string(), opts);
    EXPECT_EQ(seg->segment({s.out.clip.frame(0), TextPrompt{"blue disc"}, 1}).size(), 1u);
    EXPECT_NO_THROW(make_chat("mock:" + (dir / "suite/fx/chat.json").string(), opts));
    EXPECT_RVOS_ERROR(make_chat("", opts), ErrorCode::InvalidSpec);
    EXPECT_RVOS_ERROR(make_tracker("ftp://x", opts), ErrorCode::InvalidSpec);
    EXPECT_RVOS_ERROR(make_segmenter("mock:" + (dir / "suite/fx/chat.json").string(), opts), ErrorCode::InvalidSpec);
}

TEST(Endpoints, EnvironmentOverridesBase) {
    ::setenv("RVOS_TRACKER_URL", "http://tracker:9", 1);
    ::unsetenv("RVOS_PLANNER_URL");
    const auto e = endpoints_from_env({"p", "r", "s", "t"});
    EXPECT_EQ(e.planner, "p");
    EXPECT_EQ(e.tracker, "http://tracker:9");
    ::unsetenv("RVOS_TRACKER_URL");
}
