#include "oracles.hpp"
#include "support.hpp"

#include "rvos/mocks.hpp"
#include "rvos/stage3.hpp"

using namespace rvos;
using nlohmann::json;
using testing_support::make_scene;

namespace {

using Script = std::map<std::string, std::vector<json>>;
using Fallback = std::map<std::string, json>;

const json kScene = json::parse(R"({
    "clip_id": "s3", "height": 40, "width": 48, "frames": 6, "noise": 4,
    "shapes": [
      {"name": "red_square", "kind": "square", "size": 6, "color": [230, 30, 30],
       "center": [8, 10], "motion": {"type": "linear", "velocity": [3, 0]}},
      {"name": "blue_disc", "kind": "disc", "radius": 4, "color": [30, 30, 230],
       "center": [24, 30], "motion": {"type": "linear", "velocity": [0, -2]}},
      {"name": "green_bar", "kind": "rect", "size": [10, 3], "color": [30, 200, 30], "center": [38, 6]}]})");

json act(const std::string& action, json extra = json::object()) {
    extra["action"] = action;
    return extra;
}
json text(const std::string& t) { return act("segment_by_text", {{"text", t}}); }
json desc(const std::string& d) { return json{{"description", d}}; }

std::shared_ptr<ScriptedChat> scripted(const Script& script, const Fallback& fallback = {}) {
    return std::make_shared<ScriptedChat>(json{{"kind", "scripted-chat"}, {"script", script}, {"fallback", fallback}});
}

TrackResult result(const std::string& id, std::vector<BinaryMask> masks, bool central = true) {
    TrackResult r;
    r.target_id = id;
    r.description = id;
    r.is_central_subject = central;
    r.masks = std::move(masks);
    r.outcome = AgentOutcome::Accepted;
    return r;
}

std::size_t image_count(const ChatRequest& r) {
    std::size_t n = 0;
    for (const auto& m : r.messages)
        for (const auto& p : m.parts) n += std::holds_alternative<ImagePart>(p);
    return n;
}

struct Recording : ChatBackend {
    std::shared_ptr<ChatBackend> inner;
    std::vector<ChatRequest> seen;
    explicit Recording(std::shared_ptr<ChatBackend> c) : inner(std::move(c)) {}
    std::string complete(const ChatRequest& r) override {
        seen.push_back(r);
        return inner->complete(r);
    }
};

struct World {
    testing_support::Scene scene = make_scene(kScene);
    Services services;
    std::shared_ptr<ScriptedChat> planner;
    std::shared_ptr<ScriptedChat> refiner;

    World(const Script& planner_script, const Script& refiner_script, const Fallback& planner_fallback = {},
          const Fallback& refiner_fallback = {{"classify/*", desc_false()}}) {
        planner = scripted(planner_script, planner_fallback);
        refiner = scripted(refiner_script, refiner_fallback);
        services = {planner, refiner, std::make_shared<OracleSegmenter>(scene.store, 0.0, 1),
                    std::make_shared<SyntheticTracker>(scene.store, 0, 1)};
    }
    static json desc_false() { return json{{"needs_verification", false}}; }
    const VideoClip& clip() const { return scene.out.clip; }
    const std::vector<BinaryMask>& truth(int shape) const { return scene.out.truth.shapes[shape].masks; }
    Stage2Output stage2(const std::vector<GroundingTarget>& targets) const {
        return run_stage2(clip(), targets, services, AgentOptions{}, "t");
    }
};

const ExpressionTask kTask{"t", "s3", "the square moving right", false, std::nullopt};

} // namespace

TEST(StructuralCheck, EmptyPredictionOnlyForGroundedTargets) {
    const std::vector<BinaryMask> none(3, BinaryMask(4, 4));
    auto accepted = result("a", none);
    auto absent = result("b", none);
    absent.outcome = AgentOutcome::Absent;
    auto failed = result("c", none);
    failed.failed = true;
    auto exhausted = result("d", none);
    exhausted.outcome = AgentOutcome::BudgetExhausted;
    const auto flags = structural_check({accepted, absent, failed, exhausted}, 0.5);
    ASSERT_EQ(flags.size(), 2u);
    EXPECT_EQ(flag_key(flags[0]), "EmptyPrediction:a");
    EXPECT_EQ(flag_key(flags[1]), "EmptyPrediction:d");
}

TEST(StructuralCheck, OverlapExamples) {
    const auto sq = oracle::rect(4, 20, 0, 0, 2, 5);
    const auto same = structural_check({result("b", {sq, sq}), result("a", {sq, sq})}, 0.5);
    ASSERT_EQ(same.size(), 1u);
    const auto& h = std::get<HighOverlap>(same[0]);
    EXPECT_EQ(h.target_a, "a");
    EXPECT_EQ(h.target_b, "b");
    EXPECT_DOUBLE_EQ(h.mean_iou, 1.0);

    // 13 + 13 pixels sharing 6: IoU 6/20 = 0.3 on every frame.
    const auto a = oracle::rect(4, 20, 0, 0, 1, 13);
    const auto b = oracle::rect(4, 20, 0, 7, 1, 13);
    ASSERT_DOUBLE_EQ(iou(a, b), 0.3);
    EXPECT_TRUE(structural_check({result("a", {a, a, a}), result("b", {b, b, b})}, 0.5).empty());
    EXPECT_EQ(structural_check({result("a", {a, a, a}), result("b", {b, b, b})}, 0.25).size(), 1u);

    // Frames where either is empty do not count toward the mean.
    const BinaryMask e(4, 20);
    EXPECT_EQ(structural_check({result("a", {sq, e, sq}), result("b", {sq, sq, e})}, 0.5).size(), 1u);
    EXPECT_RVOS_ERROR(structural_check({result("a", {sq}), result("b", {sq, sq})}, 0.5), ErrorCode::LengthMismatch);
}

TEST(StructuralCheck, OrderIndependent) {
    std::mt19937_64 rng(17);
    std::vector<TrackResult> rs;
    for (int i = 0; i < 4; ++i) {
        std::vector<BinaryMask> ms;
        for (int t = 0; t < 3; ++t) ms.push_back(oracle::random_mask(rng, 6, 6, i == 3 ? 0.0 : 0.7));
        rs.push_back(result("t" + std::to_string(i), ms));
    }
    auto keys = [](const std::vector<RefinementFlag>& fs) {
        std::set<std::string> out;
        for (const auto& f : fs) out.insert(flag_key(f));
        return out;
    };
    const auto forward = keys(structural_check(rs, 0.3));
    std::reverse(rs.begin(), rs.end());
    EXPECT_EQ(keys(structural_check(rs, 0.3)), forward);
    EXPECT_TRUE(forward.count("EmptyPrediction:t3"));
}

TEST(NeedsVerification, KeywordFallbackAndFixture) {
    EXPECT_TRUE(keyword_needs_verification("the dog not chasing the ball"));
    EXPECT_TRUE(keyword_needs_verification("Car turning LEFT."));
    EXPECT_FALSE(keyword_needs_verification("the red car"));
    EXPECT_FALSE(keyword_needs_verification("the knot"));
    EXPECT_FALSE(keyword_needs_verification("bright lights"));

    auto down = scripted({{"classify/a", {json{{"$error", "Transport"}}}}});
    EXPECT_TRUE(needs_behavior_verification("the dog not chasing the ball", *down, "a"));
    auto garbage = scripted({{"classify/a", {json("hmm"), json("hmm")}}});
    EXPECT_FALSE(needs_behavior_verification("the red car", *garbage, "a"));
    auto forced = scripted({{"classify/a", {json{{"needs_verification", true}}}}});
    EXPECT_TRUE(needs_behavior_verification("the red car", *forced, "a"));
}

TEST(VerificationPrompt, SamplesKFramesWithOverlays) {
    std::vector<RgbImage> frames(100, RgbImage(8, 8));
    const auto clip = make_clip("long", std::move(frames));
    const std::vector<BinaryMask> merged(100, oracle::rect(8, 8, 2, 2, 3, 3));
    const auto req = build_verification_prompt(clip, merged, "x", 8, "verify/t/p0");
    EXPECT_EQ(image_count(req), 8u);
    EXPECT_EQ(req.schema, std::string("verdict-v1"));
    EXPECT_EQ(prompt_tag(req), "verify/t/p0");

    // Samples only frames that carry a mask when enough of them exist.
    std::vector<BinaryMask> sparse(100, BinaryMask(8, 8));
    for (int t = 50; t < 60; ++t) sparse[t] = merged[t];
    const auto sreq = build_verification_prompt(clip, sparse, "x", 4, "v");
    std::vector<std::string> captions;
    for (const auto& p : sreq.messages.back().parts) {
        if (const auto* tp = std::get_if<TextPart>(&p); tp && tp->text.starts_with("Frame ")) captions.push_back(tp->text);
    }
    EXPECT_EQ(captions, (std::vector<std::string>{"Frame 50:", "Frame 53:", "Frame 56:", "Frame 59:"}));
    EXPECT_RVOS_ERROR(build_verification_prompt(clip, merged, "x", 1, "v"), ErrorCode::InvalidSpec);
}

TEST(VerifyBehavior, VerdictsAndFailOpen) {
    World w({}, {{"v", {json{{"consistent", false}, {"reason", "moves left"}}}}});
    const auto& clip = w.clip();
    const auto v = verify_behavior(clip, w.truth(0), "x", *w.refiner, 4, "v");
    EXPECT_FALSE(v.consistent);
    EXPECT_EQ(v.reason, "moves left");

    const std::vector<BinaryMask> none(clip.size(), BinaryMask(40, 48));
    const auto skipped = verify_behavior(clip, none, "x", *w.refiner, 4, "never-asked");
    EXPECT_TRUE(skipped.consistent);
    EXPECT_EQ(skipped.reason, "nothing to verify");

    const auto down = verify_behavior(clip, w.truth(0), "x", *w.refiner, 4, "unscripted");
    EXPECT_TRUE(down.consistent);
    EXPECT_EQ(down.reason, "verifier unavailable");
}

TEST(Regenerate, RefinedEchoedAndBroken) {
    World w({}, {{"r1", {desc("  the small red square on the left ")}},
                 {"r2", {desc("red"), desc(" red ")}},
                 {"r3", {json{{"$error", "Timeout"}}}}});
    auto target = result("target0", w.truth(0));
    target.description = "red";
    const std::vector<RefinementFlag> flags{EmptyPrediction{"target0"}};
    Recording refiner(w.refiner);

    const auto ok = regenerate_description(w.clip(), kTask, target, {}, flags, refiner, "r1");
    EXPECT_FALSE(ok.unrefinable);
    EXPECT_EQ(ok.description, "the small red square on the left");
    ASSERT_EQ(refiner.seen.size(), 1u);
    EXPECT_EQ(image_count(refiner.seen[0]), 1u);
    const auto& prompt = std::get<TextPart>(refiner.seen[0].messages.back().parts[0]).text;
    EXPECT_NE(prompt.find("EmptyPrediction"), std::string::npos);
    EXPECT_NE(prompt.find("Previous description: \"red\""), std::string::npos);

    const auto echo = regenerate_description(w.clip(), kTask, target, {}, flags, refiner, "r2");
    EXPECT_TRUE(echo.unrefinable);
    EXPECT_EQ(echo.description, "red");
    EXPECT_EQ(refiner.seen.size(), 3u);  // one re-ask

    EXPECT_TRUE(regenerate_description(w.clip(), kTask, target, {}, flags, refiner, "r3").unrefinable);
}

TEST(RefinementLoop, FixedPointLeavesStage2Untouched) {
    World w({{agent_tag("t", "target0", 0), {text("red square"), act("accept")}}}, {});
    const auto s2 = w.stage2({{"target0", 0, "red", true}});
    const auto out = run_refinement_loop(w.clip(), kTask, s2, w.services, RefineOptions{});
    EXPECT_EQ(out.iterations, 0);
    EXPECT_TRUE(out.audit.empty());
    EXPECT_EQ(out.merged, s2.merged);
    EXPECT_EQ(out.merged, w.truth(0));
    EXPECT_EQ(w.refiner->served(), (std::vector<std::string>{"classify/t"}));
}

TEST(RefinementLoop, SeededEmptyPredictionIsRegrounded) {
    World w({{agent_tag("t", "target0", 0), std::vector<json>(6, text("zebra"))},
             {agent_tag("t", "target0", 1), {text("red square"), act("accept")}}},
            {{regen_tag("t", "target0", 1), {desc("the red square")}}});
    const auto s2 = w.stage2({{"target0", 2, "a striped animal", true}});
    ASSERT_TRUE(s2.results[0].all_empty());
    const auto out = run_refinement_loop(w.clip(), kTask, s2, w.services, RefineOptions{});
    EXPECT_EQ(out.iterations, 1);
    EXPECT_EQ(out.results[0].generation, 1);
    EXPECT_EQ(out.results[0].description, "the red square");
    EXPECT_EQ(out.merged, w.truth(0));
    ASSERT_EQ(out.audit.size(), 1u);
    EXPECT_TRUE(out.audit[0].resolved);
    EXPECT_EQ(flag_kind(out.audit[0].flag), "EmptyPrediction");
    EXPECT_EQ(out.transcripts.size(), 1u);
}

TEST(RefinementLoop, HighOverlapRegroundsBothMembers) {
    World w({{agent_tag("t", "target0", 0), {text("red square"), act("accept")}},
             {agent_tag("t", "target1", 0), {text("red square"), act("accept")}},
             {agent_tag("t", "target0", 1), {text("red square"), act("accept")}},
             {agent_tag("t", "target1", 1), {text("blue disc"), act("accept")}}},
            {{regen_tag("t", "target0", 1), {desc("the square")}}, {regen_tag("t", "target1", 1), {desc("the disc")}}});
    const auto s2 = w.stage2({{"target0", 0, "red one", true}, {"target1", 0, "other one", true}});
    const auto out = run_refinement_loop(w.clip(), kTask, s2, w.services, RefineOptions{});
    ASSERT_EQ(out.audit.size(), 1u);
    EXPECT_EQ(flag_key(out.audit[0].flag), "HighOverlap:target0,target1");
    EXPECT_TRUE(out.audit[0].resolved);
    EXPECT_EQ(out.results[1].masks, w.truth(1));
    EXPECT_EQ(out.results[0].generation, 1);
    EXPECT_EQ(out.results[1].generation, 1);
}

TEST(RefinementLoop, NeverResolvingStopsAfterMaxIterations) {
    // Every generation exhausts its rounds on an unknown concept; every regen returns something new.
    World w({}, {{regen_tag("t", "target0", 1), {desc("first retry")}},
                 {regen_tag("t", "target0", 2), {desc("second retry")}}},
            {{"agent/*", text("zebra")}});
    const auto s2 = w.stage2({{"target0", 0, "zebra", true}});
    RefineOptions opts;
    opts.max_iterations = 2;
    const auto out = run_refinement_loop(w.clip(), kTask, s2, w.services, opts);
    EXPECT_EQ(out.iterations, 2);
    EXPECT_EQ(out.results[0].generation, 2);
    ASSERT_EQ(out.audit.size(), 3u);
    EXPECT_FALSE(out.audit[0].resolved);
    EXPECT_FALSE(out.audit[1].resolved);
    EXPECT_EQ(out.audit[2].action, "kept: iteration budget exhausted");
    EXPECT_EQ(out.audit[2].iteration, 2);
    EXPECT_TRUE(out.results[0].all_empty());

    // Planner calls stay within (1 + max_iterations) x targets x max_rounds.
    EXPECT_EQ(w.planner->served().size(), 3u * 1u * 6u);
}

TEST(RefinementLoop, BehaviorFlagsRegroundCentralSubjects) {
    World w({{agent_tag("t", "target0", 0), {text("blue disc"), act("accept")}},
             {agent_tag("t", "target1", 0), {text("green bar"), act("accept")}},
             {agent_tag("t", "target0", 1), {text("red square"), act("accept")}}},
            {{"classify/t", {json{{"needs_verification", true}}}},
             {verify_tag("t", 0), {json{{"consistent", false}, {"reason", "the outlined object moves up"}}}},
             {verify_tag("t", 1), {json{{"consistent", true}, {"reason", ""}}}},
             {regen_tag("t", "target0", 1), {desc("the red square")}}});
    const auto s2 = w.stage2({{"target0", 0, "mover", true}, {"target1", 0, "landmark", false}});
    const auto out = run_refinement_loop(w.clip(), kTask, s2, w.services, RefineOptions{});
    EXPECT_TRUE(out.verification_needed);
    ASSERT_EQ(out.verdicts.size(), 2u);
    EXPECT_FALSE(out.verdicts[0].consistent);
    ASSERT_EQ(out.audit.size(), 1u);
    EXPECT_EQ(flag_kind(out.audit[0].flag), "BehaviorInconsistent");
    EXPECT_TRUE(out.audit[0].resolved);
    EXPECT_EQ(out.results[1].generation, 0);  // auxiliary referent untouched
    EXPECT_EQ(out.merged, w.truth(0));
}

TEST(RefinementLoop, UnrefinableTargetStopsEarly) {
    World w({{agent_tag("t", "target0", 0), std::vector<json>(6, text("zebra"))}},
            {{regen_tag("t", "target0", 1), {desc("zebra"), desc("zebra")}}});
    const auto s2 = w.stage2({{"target0", 0, "zebra", true}});
    const auto out = run_refinement_loop(w.clip(), kTask, s2, w.services, RefineOptions{});
    EXPECT_EQ(out.iterations, 0);
    EXPECT_TRUE(out.unrefinable.count("target0"));
    ASSERT_EQ(out.audit.size(), 1u);
    EXPECT_NE(out.audit[0].action.find("unrefinable"), std::string::npos);
    EXPECT_EQ(out.merged, s2.merged);
}
