#include "support.hpp"

#include "rvos/mocks.hpp"
#include "rvos/stage1.hpp"

using namespace rvos;
using nlohmann::json;

namespace {

VideoClip numbered_clip(int n) {
    std::vector<RgbImage> frames;
    for (int i = 0; i < n; ++i) frames.emplace_back(4, 4, Rgb{static_cast<std::uint8_t>(i * 10), 0, 0});
    return make_clip("numbered", std::move(frames));
}

std::vector<std::string> captions(const ChatRequest& r) {
    std::vector<std::string> out;
    for (const auto& part : r.messages.back().parts) {
        if (const auto* t = std::get_if<TextPart>(&part); t && t->text.starts_with("Frame ")) out.push_back(t->text);
    }
    return out;
}

std::size_t image_count(const ChatRequest& r) {
    std::size_t n = 0;
    for (const auto& m : r.messages)
        for (const auto& p : m.parts) n += std::holds_alternative<ImagePart>(p);
    return n;
}

ScriptedChat planner(const std::string& task, std::vector<json> replies) {
    return ScriptedChat(json{{"kind", "scripted-chat"}, {"script", {{"stage1/" + task, replies}}}});
}

json target(int keyframe, const std::string& description, bool central = true) {
    return {{"keyframe_index", keyframe}, {"description", description}, {"is_central_subject", central}};
}

const ExpressionTask kTask{"t1", "numbered", "the cars that turn left", false, std::nullopt};

} // namespace

TEST(DecompositionPrompt, SamplesAndCaptionsFrames) {
    const auto clip = numbered_clip(10);
    const auto req = build_decomposition_prompt(clip, "the cars that turn left", 4, "t1");
    EXPECT_EQ(captions(req), (std::vector<std::string>{"Frame 0:", "Frame 3:", "Frame 6:", "Frame 9:"}));
    EXPECT_EQ(image_count(req), 4u);
    EXPECT_EQ(req.schema, std::string("decomposition-v1"));
    EXPECT_EQ(prompt_tag(req), "stage1/t1");
    const auto& header = std::get<TextPart>(req.messages.back().parts.front()).text;
    EXPECT_NE(header.find("the cars that turn left"), std::string::npos);

    const auto all = build_decomposition_prompt(clip, "x", 16);
    EXPECT_EQ(image_count(all), 10u);
    EXPECT_EQ(captions(all).front(), "Frame 0:");
    EXPECT_EQ(captions(all).back(), "Frame 9:");
    EXPECT_EQ(prompt_tag(all), "stage1");
    EXPECT_RVOS_ERROR(build_decomposition_prompt(clip, "x", 1), ErrorCode::InvalidSpec);
}

TEST(SnapToShown, NearestWithTiesToEarlier) {
    const std::vector<int> shown{0, 3, 6, 9};
    EXPECT_EQ(snap_to_shown(4, shown), 3);
    EXPECT_EQ(snap_to_shown(5, shown), 6);
    EXPECT_EQ(snap_to_shown(-3, shown), 0);
    EXPECT_EQ(snap_to_shown(42, shown), 9);
    EXPECT_EQ(snap_to_shown(6, shown), 6);
    EXPECT_EQ(snap_to_shown(1, {0, 2}), 0);
}

TEST(ValidateDecomposition, Rules) {
    const auto clip = numbered_clip(5);
    DecompositionResult ok{{{"a", 1, "red car", true}, {"b", 2, "blue car", false}}, false, "r"};
    EXPECT_EQ(validate_decomposition(ok, clip), ok);

    auto dup = ok;
    dup.targets.push_back({"c", 3, "red car", true});
    EXPECT_EQ(validate_decomposition(dup, clip).targets.size(), 2u);

    EXPECT_RVOS_ERROR(validate_decomposition({{{"a", 1, "x", true}}, true, ""}, clip), ErrorCode::InvariantViolation);
    EXPECT_RVOS_ERROR(validate_decomposition({{}, false, ""}, clip), ErrorCode::InvariantViolation);
    EXPECT_RVOS_ERROR(validate_decomposition({{{"a", 5, "x", true}}, false, ""}, clip), ErrorCode::InvariantViolation);
    EXPECT_RVOS_ERROR(validate_decomposition({{{"a", 0, "", true}}, false, ""}, clip), ErrorCode::InvariantViolation);
    EXPECT_RVOS_ERROR(validate_decomposition({{{"a", 0, "x", true}, {"a", 1, "y", true}}, false, ""}, clip),
                      ErrorCode::InvariantViolation);
    EXPECT_NO_THROW(validate_decomposition({{}, true, "none"}, clip));
}

TEST(DecomposeEvent, MultiInstanceGetsDistinctIds) {
    auto chat = planner("t1", {json{{"no_target", false},
                                    {"targets", {target(3, "left car"), target(6, "right car"), target(0, "sign", false)}},
                                    {"rationale", "two cars turn"}}});
    const auto rec = decompose_event(numbered_clip(10), kTask, chat, 4);
    ASSERT_EQ(rec.result.targets.size(), 3u);
    EXPECT_EQ(rec.result.targets[0].target_id, "target0");
    EXPECT_EQ(rec.result.targets[1].target_id, "target1");
    EXPECT_FALSE(rec.result.targets[2].is_central_subject);
    EXPECT_EQ(rec.shown_frames, (std::vector<int>{0, 3, 6, 9}));
    EXPECT_TRUE(rec.warnings.empty());
    EXPECT_EQ(rec.repairs, 0);
}

TEST(DecomposeEvent, NoTarget) {
    auto chat = planner("t1", {json{{"no_target", true}, {"targets", json::array()}, {"rationale", "nothing turns"}}});
    const auto rec = decompose_event(numbered_clip(10), kTask, chat, 4);
    EXPECT_TRUE(rec.result.no_target);
    EXPECT_TRUE(rec.result.targets.empty());
}

TEST(DecomposeEvent, SnapsUnshownKeyframesWithWarning) {
    auto chat = planner("t1", {json{{"no_target", false}, {"targets", {target(4, "car"), target(99, "bus")}},
                                    {"rationale", ""}}});
    const auto rec = decompose_event(numbered_clip(10), kTask, chat, 4);
    EXPECT_EQ(rec.result.targets[0].keyframe_index, 3);
    EXPECT_EQ(rec.result.targets[1].keyframe_index, 9);
    ASSERT_EQ(rec.warnings.size(), 2u);
    EXPECT_NE(rec.warnings[0].find("snapped to 3"), std::string::npos);
    for (const auto& t : rec.result.targets) {
        EXPECT_NE(std::find(rec.shown_frames.begin(), rec.shown_frames.end(), t.keyframe_index), rec.shown_frames.end());
    }
}

TEST(DecomposeEvent, DuplicateDescriptionsDroppedWithWarning) {
    auto chat = planner("t1", {json{{"no_target", false}, {"targets", {target(0, "car"), target(3, "car")}},
                                    {"rationale", ""}}});
    const auto rec = decompose_event(numbered_clip(10), kTask, chat, 4);
    EXPECT_EQ(rec.result.targets.size(), 1u);
    EXPECT_EQ(rec.warnings.size(), 1u);
}

TEST(DecomposeEvent, OneRepairThenSchemaViolation) {
    const json good{{"no_target", true}, {"targets", json::array()}, {"rationale", ""}};
    auto repaired = planner("t1", {json("I think there is a car."), good});
    const auto rec = decompose_event(numbered_clip(10), kTask, repaired, 4);
    EXPECT_EQ(rec.repairs, 1);
    EXPECT_TRUE(rec.result.no_target);

    const json conflicting{{"no_target", true}, {"targets", {target(0, "car")}}, {"rationale", ""}};
    auto broken = planner("t1", {conflicting, conflicting, good});
    EXPECT_RVOS_ERROR(decompose_event(numbered_clip(10), kTask, broken, 4), ErrorCode::SchemaViolation);
    EXPECT_EQ(broken.remaining("stage1/t1"), 1u);
}

TEST(DecomposeEvent, DeterministicUnderMocks) {
    const json reply{{"no_target", false}, {"targets", {target(5, "car")}}, {"rationale", "r"}};
    auto a = planner("t1", {reply});
    auto b = planner("t1", {reply});
    EXPECT_EQ(decompose_event(numbered_clip(10), kTask, a, 4).result,
              decompose_event(numbered_clip(10), kTask, b, 4).result);
}

TEST(DecomposeEvent, BackendFaultsPropagate) {
    auto chat = planner("t1", {json{{"$error", "Transport"}}});
    EXPECT_RVOS_ERROR(decompose_event(numbered_clip(10), kTask, chat, 4), ErrorCode::Transport);
}
