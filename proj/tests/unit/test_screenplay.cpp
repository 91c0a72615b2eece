#include <doctest.h>

#include <deque>

#include "shotweave/error.hpp"
#include "shotweave/gen_clients.hpp"
#include "shotweave/mock_transport.hpp"
#include "shotweave/screenplay.hpp"
#include "test_support.hpp"

using namespace shotweave;
using nlohmann::json;
using shotweave::testing::TempDir;

namespace {

// Replies from a fixed script; records the prompts it was given.
class ScriptedLlm final : public LlmClient {
public:
    explicit ScriptedLlm(std::deque<std::string> replies) : replies_(std::move(replies)) {}
    std::string complete(const LlmPrompt& prompt, std::uint64_t) override {
        prompts.push_back(prompt);
        if (replies_.empty()) {
            return "";
        }
        std::string r = replies_.front();
        if (replies_.size() > 1) {
            replies_.pop_front();
        }
        return r;
    }
    std::string model_id() const override { return "scripted"; }
    std::vector<LlmPrompt> prompts;

private:
    std::deque<std::string> replies_;
};

// Calls the mock role templates directly.
class MockRoleLlm final : public LlmClient {
public:
    std::string complete(const LlmPrompt& prompt, std::uint64_t seed) override {
        if (prompt.role == "storyteller") {
            return mock_storyteller_reply(prompt.context, seed);
        }
        return mock_cinematographer_reply(prompt.context, seed);
    }
    std::string model_id() const override { return "mock-roles"; }
};

const char* kGoodScene =
    "lighting: low amber dusk\n"
    "location: a quiet pier\n"
    "subject: old sailor | grey coat, pipe\n"
    "action: old sailor | ties a rope\n"
    "subject_positions: old sailor at centre frame\n"
    "crowd_level: empty\n"
    "scenario: An old sailor closes up the pier for the night.\n";

ControlSignals signals(std::string subjects = "single", int shots = 2) {
    ControlSignals s{"s-1", "drama", shots, {}, std::move(subjects), "dynamic"};
    const char* moves[] = {"pan left", "dolly in", "crane up"};
    for (int i = 0; i < shots; ++i) {
        s.movements.emplace_back(moves[i]);
    }
    return s;
}

}  // namespace

TEST_SUITE("screenplay") {
    TEST_CASE("strict key/value scene parsing") {
        SceneRecord scene;
        REQUIRE(parse_scene_record(kGoodScene, scene).empty());
        CHECK(scene.location == "a quiet pier");
        REQUIRE(scene.subjects.size() == 1);
        CHECK(scene.subjects[0].visual_attributes == "grey coat, pipe");
        CHECK(scene.actions[0].verb_phrase == "ties a rope");
        CHECK(scene_violations(scene, signals()).empty());

        SceneRecord broken;
        const auto v = parse_scene_record("this is not structured", broken);
        CHECK_FALSE(v.empty());
        SceneRecord dup;
        CHECK_FALSE(parse_scene_record(std::string(kGoodScene) + "lighting: again\n", dup).empty());
        SceneRecord missing;
        CHECK_FALSE(parse_scene_record("lighting: x\nlocation: y\n", missing).empty());
    }

    TEST_CASE("scene schema follows the subject count") {
        SceneRecord scene;
        parse_scene_record(kGoodScene, scene);
        CHECK_FALSE(scene_violations(scene, signals("zero")).empty());
        CHECK_FALSE(scene_violations(scene, signals("multiple")).empty());

        SceneRecord empty_scene = scene;
        empty_scene.subjects.clear();
        empty_scene.actions = {{"scene", "waves slap the posts"}};
        CHECK(scene_violations(empty_scene, signals("zero")).empty());

        SceneRecord stray = scene;
        stray.actions.push_back({"ghost", "drifts by"});
        CHECK_FALSE(scene_violations(stray, signals()).empty());
    }

    TEST_CASE("storyteller is re-prompted with the violations, then accepted") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        std::vector<Transcript> log;
        ScriptedLlm llm({"not structured at all", kGoodScene});
        const SceneRecord scene = compose_scene(signals(), llm, {tax, prompts, 1, &log});
        CHECK(scene.location == "a quiet pier");
        REQUIRE(llm.prompts.size() == 2);
        CHECK(llm.prompts[1].text.find("previous reply was rejected") != std::string::npos);
        REQUIRE(log.size() == 2);
        CHECK_FALSE(log[0].violations.empty());
        CHECK(log[1].violations.empty());
        CHECK(log[1].attempt == 2);
    }

    TEST_CASE("malformed storyteller output raises ParseError after the re-prompt budget") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        ScriptedLlm llm({"not structured"});
        CHECK_THROWS_AS(compose_scene(signals(), llm, {tax, prompts, 1}), ParseError);
        CHECK(llm.prompts.size() == static_cast<std::size_t>(kMaxReprompts + 1));
    }

    TEST_CASE("schema violations that persist raise ValidationError") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        ScriptedLlm llm({kGoodScene});
        CHECK_THROWS_AS(compose_scene(signals("multiple"), llm, {tax, prompts, 1}), ValidationError);
    }

    TEST_CASE("movement translation rejects unknown labels and echo replies") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        SceneRecord scene;
        parse_scene_record(kGoodScene, scene);
        ScriptedLlm echo({"Pan Left"});
        CHECK_THROWS_AS(translate_movement("view", "pan left", scene, echo, {tax, prompts, 1}), ParseError);
        ScriptedLlm blank({"   "});
        CHECK_THROWS_AS(translate_movement("view", "pan left", scene, blank, {tax, prompts, 1}), ParseError);
        CHECK_THROWS_AS(translate_movement("view", "whip pan", scene, blank, {tax, prompts, 1}), PreconditionError);
        ScriptedLlm good({"  The pier slides right.  "});
        CHECK(translate_movement("view", "pan left", scene, good, {tax, prompts, 1}) == "The pier slides right.");
        CHECK(good.prompts[0].text.find("pan left") != std::string::npos);
    }

    TEST_CASE("triplets chain exactly for every shot count and subject count") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        MockRoleLlm llm;
        for (const char* subjects : {"zero", "single", "multiple"}) {
            for (int shots = 1; shots <= 3; ++shots) {
                CAPTURE(subjects);
                CAPTURE(shots);
                const ControlSignals sig = signals(subjects, shots);
                const ScreenplayContext ctx{tax, prompts, 99};
                const SceneRecord scene = compose_scene(sig, llm, ctx);
                const Screenplay sp = build_screenplay(scene, sig, llm, ctx);
                REQUIRE(sp.triplets.size() == static_cast<std::size_t>(shots));
                CHECK(sp.triplets[0].shot_init == opening_view(scene));
                for (std::size_t i = 1; i < sp.triplets.size(); ++i) {
                    CHECK(sp.triplets[i].shot_init == sp.triplets[i - 1].shot_end);
                }
                for (std::size_t i = 0; i < sp.triplets.size(); ++i) {
                    CHECK(sp.triplets[i].movement == sig.movements[i]);
                }
                CHECK_NOTHROW(validate_screenplay(sp, tax));
                if (std::string(subjects) == "zero") {
                    CHECK(scene.subjects.empty());
                    CHECK(scene.actions.front().subject_ref == "scene");
                }
            }
        }
    }

    TEST_CASE("validate_screenplay catches broken chains and counts") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        MockRoleLlm llm;
        const ControlSignals sig = signals("single", 3);
        const ScreenplayContext ctx{tax, prompts, 5};
        Screenplay sp = build_screenplay(compose_scene(sig, llm, ctx), sig, llm, ctx);
        Screenplay bad = sp;
        bad.triplets[2].shot_init += " ";
        CHECK_THROWS_AS(validate_screenplay(bad, tax), ValidationError);
        bad = sp;
        bad.triplets.pop_back();
        CHECK_THROWS_AS(validate_screenplay(bad, tax), ValidationError);
        bad = sp;
        bad.triplets[1].movement = "whip pan";
        CHECK_THROWS_AS(validate_screenplay(bad, tax), ValidationError);
    }

    TEST_CASE("screenplay documents round-trip") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        MockRoleLlm llm;
        const ControlSignals sig = signals("multiple", 3);
        const ScreenplayContext ctx{tax, prompts, 8};
        const Screenplay sp = build_screenplay(compose_scene(sig, llm, ctx), sig, llm, ctx);
        const Screenplay back = screenplay_from_json(json::parse(to_json(sp).dump()));
        CHECK(back.signals == sp.signals);
        CHECK(back.scene == sp.scene);
        CHECK(back.triplets == sp.triplets);
    }

    TEST_CASE("judge-facing text carries one line per shot") {
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        MockRoleLlm llm;
        const ControlSignals sig = signals("single", 2);
        const ScreenplayContext ctx{tax, prompts, 3};
        const Screenplay sp = build_screenplay(compose_scene(sig, llm, ctx), sig, llm, ctx);
        const std::string text = render_screenplay_text(sp);
        CHECK(text.rfind("Scenario: ", 0) == 0);
        CHECK(text.find("Shot 1: [") != std::string::npos);
        CHECK(text.find("Shot 2: [") != std::string::npos);
        CHECK(text.find("Shot 3: [") == std::string::npos);
    }

    TEST_CASE("the service-backed storyteller is deterministic and cached") {
        TempDir dir("sp");
        ArtifactStore store(dir.path());
        EndpointRegistry reg;
        reg.add({"teller", "mock://teller"});
        GenService svc(store, reg);
        ServiceClient teller(svc, "teller");
        const Taxonomy tax = default_taxonomy();
        const PromptLibrary prompts;
        const SceneRecord a = compose_scene(signals(), teller, {tax, prompts, 4});
        const SceneRecord b = compose_scene(signals(), teller, {tax, prompts, 4});
        CHECK(a == b);
        CHECK(svc.network_calls() == 1);
    }
}
