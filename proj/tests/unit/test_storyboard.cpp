#include <doctest.h>

#include <map>
#include <memory>

#include "shotweave/error.hpp"
#include "shotweave/gen_clients.hpp"
#include "shotweave/media.hpp"
#include "shotweave/rng.hpp"
#include "shotweave/storyboard.hpp"
#include "test_support.hpp"

using namespace shotweave;
using nlohmann::json;
using shotweave::testing::TempDir;

namespace {

// Exhaustive argmax with the tie-break applied by hand.
std::string oracle_route(const ScoreMatrix& m, const std::string& family) {
    std::string best;
    for (const auto& id : m.models) {
        if (best.empty()) {
            best = id;
            continue;
        }
        const double c = m.camera(id, family), cb = m.camera(best, family);
        if (c > cb || (c == cb && m.scene_preservation.at(id) > m.scene_preservation.at(best))) {
            best = id;
        }
    }
    return best;
}

ScoreMatrix random_matrix(Rng& rng, std::size_t n_models) {
    json doc{{"families", json::array()}, {"models", json::array()}};
    for (auto f : kMovementFamilies) {
        doc["families"].push_back(std::string(f));
    }
    for (std::size_t i = 0; i < n_models; ++i) {
        json cells = json::array();
        for (std::size_t f = 0; f < 9; ++f) {
            // Coarse grid so ties are common.
            cells.push_back(static_cast<double>(rng.below(5)) * 2.0);
        }
        doc["models"].push_back({{"model_id", "m" + std::to_string(i)},
                                 {"camera_adherence", cells},
                                 {"scene_preservation", static_cast<double>(rng.below(4))},
                                 {"narration_adherence", 5.0}});
    }
    return load_score_matrix(doc);
}

struct Rig {
    TempDir dir{"board"};
    ArtifactStore store{dir.path()};
    GenService svc;
    std::unique_ptr<ServiceClient> t2i;
    std::map<std::string, std::unique_ptr<ServiceClient>> editors;
    std::map<std::string, ImageEditClient*> pool;

    static EndpointRegistry registry() {
        EndpointRegistry reg;
        reg.add({"t2i", "mock://t2i", "", 0, 60, json{{"width", 32}, {"height", 18}}});
        for (const auto& id : default_score_matrix().models) {
            reg.add({id, "mock://" + id});
        }
        return reg;
    }

    Rig() : svc(store, registry()) {
        t2i = std::make_unique<ServiceClient>(svc, "t2i");
        for (const auto& id : default_score_matrix().models) {
            editors[id] = std::make_unique<ServiceClient>(svc, id);
            pool[id] = editors[id].get();
        }
    }
};

Screenplay screenplay(const std::vector<std::string>& moves) {
    Screenplay sp;
    sp.signals = {"s", "drama", static_cast<int>(moves.size()), moves, "zero", "static"};
    sp.scene.scenario = "An empty station platform at night.";
    sp.scene.location = "station";
    std::string view = "opening view";
    for (std::size_t i = 0; i < moves.size(); ++i) {
        std::string end = "view after " + moves[i];
        sp.triplets.push_back({view, moves[i], end});
        view = end;
    }
    return sp;
}

}  // namespace

TEST_SUITE("storyboard") {
    TEST_CASE("shipped matrix routes each family to its best model") {
        const ScoreMatrix m = default_score_matrix();
        CHECK(m.models.size() == 7);
        const RoutingTable r = build_routing(m);
        const std::map<std::string, std::string> expect = {
            {"static", "gemini-flash-2.5"}, {"tilt", "gemini-flash-2.5"},     {"zoom", "gemini-flash-2.5"},
            {"pan", "qwen-lora-camera"},    {"truck", "qwen-lora-camera"},     {"crane", "qwen-lora-camera"},
            {"arc", "qwen-lora-camera"},    {"dolly", "qwen-imageedit"},       {"pedestal", "gemini-flash-2.5"}};
        CHECK(r.assignment == expect);
    }

    TEST_CASE("pedestal tie is broken by scene preservation") {
        const RoutingTable r = build_routing(default_score_matrix());
        const auto& trace = r.tie_break_trace.at("pedestal");
        REQUIRE(trace.size() >= 3);
        CHECK(trace[0] == "gemini-flash-2.5");
        CHECK(trace[1] == "seedream-4");
        CHECK(trace[2] == "bria-fibo");

        // Without the criterion the tie falls back to declaration order.
        const RoutingTable plain = build_routing(default_score_matrix(), TieBreakPolicy{{}});
        CHECK(plain.assignment.at("pedestal") == "gemini-flash-2.5");
        CHECK(plain.tie_break_trace.at("pedestal")[2] == "bria-fibo");
        CHECK_THROWS_AS(build_routing(default_score_matrix(), TieBreakPolicy{{"vibes"}}), ValidationError);
    }

    TEST_CASE("routing equals an exhaustive argmax on random matrices") {
        Rng rng(2024);
        for (int trial = 0; trial < 300; ++trial) {
            const ScoreMatrix m = random_matrix(rng, 1 + rng.below(8));
            const RoutingTable r = build_routing(m);
            for (const auto& f : m.families) {
                REQUIRE(r.assignment.at(f) == oracle_route(m, f));
                const auto& trace = r.tie_break_trace.at(f);
                REQUIRE(trace.size() == m.models.size());
                for (std::size_t i = 1; i < trace.size(); ++i) {
                    REQUIRE(m.camera(trace[i - 1], f) >= m.camera(trace[i], f));
                }
            }
        }
    }

    TEST_CASE("score matrix validation") {
        json doc = to_json(default_score_matrix());
        CHECK(load_score_matrix(doc).models == default_score_matrix().models);
        json bad = doc;
        bad["models"][0]["camera_adherence"][0] = 11.0;
        CHECK_THROWS_AS(load_score_matrix(bad), ValidationError);
        bad = doc;
        bad["models"].push_back(doc["models"][0]);
        CHECK_THROWS_AS(load_score_matrix(bad), ValidationError);
        bad = doc;
        bad["models"][1]["camera_adherence"].erase(0);
        CHECK_THROWS_AS(load_score_matrix(bad), ValidationError);
        CHECK(routing_from_json(to_json(build_routing(default_score_matrix()))).assignment ==
              build_routing(default_score_matrix()).assignment);
    }

    TEST_CASE("storyboard has N+1 keyframes chained through routed editors") {
        Rig rig;
        const Taxonomy tax = default_taxonomy();
        const RoutingTable routing = build_routing(default_score_matrix());
        for (const auto& moves : std::vector<std::vector<std::string>>{
                 {"static"}, {"pan left", "dolly in"}, {"pedestal up", "arc right", "zoom out"}}) {
            const Screenplay sp = screenplay(moves);
            const Storyboard board = generate_storyboard(sp, tax, routing, *rig.t2i, rig.pool, 11);
            REQUIRE(board.keyframes.size() == moves.size() + 1);
            CHECK(board.keyframes[0].model_id == "t2i");
            CHECK(board.keyframes[0].prompt == sp.scene.scenario + "\n" + sp.triplets[0].shot_init);
            CHECK_FALSE(board.keyframes[0].source.has_value());
            for (std::size_t i = 1; i < board.keyframes.size(); ++i) {
                const Keyframe& k = board.keyframes[i];
                CHECK(k.model_id == routing.assignment.at(family_of(moves[i - 1], tax)));
                CHECK(k.prompt == sp.triplets[i - 1].shot_end);
                CHECK(k.movement == moves[i - 1]);
                REQUIRE(k.source.has_value());
                CHECK(*k.source == board.keyframes[i - 1].image.digest);
                // The store's provenance agrees with the board.
                const json side = rig.store.sidecar(k.image.digest);
                CHECK(side.at("model_id") == k.model_id);
                CHECK(side.at("payload").at("source") == *k.source);
            }
        }
    }

    TEST_CASE("a missing routed client fails before any generation") {
        Rig rig;
        const Taxonomy tax = default_taxonomy();
        const RoutingTable routing = build_routing(default_score_matrix());
        auto pool = rig.pool;
        pool.erase("qwen-imageedit");
        CHECK_THROWS_AS(generate_storyboard(screenplay({"pan left", "dolly in"}), tax, routing, *rig.t2i, pool, 1),
                        PreconditionError);
        CHECK(rig.svc.network_calls() == 0);
    }

    TEST_CASE("regeneration keeps the prefix and rebuilds the rest of the chain") {
        Rig rig;
        const Taxonomy tax = default_taxonomy();
        const RoutingTable routing = build_routing(default_score_matrix());
        const Screenplay sp = screenplay({"pan left", "tilt up", "crane down"});
        const Storyboard board = generate_storyboard(sp, tax, routing, *rig.t2i, rig.pool, 1);
        const Storyboard again = regenerate_keyframes(board, 2, sp, tax, routing, *rig.t2i, rig.pool, 2);
        REQUIRE(again.keyframes.size() == 4);
        CHECK(again.keyframes[0].image == board.keyframes[0].image);
        CHECK(again.keyframes[1].image == board.keyframes[1].image);
        CHECK(again.keyframes[2].image != board.keyframes[2].image);
        CHECK(*again.keyframes[3].source == again.keyframes[2].image.digest);
        CHECK_THROWS_AS(regenerate_keyframes(board, 9, sp, tax, routing, *rig.t2i, rig.pool, 2), PreconditionError);

        const Storyboard back = storyboard_from_json(json::parse(to_json(board).dump()));
        REQUIRE(back.keyframes.size() == board.keyframes.size());
        CHECK(back.keyframes[2].source == board.keyframes[2].source);
        CHECK(back.keyframes[2].seed == board.keyframes[2].seed);
    }

    TEST_CASE("family lookup rejects unknown movements") {
        CHECK(family_of("crane up", default_taxonomy()) == "crane");
        CHECK_THROWS_AS(family_of("whip pan", default_taxonomy()), PreconditionError);
    }
}
