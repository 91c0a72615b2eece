#include <doctest.h>

#include <fstream>
#include <thread>

#include "shotweave/error.hpp"
#include "shotweave/run_store.hpp"
#include "test_support.hpp"

using namespace shotweave;
using nlohmann::json;
using shotweave::testing::TempDir;

namespace {

ControlSignals sample(const std::string& id) {
    return {id, "drama", 2, {"pan left", "dolly in"}, "single", "dynamic"};
}

}  // namespace

TEST_SUITE("run_store") {
    TEST_CASE("stage and gate names round-trip") {
        for (Stage s : {Stage::planned, Stage::screenplay, Stage::storyboard, Stage::clips, Stage::transitions,
                        Stage::final, Stage::failed}) {
            CHECK(stage_from_string(to_string(s)) == s);
        }
        for (GateState g : {GateState::automatic, GateState::awaiting_approval, GateState::approved,
                            GateState::rejected}) {
            CHECK(gate_from_string(to_string(g)) == g);
        }
        CHECK_THROWS_AS(stage_from_string("mixing"), ValidationError);
        CHECK_THROWS_AS(gate_from_string("maybe"), ValidationError);
    }

    TEST_CASE("record progress helpers") {
        RunRecord r = make_run_record("r1", sample("r1"), 42);
        CHECK(r.last_completed() == Stage::planned);
        CHECK(r.next_stage() == Stage::screenplay);
        CHECK_FALSE(r.held_at());
        r.at(Stage::screenplay).complete = true;
        r.at(Stage::screenplay).gate = GateState::awaiting_approval;
        CHECK(r.held_at() == Stage::screenplay);
        CHECK(r.next_stage() == Stage::storyboard);
        r.at(Stage::screenplay).gate = GateState::approved;
        CHECK_FALSE(r.held_at());
        for (Stage s : kWorkStages) {
            r.at(s).complete = true;
        }
        CHECK_FALSE(r.next_stage());
        CHECK(r.last_completed() == Stage::final);
        CHECK_THROWS_AS(r.at(Stage::planned), PreconditionError);
    }

    TEST_CASE("record json round-trip and corrupt checkpoints") {
        RunRecord r = make_run_record("r1", sample("r1"), 0xFFFFFFFFFFFFFFFFULL);
        r.stage = Stage::failed;
        r.failed_stage = Stage::clips;
        r.failure = "boom";
        r.at(Stage::screenplay).complete = true;
        r.at(Stage::screenplay).attempt = 2;
        r.at(Stage::screenplay).artifacts = {{"screenplay", {{"digest", "ab"}, {"media_type", "application/json"}}}};
        const RunRecord back = run_record_from_json(to_json(r));
        CHECK(to_json(back) == to_json(r));
        CHECK(back.seed == 0xFFFFFFFFFFFFFFFFULL);

        json broken = to_json(r);
        broken["stages"].erase("clips");
        CHECK_THROWS_WITH_AS(run_record_from_json(broken), doctest::Contains("corrupt checkpoint"), ValidationError);
        broken = to_json(r);
        broken["stage"] = "nowhere";
        CHECK_THROWS_AS(run_record_from_json(broken), ValidationError);
    }

    TEST_CASE("run ids") {
        CHECK(valid_run_id("sample-0001"));
        CHECK(valid_run_id("a.b_c"));
        CHECK_FALSE(valid_run_id(""));
        CHECK_FALSE(valid_run_id(".hidden"));
        CHECK_FALSE(valid_run_id("a/b"));
        CHECK_FALSE(valid_run_id(".."));
        CHECK_FALSE(valid_run_id(std::string(129, 'a')));
        CHECK(valid_run_id(std::string(128, 'a')));
    }

    TEST_CASE("atomic_write replaces the whole file") {
        TempDir dir("atomic");
        const auto path = dir / "x" / "doc.json";
        atomic_write(path, "first version");
        atomic_write(path, "2");
        std::ifstream in(path);
        std::string content((std::istreambuf_iterator<char>(in)), {});
        CHECK(content == "2");
        std::size_t files = 0;
        for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "x")) {
            ++files;
        }
        CHECK(files == 1);
    }

    TEST_CASE("store save, load, list and logs") {
        TempDir dir("store");
        RunStore store(dir.path());
        CHECK(store.list().empty());
        CHECK_FALSE(store.exists("b"));
        CHECK_THROWS_AS(store.load("b"), NotFoundError);
        CHECK_THROWS_AS(store.load("../etc"), ValidationError);

        for (const char* id : {"b", "a"}) {
            RunRecord r = make_run_record(id, sample(id), 1);
            store.save(r);
        }
        CHECK(store.list() == std::vector<std::string>{"a", "b"});
        CHECK(store.load("a").signals == sample("a"));

        store.append_provenance("a", {{"event", "created"}});
        store.append_provenance("a", {{"event", "stage_completed"}});
        const auto prov = store.provenance("a");
        REQUIRE(prov.size() == 2);
        CHECK(prov[1].at("event") == "stage_completed");
        CHECK(store.provenance("b").empty());

        store.append_transcripts("a", {{"storyteller", "m", 1, "p", "r", {}}});
        CHECK(store.transcripts("a").size() == 1);

        atomic_write(store.run_dir("b") / "record.json", "{\"run_id\": ");
        CHECK_THROWS_WITH_AS(store.load("b"), doctest::Contains("corrupt checkpoint"), ValidationError);
    }

    TEST_CASE("concurrent provenance appends keep whole lines") {
        TempDir dir("append");
        RunStore store(dir.path());
        RunRecord r = make_run_record("r", sample("r"), 1);
        store.save(r);
        {
            std::vector<std::jthread> threads;
            for (int t = 0; t < 8; ++t) {
                threads.emplace_back([&store, t] {
                    for (int i = 0; i < 50; ++i) {
                        store.append_provenance("r", {{"event", "tick"}, {"t", t}, {"i", i}});
                    }
                });
            }
        }
        CHECK(store.provenance("r").size() == 400);
    }
}
