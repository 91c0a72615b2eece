#include <doctest.h>

#include <httplib.h>

#include "shotweave/serve.hpp"
#include "test_support.hpp"

using namespace shotweave;
using nlohmann::json;
using shotweave::testing::TempDir;

namespace {

ControlSignals signals(const std::string& id) {
    return {id, "comedy", 2, {"tilt up", "arc left"}, "multiple", "static"};
}

struct Fixture {
    TempDir dir{"serve"};
    Pipeline pipeline;
    ReviewServer server;
    httplib::Client client;

    explicit Fixture(std::set<Stage> gates = {}, std::string token = "")
        : pipeline([&] {
              PipelineConfig cfg = mock_pipeline_config(dir.path(), 6);
              cfg.gates = std::move(gates);
              return cfg;
          }()),
          server(pipeline, ServeOptions{"127.0.0.1", 0, token, std::nullopt}),
          client("127.0.0.1", server.start()) {
        if (!token.empty()) {
            client.set_bearer_token_auth(token);
        }
    }
    ~Fixture() { server.stop(); }

    json get(const std::string& path, int expect = 200) {
        auto res = client.Get(path);
        REQUIRE(res);
        CHECK(res->status == expect);
        return json::parse(res->body);
    }
    json post(const std::string& path, const json& body, int expect) {
        auto res = client.Post(path, body.dump(), "application/json");
        REQUIRE(res);
        CHECK_MESSAGE(res->status == expect, res->body);
        return json::parse(res->body);
    }
};

}  // namespace

TEST_SUITE("serve") {
    TEST_CASE("health, create and inspect a run") {
        Fixture f;
        CHECK(f.get("/api/health").at("status") == "ok");
        CHECK(f.get("/api/runs").at("runs").empty());

        const json created = f.post("/api/runs", {{"signals", to_json(signals("s1"))}}, 202);
        CHECK(created.at("run_id") == "s1");
        f.server.wait_idle();

        const json detail = f.get("/api/runs/s1");
        CHECK(detail.at("stage") == "final");
        CHECK(detail.at("keyframes").size() == 3);
        CHECK(detail.at("screenplay_text").get<std::string>().find("Shot 1:") != std::string::npos);
        CHECK(f.get("/api/runs").at("runs").size() == 1);
        CHECK(f.get("/api/runs/s1/stages/clips").at("complete") == true);
        CHECK_FALSE(f.get("/api/runs/s1/provenance").at("events").empty());
        CHECK_FALSE(f.get("/api/runs/s1/transcripts").at("transcripts").empty());
        CHECK(f.get("/api/manifest").at("count") == 1);

        // Artifacts: raw bytes, sidecar and previews.
        const std::string key = detail.at("keyframes")[0].at("image").at("digest");
        auto raw = f.client.Get("/api/artifacts/" + key);
        REQUIRE(raw);
        CHECK(raw->status == 200);
        CHECK(raw->body.rfind("P6", 0) == 0);
        CHECK(f.get("/api/artifacts/" + key + "/meta").at("digest") == key);
        auto bmp = f.client.Get("/api/artifacts/" + key + "/preview.bmp");
        REQUIRE(bmp);
        CHECK(bmp->status == 200);
        CHECK(bmp->get_header_value("Content-Type") == "image/bmp");
        CHECK(bmp->body.rfind("BM", 0) == 0);
        const std::string clip = detail.at("record").at("stages").at("clips").at("artifacts").at("clips")[0].at("digest");
        auto frame = f.client.Get("/api/artifacts/" + clip + "/preview.bmp?frame=3");
        REQUIRE(frame);
        CHECK(frame->status == 200);
        auto past = f.client.Get("/api/artifacts/" + clip + "/preview.bmp?frame=999");
        REQUIRE(past);
        CHECK(past->status == 400);
        f.get("/api/artifacts/" + std::string(64, '0') + "/meta", 404);
    }

    TEST_CASE("error responses") {
        Fixture f;
        f.get("/api/runs/ghost", 404);
        CHECK(f.get("/api/runs/ghost/provenance", 404).at("error") == "not_found");
        CHECK(f.post("/api/runs", {{"nothing", 1}}, 400).at("error") == "invalid");
        ControlSignals bad = signals("x");
        bad.genre = "opera";
        f.post("/api/runs", {{"signals", to_json(bad)}}, 400);
        auto garbage = f.client.Post("/api/runs", "{not json", "application/json");
        REQUIRE(garbage);
        CHECK(garbage->status == 400);

        f.post("/api/runs", {{"signals", to_json(signals("dup"))}}, 202);
        f.server.wait_idle();
        CHECK(f.post("/api/runs", {{"signals", to_json(signals("dup"))}}, 409).at("error") == "conflict");
        f.post("/api/runs/dup/stages/screenplay/approve", json::object(), 409);
        f.post("/api/runs/dup/stages/mixing/approve", json::object(), 400);
    }

    TEST_CASE("approve, conflict and reject with an edited scenario") {
        Fixture f({Stage::screenplay});
        f.post("/api/runs", {{"signals", to_json(signals("g"))}}, 202);
        f.server.wait_idle();
        json detail = f.get("/api/runs/g");
        CHECK(detail.at("held_at") == "screenplay");
        CHECK(detail.at("gates").at("screenplay") == "awaiting_approval");

        const std::string scenario = "Two street painters argue over one wall.";
        const json rejected =
            f.post("/api/runs/g/stages/screenplay/reject", {{"scenario", scenario}, {"actor", "carol"}}, 200);
        CHECK(rejected.at("screenplay").at("scene").at("scenario") == scenario);
        CHECK(rejected.at("gates").at("screenplay") == "awaiting_approval");

        const json approved = f.post("/api/runs/g/stages/screenplay/approve", json::object(), 200);
        CHECK(approved.at("gates").at("screenplay") == "approved");
        f.post("/api/runs/g/stages/screenplay/approve", json::object(), 409);
        f.server.wait_idle();

        detail = f.get("/api/runs/g");
        CHECK(detail.at("stage") == "final");
        CHECK(detail.at("keyframes")[0].at("prompt").get<std::string>().rfind(scenario, 0) == 0);
        json rejected_event;
        const json prov = f.get("/api/runs/g/provenance");
        for (const auto& e : prov.at("events")) {
            if (e.at("event") == "rejected") {
                rejected_event = e;
            }
        }
        REQUIRE(rejected_event.is_object());
        CHECK(rejected_event.at("details").at("edit").at("scenario") == scenario);
        CHECK(rejected_event.at("details").at("actor") == "carol");
    }

    TEST_CASE("storyboard review through the API") {
        Fixture f({Stage::storyboard});
        f.post("/api/runs", {{"signals", to_json(signals("k"))}}, 202);
        f.server.wait_idle();
        CHECK(f.get("/api/runs/k").at("held_at") == "storyboard");
        f.post("/api/runs/k/stages/storyboard/reject", {{"keyframes", {1}}}, 200);
        CHECK(f.get("/api/runs/k").at("gates").at("storyboard") == "rejected");
        const json regen = f.post("/api/runs/k/stages/storyboard/regenerate", json::object(), 200);
        CHECK(regen.at("gates").at("storyboard") == "awaiting_approval");
        f.post("/api/runs/k/stages/storyboard/approve", json::object(), 200);
        f.server.wait_idle();
        CHECK(f.get("/api/runs/k").at("stage") == "final");
        CHECK(f.post("/api/runs/k/resume", json::object(), 202).at("stage") == "final");
        f.server.wait_idle();
    }

    TEST_CASE("bearer token guards the API") {
        Fixture f({}, "s3cret");
        CHECK(f.get("/api/health").at("status") == "ok");
        httplib::Client anonymous("127.0.0.1", f.client.port());
        auto res = anonymous.Get("/api/health");
        REQUIRE(res);
        CHECK(res->status == 401);
        anonymous.set_bearer_token_auth("wrong");
        res = anonymous.Get("/api/runs");
        REQUIRE(res);
        CHECK(res->status == 401);
        CHECK(json::parse(res->body).at("error") == "unauthorized");
    }
}
