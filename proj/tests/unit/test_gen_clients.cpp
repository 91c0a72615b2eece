#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>
#include <vector>

#include <httplib.h>

#include "shotweave/error.hpp"
#include "shotweave/gen_clients.hpp"
#include "shotweave/hashing.hpp"
#include "shotweave/media.hpp"
#include "shotweave/mock_transport.hpp"
#include "test_support.hpp"

using namespace shotweave;
using nlohmann::json;
using shotweave::testing::TempDir;

namespace {

RetryPolicy fast_retry() {
    RetryPolicy r;
    r.base_delay = std::chrono::milliseconds(1);
    r.max_delay = std::chrono::milliseconds(2);
    return r;
}

EndpointRegistry mock_registry() {
    EndpointRegistry reg;
    reg.add({"llm", "mock://llm", "", 0, 5, json::object()});
    reg.add({"painter", "mock://t2i", "", 0, 5, json{{"width", 16}, {"height", 9}}});
    reg.add({"editor", "mock://i2i", "", 0, 5, json::object()});
    reg.add({"video", "mock://video", "", 0, 5, json::object()});
    return reg;
}

std::size_t count_files(const std::filesystem::path& dir) {
    std::size_t n = 0;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        n += e.is_regular_file() ? 1 : 0;
    }
    return n;
}

}  // namespace

TEST_SUITE("gen_clients") {
    TEST_CASE("registry rejects duplicates and unknown ids") {
        EndpointRegistry reg;
        reg.add({"a", "mock://a"});
        CHECK_THROWS_AS(reg.add({"a", "mock://b"}), ValidationError);
        CHECK_THROWS_AS(reg.add({"", "mock://b"}), ValidationError);
        CHECK_THROWS_AS(reg.at("missing"), NotFoundError);
        const auto parsed = EndpointRegistry::from_json(
            json::array({{{"model_id", "x"}, {"base_url", "http://localhost:1"}, {"rate_limit", 60}}}));
        CHECK(parsed.at("x").rate_limit_rpm == 60);
        CHECK_THROWS_AS(EndpointRegistry::from_json(json::array({{{"base_url", "mock://"}}})), ValidationError);
    }

    TEST_CASE("artifact store is content addressed with a provenance sidecar") {
        TempDir dir("store");
        ArtifactStore store(dir.path());
        const ArtifactRef ref = store.put("hello", kMediaText, json{{"origin", "test"}});
        CHECK(ref.digest == sha256_hex("hello"));
        CHECK(store.read(ref) == "hello");
        CHECK(store.path_of(ref.digest).parent_path().filename() == ref.digest.substr(0, 2));
        const json side = store.sidecar(ref.digest);
        CHECK(side.at("origin") == "test");
        CHECK(side.at("size") == 5);
        CHECK(side.at("digest") == ref.digest);

        // A second writer of the same bytes keeps the first sidecar.
        store.put("hello", kMediaText, json{{"origin", "other"}});
        CHECK(store.sidecar(ref.digest).at("origin") == "test");
        CHECK_THROWS_AS(store.read("../../etc/passwd"), ValidationError);
        CHECK_THROWS_AS(store.read(sha256_hex("absent")), NotFoundError);
    }

    TEST_CASE("concurrent writers of one digest leave one intact file and no temporaries") {
        TempDir dir("race");
        ArtifactStore store(dir.path());
        const std::string bytes(100000, 'z');
        std::vector<std::jthread> threads;
        for (int i = 0; i < 8; ++i) {
            threads.emplace_back([&] { store.put(bytes, kMediaText, json::object()); });
        }
        threads.clear();
        CHECK(store.read(sha256_hex(bytes)) == bytes);
        CHECK(count_files(dir.path() / "artifacts") == 2);
    }

    TEST_CASE("cache key depends on model, kind, payload and seed") {
        const GenRequest a{GenKind::t2i, {{"prompt", "x"}}, 1};
        GenRequest b = a;
        CHECK(cache_key("m", a) == cache_key("m", b));
        b.seed = 2;
        CHECK(cache_key("m", a) != cache_key("m", b));
        CHECK(cache_key("m", a) != cache_key("n", a));
        b = a;
        b.kind = GenKind::llm;
        CHECK(cache_key("m", a) != cache_key("m", b));
        b = a;
        b.payload["prompt"] = "y";
        CHECK(cache_key("m", a) != cache_key("m", b));
    }

    TEST_CASE("identical requests hit the cache without a network call") {
        TempDir dir("cache");
        ArtifactStore store(dir.path());
        GenService svc(store, mock_registry(), fast_retry());
        const GenRequest req{GenKind::t2i, {{"prompt", "a lighthouse"}}, 7};
        const GenResponse first = svc.execute("painter", req);
        CHECK_FALSE(first.cache_hit);
        CHECK(svc.network_calls("painter") == 1);
        const GenResponse second = svc.execute("painter", req);
        CHECK(second.cache_hit);
        CHECK(second.artifact == first.artifact);
        CHECK(svc.network_calls("painter") == 1);

        // A fresh service over the same directory also hits.
        GenService again(store, mock_registry(), fast_retry());
        CHECK(again.execute("painter", req).cache_hit);
        CHECK(again.network_calls() == 0);

        const Image img = decode_ppm(store.read(first.artifact));
        CHECK(img.width == 16);
        CHECK(img.height == 9);
    }

    TEST_CASE("transient failures are retried within three attempts") {
        TempDir dir("retry");
        ArtifactStore store(dir.path());
        GenService svc(store, mock_registry(), fast_retry());
        svc.mock().inject_failure("painter", {.fail_first = 2});
        const GenResponse r = svc.execute("painter", {GenKind::t2i, {{"prompt", "p"}}, 1});
        CHECK(r.metadata.at("attempts") == 3);
        CHECK(svc.network_calls("painter") == 3);

        svc.mock().inject_failure("painter", {.fail_first = 3});
        try {
            svc.execute("painter", {GenKind::t2i, {{"prompt", "q"}}, 1});
            FAIL("expected ClientError");
        } catch (const ClientError& e) {
            CHECK(e.attempts() == 3);
        }
        CHECK(svc.mock().attempts("painter") == 3);
    }

    TEST_CASE("non-retryable failures stop after one attempt") {
        TempDir dir("fatal");
        ArtifactStore store(dir.path());
        GenService svc(store, mock_registry(), fast_retry());
        svc.mock().inject_failure("llm", {.fail_all = true, .retryable = false, .status = 400});
        try {
            svc.execute("llm", {GenKind::llm, {{"role", "storyteller"}, {"prompt", "x"}}, 1});
            FAIL("expected ClientError");
        } catch (const ClientError& e) {
            CHECK(e.attempts() == 1);
        }
        // Nothing was cached or written for the failed request.
        CHECK(count_files(dir.path() / "cache") == 0);
    }

    TEST_CASE("payloads are validated before any call") {
        TempDir dir("payload");
        ArtifactStore store(dir.path());
        GenService svc(store, mock_registry(), fast_retry());
        CHECK_THROWS_AS(svc.execute("painter", {GenKind::t2i, json::object(), 1}), ValidationError);
        CHECK_THROWS_AS(svc.execute("editor", {GenKind::i2i, {{"prompt", "x"}, {"source", sha256_hex("none")}}, 1}),
                        ValidationError);
        CHECK_THROWS_AS(svc.execute("nobody", {GenKind::t2i, {{"prompt", "x"}}, 1}), NotFoundError);
        CHECK(svc.network_calls() == 0);
    }

    TEST_CASE("service clients chain t2i, i2i and first-last video") {
        TempDir dir("chain");
        ArtifactStore store(dir.path());
        GenService svc(store, mock_registry(), fast_retry());
        ServiceClient painter(svc, "painter");
        ServiceClient editor(svc, "editor");
        ServiceClient video(svc, "video");
        const ArtifactRef a = painter.generate("start", 1);
        const ArtifactRef b = editor.edit(a, "after a pan", 2);
        CHECK(a != b);
        CHECK(store.sidecar(b.digest).at("payload").at("source") == a.digest);
        const ArtifactRef clip = video.first_last_to_video(a, b, json::array({"x", "pan left", "y"}), 12, 3);
        const Clip frames = decode_clip(store.read(clip));
        REQUIRE(frames.size() == 12);
        CHECK(frames.front() == decode_ppm(store.read(a)));
        CHECK(frames.back() == decode_ppm(store.read(b)));
    }

    TEST_CASE("every outbound payload is logged") {
        TempDir dir("wire");
        ArtifactStore store(dir.path());
        GenService svc(store, mock_registry(), fast_retry());
        svc.mock().inject_failure("painter", {.fail_first = 1});
        svc.execute("painter", {GenKind::t2i, {{"prompt", "p"}}, 1});
        std::ifstream in(dir.path() / "wire.jsonl");
        std::vector<json> lines;
        for (std::string line; std::getline(in, line);) {
            lines.push_back(json::parse(line));
        }
        REQUIRE(lines.size() == 2);
        CHECK(lines[0].at("attempt") == 1);
        CHECK(lines[1].at("attempt") == 2);
        CHECK(lines[1].at("payload").at("prompt") == "p");
    }

    TEST_CASE("custom transports override the URL scheme") {
        struct Fixed final : Transport {
            TransportReply send(const ModelEndpoint&, const GenRequest&, const ArtifactStore&) override {
                return {"fixed reply", std::string(kMediaText), json::object()};
            }
        };
        TempDir dir("override");
        ArtifactStore store(dir.path());
        EndpointRegistry reg;
        reg.add({"remote", "http://127.0.0.1:9"});
        GenService svc(store, reg, fast_retry());
        svc.set_transport("remote", std::make_shared<Fixed>());
        CHECK(llm_complete(svc, "remote", {"storyteller", "hi", "", json::object()}, 1) == "fixed reply");
    }

    TEST_CASE("http transport posts to <base_url>/<kind> and decodes replies") {
        httplib::Server server;
        json seen;
        int calls = 0;
        server.Post("/v1/t2i", [&](const httplib::Request& req, httplib::Response& res) {
            ++calls;
            if (calls == 1) {
                res.status = 503;
                return;
            }
            seen = json::parse(req.body);
            seen["auth"] = req.get_header_value("Authorization");
            const std::string ppm = encode_ppm(Image(2, 2));
            res.set_content(json{{"data_base64", base64_encode(ppm)}, {"media_type", kMediaImage}}.dump(),
                            "application/json");
        });
        server.Post("/v1/llm", [&](const httplib::Request&, httplib::Response& res) {
            res.status = 400;
            res.set_content("bad prompt", "text/plain");
        });
        const int port = server.bind_to_any_port("127.0.0.1");
        std::jthread worker([&] { server.listen_after_bind(); });
        server.wait_until_ready();

        ::setenv("SHOTWEAVE_TEST_SECRET", "s3cret", 1);
        TempDir dir("http");
        ArtifactStore store(dir.path());
        EndpointRegistry reg;
        reg.add({"remote", "http://127.0.0.1:" + std::to_string(port) + "/v1/", "SHOTWEAVE_TEST_SECRET"});
        GenService svc(store, reg, fast_retry());
        const ArtifactRef ref = image_generate(svc, "remote", "a bridge", 5);
        CHECK(decode_ppm(store.read(ref)).width == 2);
        CHECK(calls == 2);
        CHECK(seen.at("kind") == "t2i");
        CHECK(seen.at("seed") == 5);
        CHECK(seen.at("payload").at("prompt") == "a bridge");
        CHECK(seen.at("auth") == "Bearer s3cret");

        try {
            llm_complete(svc, "remote", {"storyteller", "x", "", json::object()}, 1);
            FAIL("expected ClientError");
        } catch (const ClientError& e) {
            CHECK(e.attempts() == 1);
        }
        server.stop();
    }
}
