#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

#include "shotweave/pipeline.hpp"

namespace shotweave {

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;    // 0 picks a free port
    std::string token;  // shared bearer token; empty disables auth
    std::optional<std::filesystem::path> static_dir;  // mounted at /
};

// Review API over a pipeline's run store:
//   GET  /api/health
//   GET  /api/runs                                  run summaries
//   POST /api/runs                                  {signals, run_id?} -> 202, runs in background
//   GET  /api/runs/{id}                             detail: stages, screenplay text, keyframes
//   GET  /api/runs/{id}/provenance
//   GET  /api/runs/{id}/transcripts
//   GET  /api/runs/{id}/stages/{stage}
//   POST /api/runs/{id}/stages/{stage}/approve      continues the run in background
//   POST /api/runs/{id}/stages/{stage}/reject       body: edit document
//   POST /api/runs/{id}/stages/{stage}/regenerate
//   POST /api/runs/{id}/resume
//   GET  /api/artifacts/{digest}                    raw bytes
//   GET  /api/artifacts/{digest}/meta               provenance sidecar
//   GET  /api/artifacts/{digest}/preview.bmp        image, or ?frame=n of a clip
//   GET  /api/manifest
// Errors are {error, message} with 400/401/404/409/500.
class ReviewServer {
public:
    ReviewServer(Pipeline& pipeline, ServeOptions options);
    ~ReviewServer();

    ReviewServer(const ReviewServer&) = delete;
    ReviewServer& operator=(const ReviewServer&) = delete;

    // Binds and serves on a background thread; returns the bound port.
    int start();
    // Binds and serves on the calling thread until stop().
    void run();
    void stop();
    // Blocks until no background continuation is running.
    void wait_idle();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// Response documents, shared with the CLI.
nlohmann::json run_summary(const RunRecord& record);
nlohmann::json run_detail(Pipeline& pipeline, const RunRecord& record);

}  // namespace shotweave
