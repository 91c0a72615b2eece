#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "shotweave/gen_clients.hpp"
#include "shotweave/screenplay.hpp"
#include "shotweave/taxonomy.hpp"

namespace shotweave {

enum class Stage { planned, screenplay, storyboard, clips, transitions, final, failed };

inline constexpr Stage kWorkStages[] = {Stage::screenplay, Stage::storyboard, Stage::clips, Stage::transitions,
                                        Stage::final};

std::string_view to_string(Stage stage);
Stage stage_from_string(std::string_view name);

enum class GateState { automatic, awaiting_approval, approved, rejected };

std::string_view to_string(GateState gate);
GateState gate_from_string(std::string_view name);

struct StageRecord {
    bool complete = false;
    GateState gate = GateState::automatic;
    int attempt = 0;  // bumped by every regeneration
    nlohmann::json artifacts = nlohmann::json::object();
    std::string started_at;
    std::string completed_at;
};

// Checkpointed state of one sample. `stage` is the last completed stage, or
// `failed` with the cause in `failed_stage` / `failure`.
struct RunRecord {
    std::string run_id;
    ControlSignals signals;
    std::uint64_t seed = 0;
    Stage stage = Stage::planned;
    std::optional<Stage> failed_stage;
    std::string failure;
    std::map<Stage, StageRecord> stages;  // one entry per work stage
    std::string created_at;
    std::string updated_at;

    StageRecord& at(Stage s);
    const StageRecord& at(Stage s) const;
    // Last stage whose artifacts are complete (planned when none).
    Stage last_completed() const;
    // First work stage not yet complete; nullopt once final.
    std::optional<Stage> next_stage() const;
    // The completed stage holding the run at a gate, if any.
    std::optional<Stage> held_at() const;
};

nlohmann::json to_json(const RunRecord& record);
// ValidationError("corrupt checkpoint ...") on a malformed document.
RunRecord run_record_from_json(const nlohmann::json& doc);

RunRecord make_run_record(std::string run_id, ControlSignals signals, std::uint64_t seed);

// ISO-8601 UTC with milliseconds.
std::string utc_now();

// Writes `bytes` to `path` through a temporary file and a rename.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

// Layout under the root:
//   artifacts/, cache/, wire.jsonl       content-addressed store
//   runs/<run_id>/record.json            checkpoint, replaced atomically
//   runs/<run_id>/provenance.jsonl       append-only event log
//   runs/<run_id>/transcripts.jsonl      LLM exchanges
class RunStore {
public:
    explicit RunStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    ArtifactStore& artifacts() { return artifacts_; }
    const ArtifactStore& artifacts() const { return artifacts_; }

    bool exists(const std::string& run_id) const;
    RunRecord load(const std::string& run_id) const;  // NotFoundError, ValidationError
    void save(RunRecord& record);                     // stamps updated_at
    std::vector<std::string> list() const;            // sorted

    void append_provenance(const std::string& run_id, nlohmann::json event);
    std::vector<nlohmann::json> provenance(const std::string& run_id) const;
    void append_transcripts(const std::string& run_id, const std::vector<Transcript>& transcripts);
    std::vector<nlohmann::json> transcripts(const std::string& run_id) const;

    // Serializes mutations of one run across threads.
    std::mutex& lock_for(const std::string& run_id);

    std::filesystem::path run_dir(const std::string& run_id) const;

private:
    void append_line(const std::filesystem::path& path, const std::string& line);

    std::filesystem::path root_;
    ArtifactStore artifacts_;
    std::mutex locks_mutex_;
    std::map<std::string, std::unique_ptr<std::mutex>> locks_;
    std::mutex append_mutex_;
};

// Run ids become directory names: [A-Za-z0-9._-], 1..128 chars, no leading dot.
bool valid_run_id(std::string_view id);

}  // namespace shotweave
