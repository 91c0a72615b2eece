#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "shotweave/gen_clients.hpp"
#include "shotweave/mock_transport.hpp"
#include "shotweave/prompts.hpp"
#include "shotweave/run_store.hpp"
#include "shotweave/screenplay.hpp"
#include "shotweave/storyboard.hpp"
#include "shotweave/synth_tracks.hpp"
#include "shotweave/taxonomy.hpp"
#include "shotweave/transition.hpp"

namespace shotweave {

// Input to a bidirectional point tracker: the two clips meeting at a shared
// keyframe (last frame of A == first frame of B).
struct TrackRequest {
    ArtifactRef clip_a;
    ArtifactRef clip_b;
    int clip_a_len = 0;
    int clip_b_len = 0;
    std::string movement_a;
    std::string movement_b;
    std::uint64_t seed = 0;
};

struct TrackerOutput {
    RawTrackSet backward;  // tracked into reversed clip A, frame 0 = anchor
    RawTrackSet forward;   // tracked into clip B, frame 0 = anchor
};

class PointTracker {
public:
    virtual ~PointTracker() = default;
    virtual TrackerOutput track(const TrackRequest& request) = 0;
    virtual std::string name() const = 0;
};

// Stand-in tracker: synthesizes camera-consistent tracks from the two
// movement labels (direction per family, seeded stall and ease lengths)
// and returns them split into the two tracking directions.
class MockTracker final : public PointTracker {
public:
    explicit MockTracker(int n_points = 48) : n_points_(n_points) {}
    TrackerOutput track(const TrackRequest& request) override;
    std::string name() const override { return "mock-tracker"; }

    // Motion profile the mock derives for a request; exposed for tests.
    static MotionProfile profile_for(const TrackRequest& request);

private:
    int n_points_;
};

struct ModelRoles {
    std::string storyteller;
    std::string cinematographer;
    std::vector<std::string> judges;  // optional retrieval audit after the screenplay
    std::string t2i;
    std::map<std::string, std::string> i2i;  // score-matrix model id -> endpoint id
    std::string video;
    std::string interpolator;
};

struct PipelineConfig {
    std::filesystem::path store_root;
    std::uint64_t seed = 0;
    Taxonomy taxonomy;
    ScoreMatrix scores;
    TieBreakPolicy tie_break;
    TransitionParams transition;
    int clip_frames = 48;
    std::set<Stage> gates;  // stages that wait for approval once complete
    int parallelism = 1;
    RetryPolicy retry;
    EndpointRegistry endpoints;
    ModelRoles roles;
    std::optional<std::filesystem::path> prompt_dir;
    int tracker_points = 48;

    // Throws ValidationError: unknown role endpoint, gate on a non-work
    // stage, clips too short for the truncation window, parallelism < 1.
    void validate() const;
};

// Every role bound to an in-process mock endpoint; keyframes at
// width x height.
PipelineConfig mock_pipeline_config(std::filesystem::path store_root, std::uint64_t seed = 0, int width = 128,
                                    int height = 72);

// Config document; relative paths resolve against `base_dir`. Omitted
// sections take the mock defaults.
PipelineConfig load_pipeline_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);
PipelineConfig load_pipeline_config_file(const std::filesystem::path& path);

struct RunOptions {
    // Halt right after this stage is checkpointed, as if the process died
    // at the stage boundary.
    std::optional<Stage> stop_after;
};

struct BatchReport {
    std::size_t total = 0;
    std::size_t final_count = 0;
    std::size_t failed_count = 0;
    std::size_t held_count = 0;  // paused at an approval gate
    std::vector<std::pair<std::string, std::string>> runs;  // run id -> stage or failure
};

nlohmann::json to_json(const BatchReport& report);

struct ManifestEntry {
    std::string run_id;
    ArtifactRef final_video;
    ArtifactRef edit_list;
    int total_frames = 0;
    std::string scene_description;
    std::vector<ShotTriplet> shots;
    std::string genre;
    std::string subject_count;
    std::string dynamicity;
    int shot_count = 0;
    std::vector<ArtifactRef> keyframes;
    std::vector<ArtifactRef> clips;
    std::vector<ArtifactRef> transitions;
    std::vector<std::string> transition_warnings;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    BalanceReport balance;
};

nlohmann::json to_json(const ManifestEntry& entry);
nlohmann::json to_json(const Manifest& manifest);

class Pipeline {
public:
    explicit Pipeline(PipelineConfig config);
    ~Pipeline();

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    const PipelineConfig& config() const { return config_; }
    RunStore& store() { return store_; }
    GenService& service() { return service_; }
    MockTransport& mock() { return service_.mock(); }
    const RoutingTable& routing() const { return routing_; }
    void set_tracker(std::shared_ptr<PointTracker> tracker) { tracker_ = std::move(tracker); }

    // Run id defaults to the sample id. ConflictError if it already exists.
    RunRecord create_run(const ControlSignals& signals, std::optional<std::string> run_id = std::nullopt);

    // create_run + advance.
    RunRecord run_sample(const ControlSignals& signals, const RunOptions& options = {});

    // Executes stages in order until final, a gate, a failure or
    // options.stop_after. A stage failure marks the run failed and returns.
    RunRecord advance(const std::string& run_id, const RunOptions& options = {});

    // Continues from the first incomplete stage. A final run is a no-op;
    // a run held at a gate stays held. NotFoundError for an unknown id.
    RunRecord resume(const std::string& run_id, const RunOptions& options = {});

    // At most `parallelism` samples in flight (config value when 0).
    BatchReport run_batch(const std::vector<ControlSignals>& samples, int parallelism = 0);

    // Gate actions; ConflictError unless the stage is awaiting approval
    // (regenerate also accepts a rejected stage).
    RunRecord approve(const std::string& run_id, Stage stage, const std::string& actor = "operator");
    // `edit`: {"scenario": text} or {"screenplay": doc} for the screenplay;
    // {"keyframes": [index, ...]} for the storyboard. An edit replaces the
    // artifact and leaves the stage awaiting approval of the new version;
    // a keyframe mark leaves it rejected until regenerated.
    RunRecord reject(const std::string& run_id, Stage stage, const nlohmann::json& edit,
                     const std::string& actor = "operator");
    RunRecord regenerate(const std::string& run_id, Stage stage, const std::string& actor = "operator");

    // Reads of stage artifacts.
    Screenplay load_screenplay(const RunRecord& record) const;
    Storyboard load_storyboard(const RunRecord& record) const;

    Manifest export_manifest() const;

private:
    struct Clients;

    class ActiveRun;

    nlohmann::json run_stage(RunRecord& record, Stage stage, std::optional<std::size_t> storyboard_from = {});
    nlohmann::json run_screenplay(RunRecord& record, std::uint64_t seed);
    nlohmann::json run_storyboard(RunRecord& record, std::uint64_t seed, std::optional<std::size_t> from);
    nlohmann::json run_clips(RunRecord& record, std::uint64_t seed);
    nlohmann::json run_transitions(RunRecord& record, std::uint64_t seed);
    nlohmann::json run_final(RunRecord& record);
    std::uint64_t stage_seed(const RunRecord& record, Stage stage) const;
    void log(const RunRecord& record, const std::string& event, Stage stage, nlohmann::json details = {});

    PipelineConfig config_;
    RunStore store_;
    GenService service_;
    PromptLibrary prompts_;
    RoutingTable routing_;
    std::unique_ptr<Clients> clients_;
    std::shared_ptr<PointTracker> tracker_;

    std::mutex active_mutex_;
    std::set<std::string> active_;  // runs currently executing a stage
};

}  // namespace shotweave
