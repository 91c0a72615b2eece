#include "shotweave/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "shotweave/error.hpp"
#include "shotweave/media.hpp"
#include "shotweave/rng.hpp"

namespace shotweave {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

bool ends_with(const std::string& s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Image-space direction of content motion for a camera move: the scene
// slides opposite to the camera.
double content_angle(const std::string& movement, Rng& rng) {
    if (ends_with(movement, "left")) return 0.0;
    if (ends_with(movement, "right")) return 180.0;
    if (ends_with(movement, "up")) return 90.0;
    if (ends_with(movement, "down")) return 270.0;
    if (ends_with(movement, " in")) return 45.0;
    if (ends_with(movement, " out")) return 225.0;
    return rng.uniform(0.0, 360.0);
}

ClipMotion motion_for(const std::string& movement, int length, Rng& rng) {
    ClipMotion m;
    m.length = length;
    m.angle_deg = content_angle(movement, rng);
    if (movement == "static") {
        // Handheld drift only.
        m.cruise_speed = 0.6;
        m.ease_min_speed = 0.6;
    }
    const int max_stall = std::clamp(length / 4, 0, 12);
    m.stall_frames = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_stall) + 1));
    m.ease_frames = static_cast<int>(rng.below(9));
    return m;
}

ArtifactRef ref_at(const json& doc, const char* key) { return artifact_ref_from_json(doc.at(key)); }

json refs_json(const std::vector<ArtifactRef>& refs) {
    json out = json::array();
    for (const auto& r : refs) {
        out.push_back(to_json(r));
    }
    return out;
}

std::vector<ArtifactRef> refs_from(const json& arr) {
    std::vector<ArtifactRef> out;
    for (const auto& r : arr) {
        out.push_back(artifact_ref_from_json(r));
    }
    return out;
}

}  // namespace

MotionProfile MockTracker::profile_for(const TrackRequest& request) {
    Rng rng(derive_seed(request.seed, "mock-tracker"));
    MotionProfile p;
    p.clip_a = motion_for(request.movement_a, request.clip_a_len, rng);
    p.clip_b = motion_for(request.movement_b, request.clip_b_len, rng);
    return p;
}

TrackerOutput MockTracker::track(const TrackRequest& request) {
    const SynthResult synth = synth_tracks(profile_for(request), n_points_, derive_seed(request.seed, "points"));
    return {split_backward(synth.tracks), split_forward(synth.tracks)};
}

void PipelineConfig::validate() const {
    auto need = [&](const std::string& id, const char* role) {
        if (id.empty() || !endpoints.contains(id)) {
            throw ValidationError(std::string("config: role '") + role + "' names unknown endpoint '" + id + "'");
        }
    };
    need(roles.storyteller, "storyteller");
    need(roles.cinematographer, "cinematographer");
    need(roles.t2i, "t2i");
    need(roles.video, "video");
    need(roles.interpolator, "interpolator");
    for (const auto& j : roles.judges) {
        need(j, "judge");
    }
    for (const auto& [model, endpoint] : roles.i2i) {
        need(endpoint, "i2i");
        if (std::ranges::find(scores.models, model) == scores.models.end()) {
            throw ValidationError("config: i2i pool entry '" + model + "' is not in the score matrix");
        }
    }
    for (Stage g : gates) {
        if (std::ranges::find(kWorkStages, g) == std::end(kWorkStages)) {
            throw ValidationError("config: cannot gate stage '" + std::string(to_string(g)) + "'");
        }
    }
    transition.validate();
    if (clip_frames < 2 || clip_frames - 1 < transition.window) {
        throw ValidationError("config: clip_frames " + std::to_string(clip_frames) +
                              " is too short for a truncation window of " + std::to_string(transition.window));
    }
    if (parallelism < 1) {
        throw ValidationError("config: parallelism must be at least 1");
    }
    if (tracker_points < 1) {
        throw ValidationError("config: tracker_points must be at least 1");
    }
}

PipelineConfig mock_pipeline_config(fs::path store_root, std::uint64_t seed, int width, int height) {
    PipelineConfig c;
    c.store_root = std::move(store_root);
    c.seed = seed;
    c.taxonomy = default_taxonomy();
    c.scores = default_score_matrix();
    c.retry.base_delay = std::chrono::milliseconds(1);
    c.retry.max_delay = std::chrono::milliseconds(4);
    const json size{{"width", width}, {"height", height}};
    auto add = [&](const std::string& id, json options = json::object()) {
        c.endpoints.add({id, "mock://" + id, "", 0, 60, std::move(options)});
    };
    add("mock-storyteller");
    add("mock-cinematographer");
    for (const char* j : {"mock-judge-1", "mock-judge-2", "mock-judge-3"}) {
        add(j);
    }
    add("mock-t2i", size);
    add("mock-flf2v");
    add("mock-interp");
    for (const auto& model : c.scores.models) {
        add(model, size);
        c.roles.i2i[model] = model;
    }
    c.roles.storyteller = "mock-storyteller";
    c.roles.cinematographer = "mock-cinematographer";
    c.roles.t2i = "mock-t2i";
    c.roles.video = "mock-flf2v";
    c.roles.interpolator = "mock-interp";
    return c;
}

PipelineConfig load_pipeline_config(const json& doc, const fs::path& base_dir) {
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base_dir / p; };
    int width = 128, height = 72;
    if (doc.contains("mock_size")) {
        width = doc.at("mock_size").at(0).get<int>();
        height = doc.at("mock_size").at(1).get<int>();
    }
    PipelineConfig c = mock_pipeline_config(resolve(doc.value("store", "shotweave-store")),
                                            doc.value("seed", std::uint64_t{0}), width, height);
    try {
        if (doc.contains("taxonomy")) {
            const json& t = doc.at("taxonomy");
            c.taxonomy = t.is_string() ? load_taxonomy_file(resolve(t.get<std::string>()).string()) : load_taxonomy(t);
        }
        if (doc.contains("scores")) {
            const json& s = doc.at("scores");
            c.scores = s.is_string() ? load_score_matrix_file(resolve(s.get<std::string>()).string())
                                     : load_score_matrix(s);
        }
        if (doc.contains("tie_break")) {
            c.tie_break.criteria = doc.at("tie_break").get<std::vector<std::string>>();
        }
        if (doc.contains("transition")) {
            c.transition = transition_params_from_json(doc.at("transition"));
        }
        c.clip_frames = doc.value("clip_frames", c.clip_frames);
        c.parallelism = doc.value("parallelism", c.parallelism);
        c.tracker_points = doc.value("tracker_points", c.tracker_points);
        if (doc.contains("gates")) {
            for (const auto& g : doc.at("gates")) {
                c.gates.insert(stage_from_string(g.get<std::string>()));
            }
        }
        if (doc.contains("retry")) {
            const json& r = doc.at("retry");
            c.retry.max_attempts = r.value("max_attempts", c.retry.max_attempts);
            c.retry.base_delay = std::chrono::milliseconds(r.value("base_delay_ms", 200));
            c.retry.max_delay = std::chrono::milliseconds(r.value("max_delay_ms", 5000));
            c.retry.jitter = r.value("jitter", c.retry.jitter);
        }
        if (doc.contains("endpoints")) {
            c.endpoints = EndpointRegistry::from_json(doc.at("endpoints"));
            c.roles.i2i.clear();
            for (const auto& model : c.scores.models) {
                if (c.endpoints.contains(model)) {
                    c.roles.i2i[model] = model;
                }
            }
        }
        if (doc.contains("roles")) {
            const json& r = doc.at("roles");
            c.roles.storyteller = r.value("storyteller", c.roles.storyteller);
            c.roles.cinematographer = r.value("cinematographer", c.roles.cinematographer);
            c.roles.t2i = r.value("t2i", c.roles.t2i);
            c.roles.video = r.value("video", c.roles.video);
            c.roles.interpolator = r.value("interpolator", c.roles.interpolator);
            if (r.contains("judges")) {
                c.roles.judges = r.at("judges").get<std::vector<std::string>>();
            }
            if (r.contains("i2i")) {
                c.roles.i2i = r.at("i2i").get<std::map<std::string, std::string>>();
            }
        }
        if (doc.contains("prompts")) {
            c.prompt_dir = resolve(doc.at("prompts").get<std::string>());
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

PipelineConfig load_pipeline_config_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open config " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return load_pipeline_config(doc, path.parent_path());
}

json to_json(const BatchReport& r) {
    json runs = json::array();
    for (const auto& [id, status] : r.runs) {
        runs.push_back({{"run_id", id}, {"status", status}});
    }
    return json{{"total", r.total},
                {"final", r.final_count},
                {"failed", r.failed_count},
                {"held", r.held_count},
                {"runs", std::move(runs)}};
}

json to_json(const ManifestEntry& e) {
    json shots = json::array();
    for (const auto& t : e.shots) {
        shots.push_back(to_json(t));
    }
    return json{{"run_id", e.run_id},
                {"final_video", to_json(e.final_video)},
                {"edit_list", to_json(e.edit_list)},
                {"total_frames", e.total_frames},
                {"scene_description", e.scene_description},
                {"shots", std::move(shots)},
                {"genre", e.genre},
                {"subject_count", e.subject_count},
                {"dynamicity", e.dynamicity},
                {"shot_count", e.shot_count},
                {"keyframes", refs_json(e.keyframes)},
                {"clips", refs_json(e.clips)},
                {"transitions", refs_json(e.transitions)},
                {"transition_warnings", e.transition_warnings}};
}

json to_json(const Manifest& m) {
    json entries = json::array();
    for (const auto& e : m.entries) {
        entries.push_back(to_json(e));
    }
    return json{{"count", m.entries.size()}, {"entries", std::move(entries)}, {"balance", to_json(m.balance)}};
}

struct Pipeline::Clients {
    std::unique_ptr<ServiceClient> storyteller;
    std::unique_ptr<ServiceClient> cinematographer;
    std::vector<std::unique_ptr<ServiceClient>> judges;
    std::unique_ptr<ServiceClient> t2i;
    std::map<std::string, std::unique_ptr<ServiceClient>> i2i;
    std::map<std::string, ImageEditClient*> pool;
    std::unique_ptr<ServiceClient> video;
    std::unique_ptr<ServiceClient> interpolator;
};

// Marks a run as executing so two callers never run its stages at once.
class Pipeline::ActiveRun {
public:
    ActiveRun(Pipeline& p, std::string id) : p_(p), id_(std::move(id)) {
        std::lock_guard lock(p_.active_mutex_);
        if (!p_.active_.insert(id_).second) {
            throw ConflictError("run '" + id_ + "' is already executing");
        }
    }
    ~ActiveRun() {
        std::lock_guard lock(p_.active_mutex_);
        p_.active_.erase(id_);
    }
    ActiveRun(const ActiveRun&) = delete;
    ActiveRun& operator=(const ActiveRun&) = delete;

private:
    Pipeline& p_;
    std::string id_;
};

Pipeline::Pipeline(PipelineConfig config)
    : config_(std::move(config)),
      store_(config_.store_root),
      service_(store_.artifacts(), config_.endpoints, config_.retry),
      prompts_(config_.prompt_dir ? PromptLibrary(*config_.prompt_dir) : PromptLibrary()),
      routing_(build_routing(config_.scores, config_.tie_break)),
      clients_(std::make_unique<Clients>()),
      tracker_(std::make_shared<MockTracker>(config_.tracker_points)) {
    config_.validate();
    auto make = [&](const std::string& id) { return std::make_unique<ServiceClient>(service_, id); };
    clients_->storyteller = make(config_.roles.storyteller);
    clients_->cinematographer = make(config_.roles.cinematographer);
    for (const auto& j : config_.roles.judges) {
        clients_->judges.push_back(make(j));
    }
    clients_->t2i = make(config_.roles.t2i);
    clients_->video = make(config_.roles.video);
    clients_->interpolator = make(config_.roles.interpolator);
    for (const auto& [model, endpoint] : config_.roles.i2i) {
        auto client = make(endpoint);
        clients_->pool[model] = client.get();
        clients_->i2i[model] = std::move(client);
    }
}

Pipeline::~Pipeline() = default;

std::uint64_t Pipeline::stage_seed(const RunRecord& record, Stage stage) const {
    return derive_seed(record.seed, std::string(to_string(stage)) + "#" + std::to_string(record.at(stage).attempt));
}

void Pipeline::log(const RunRecord& record, const std::string& event, Stage stage, json details) {
    json entry{{"event", event}, {"run_id", record.run_id}, {"stage", to_string(stage)}};
    if (!details.is_null()) {
        entry["details"] = std::move(details);
    }
    store_.append_provenance(record.run_id, std::move(entry));
}

RunRecord Pipeline::create_run(const ControlSignals& signals, std::optional<std::string> run_id) {
    validate_signals(signals, config_.taxonomy);
    std::string id = run_id.value_or(signals.sample_id);
    if (id.empty()) {
        throw ValidationError("run id is empty and the sample has no id");
    }
    if (!valid_run_id(id)) {
        throw ValidationError("invalid run id '" + id + "'");
    }
    std::lock_guard lock(store_.lock_for(id));
    if (store_.exists(id)) {
        throw ConflictError("run '" + id + "' already exists");
    }
    RunRecord record = make_run_record(id, signals, derive_seed(config_.seed, id));
    store_.save(record);
    log(record, "created", Stage::planned, json{{"signals", to_json(signals)}, {"seed", record.seed}});
    return record;
}

RunRecord Pipeline::run_sample(const ControlSignals& signals, const RunOptions& options) {
    const RunRecord record = create_run(signals);
    return advance(record.run_id, options);
}

RunRecord Pipeline::advance(const std::string& run_id, const RunOptions& options) {
    ActiveRun active(*this, run_id);
    RunRecord record = store_.load(run_id);
    if (record.stage == Stage::failed) {
        log(record, "retrying", *record.failed_stage, json{{"previous_failure", record.failure}});
        record.stage = record.last_completed();
        record.failed_stage.reset();
        record.failure.clear();
        std::lock_guard lock(store_.lock_for(run_id));
        store_.save(record);
    }
    while (!record.held_at()) {
        const auto next = record.next_stage();
        if (!next) {
            break;
        }
        const Stage stage = *next;
        StageRecord& st = record.at(stage);
        st.started_at = utc_now();
        try {
            st.artifacts = run_stage(record, stage);
        } catch (const std::exception& e) {
            record.stage = Stage::failed;
            record.failed_stage = stage;
            record.failure = e.what();
            {
                std::lock_guard lock(store_.lock_for(run_id));
                store_.save(record);
            }
            log(record, "stage_failed", stage, json{{"error", e.what()}});
            return record;
        }
        st.complete = true;
        st.completed_at = utc_now();
        st.gate = config_.gates.contains(stage) ? GateState::awaiting_approval : GateState::automatic;
        record.stage = stage;
        {
            std::lock_guard lock(store_.lock_for(run_id));
            store_.save(record);
        }
        log(record, "stage_completed", stage, json{{"artifacts", st.artifacts}, {"attempt", st.attempt}});
        if (st.gate == GateState::awaiting_approval) {
            log(record, "awaiting_approval", stage);
        }
        if (options.stop_after == stage) {
            break;
        }
    }
    return record;
}

RunRecord Pipeline::resume(const std::string& run_id, const RunOptions& options) {
    const RunRecord record = store_.load(run_id);
    if (record.stage == Stage::final) {
        return record;
    }
    log(record, "resumed", record.stage);
    return advance(run_id, options);
}

BatchReport Pipeline::run_batch(const std::vector<ControlSignals>& samples, int parallelism) {
    const int workers_wanted = parallelism == 0 ? config_.parallelism : parallelism;
    if (workers_wanted < 1) {
        throw PreconditionError("run_batch: parallelism must be at least 1");
    }
    BatchReport report;
    report.total = samples.size();
    std::vector<std::string> status(samples.size());
    std::vector<std::string> ids(samples.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < samples.size(); i = next.fetch_add(1)) {
            ids[i] = samples[i].sample_id;
            try {
                const RunRecord r = store_.exists(samples[i].sample_id) ? resume(samples[i].sample_id)
                                                                        : run_sample(samples[i]);
                if (r.stage == Stage::failed) {
                    status[i] = "failed at " + std::string(to_string(*r.failed_stage)) + ": " + r.failure;
                } else if (const auto held = r.held_at()) {
                    status[i] = "held at " + std::string(to_string(*held));
                } else {
                    status[i] = std::string(to_string(r.stage));
                }
            } catch (const std::exception& e) {
                status[i] = std::string("failed: ") + e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(workers_wanted), samples.size());
        for (std::size_t w = 0; w < n; ++w) {
            pool.emplace_back(worker);
        }
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (status[i] == "final") {
            ++report.final_count;
        } else if (starts_with(status[i], "held")) {
            ++report.held_count;
        } else {
            ++report.failed_count;
        }
        report.runs.emplace_back(ids[i], status[i]);
    }
    return report;
}

json Pipeline::run_stage(RunRecord& record, Stage stage, std::optional<std::size_t> storyboard_from) {
    const std::uint64_t seed = stage_seed(record, stage);
    switch (stage) {
        case Stage::screenplay: return run_screenplay(record, seed);
        case Stage::storyboard: return run_storyboard(record, seed, storyboard_from);
        case Stage::clips: return run_clips(record, seed);
        case Stage::transitions: return run_transitions(record, seed);
        case Stage::final: return run_final(record);
        default: break;
    }
    throw PreconditionError("stage '" + std::string(to_string(stage)) + "' has no work");
}

json Pipeline::run_screenplay(RunRecord& record, std::uint64_t seed) {
    std::vector<Transcript> transcripts;
    const ScreenplayContext ctx{config_.taxonomy, prompts_, seed, &transcripts};
    struct Flush {
        RunStore& store;
        const std::string& id;
        std::vector<Transcript>& t;
        ~Flush() { store.append_transcripts(id, t); }
    } flush{store_, record.run_id, transcripts};

    const SceneRecord scene = compose_scene(record.signals, *clients_->storyteller, ctx);
    const Screenplay sp = build_screenplay(scene, record.signals, *clients_->cinematographer, ctx);
    validate_screenplay(sp, config_.taxonomy);

    const json prov{{"run_id", record.run_id}, {"stage", "screenplay"}};
    json out{{"screenplay", to_json(store_.artifacts().put(to_json(sp).dump(2), kMediaJson, prov))},
             {"text", to_json(store_.artifacts().put(render_screenplay_text(sp), kMediaText, prov))}};
    if (!clients_->judges.empty()) {
        std::vector<LlmClient*> judges;
        for (const auto& j : clients_->judges) {
            judges.push_back(j.get());
        }
        const RetrievalAudit audit = audit_screenplay(sp, record.signals, judges, ctx);
        out["audit"] = to_json(store_.artifacts().put(to_json(audit).dump(2), kMediaJson, prov));
    }
    return out;
}

Screenplay Pipeline::load_screenplay(const RunRecord& record) const {
    const StageRecord& st = record.at(Stage::screenplay);
    if (!st.complete) {
        throw PreconditionError("run '" + record.run_id + "' has no screenplay yet");
    }
    return screenplay_from_json(json::parse(store_.artifacts().read(ref_at(st.artifacts, "screenplay"))));
}

Storyboard Pipeline::load_storyboard(const RunRecord& record) const {
    const StageRecord& st = record.at(Stage::storyboard);
    if (!st.complete) {
        throw PreconditionError("run '" + record.run_id + "' has no storyboard yet");
    }
    return storyboard_from_json(json::parse(store_.artifacts().read(ref_at(st.artifacts, "storyboard"))));
}

json Pipeline::run_storyboard(RunRecord& record, std::uint64_t seed, std::optional<std::size_t> from) {
    const Screenplay sp = load_screenplay(record);
    const Storyboard board =
        from ? regenerate_keyframes(load_storyboard(record), *from, sp, config_.taxonomy, routing_, *clients_->t2i,
                                    clients_->pool, seed)
             : generate_storyboard(sp, config_.taxonomy, routing_, *clients_->t2i, clients_->pool, seed);
    std::vector<ArtifactRef> frames;
    json models = json::array();
    for (const auto& k : board.keyframes) {
        frames.push_back(k.image);
        models.push_back(k.model_id);
    }
    const json prov{{"run_id", record.run_id}, {"stage", "storyboard"}};
    return json{{"storyboard", to_json(store_.artifacts().put(to_json(board).dump(2), kMediaJson, prov))},
                {"keyframes", refs_json(frames)},
                {"models", std::move(models)}};
}

json Pipeline::run_clips(RunRecord& record, std::uint64_t seed) {
    const Screenplay sp = load_screenplay(record);
    const Storyboard board = load_storyboard(record);
    std::vector<ArtifactRef> clips;
    json frames = json::array();
    for (std::size_t i = 0; i < sp.triplets.size(); ++i) {
        const ArtifactRef clip = clients_->video->first_last_to_video(
            board.keyframes[i].image, board.keyframes[i + 1].image, to_json(sp.triplets[i]), config_.clip_frames,
            derive_seed(seed, "clip-" + std::to_string(i)));
        const std::size_t n = decode_clip(store_.artifacts().read(clip)).size();
        if (n != static_cast<std::size_t>(config_.clip_frames)) {
            throw ValidationError("video model returned " + std::to_string(n) + " frames for shot " +
                                  std::to_string(i + 1) + ", expected " + std::to_string(config_.clip_frames));
        }
        clips.push_back(clip);
        frames.push_back(n);
    }
    return json{{"clips", refs_json(clips)}, {"frames", std::move(frames)}};
}

json Pipeline::run_transitions(RunRecord& record, std::uint64_t seed) {
    const Screenplay sp = load_screenplay(record);
    const json& clip_art = record.at(Stage::clips).artifacts;
    const std::vector<ArtifactRef> clips = refs_from(clip_art.at("clips"));
    const auto lengths = clip_art.at("frames").get<std::vector<int>>();
    const json prov{{"run_id", record.run_id}, {"stage", "transitions"}};
    ArtifactStore& art = store_.artifacts();

    json out = json::array();
    for (std::size_t i = 0; i + 1 < clips.size(); ++i) {
        const std::string tag = std::to_string(i);
        TrackRequest req{clips[i],
                         clips[i + 1],
                         lengths[i],
                         lengths[i + 1],
                         sp.triplets[i].movement,
                         sp.triplets[i + 1].movement,
                         derive_seed(seed, "track-" + tag)};
        const TrackerOutput tracked = tracker_->track(req);
        const MergeResult merged = merge_bidirectional(tracked.backward, tracked.forward);
        const TransitionPlan plan = plan_transition(merged.tracks, config_.transition);
        std::vector<std::string> warnings = merged.warnings;
        warnings.insert(warnings.end(), plan.warnings.begin(), plan.warnings.end());

        const ArtifactRef tracks_ref = art.put(to_json(merged.tracks).dump(), kMediaJson, prov);
        const ArtifactRef field_ref = art.put(to_json(plan.field).dump(), kMediaJson, prov);
        const ArtifactRef plan_ref = art.put(to_json(plan).dump(), kMediaJson, prov);

        const Clip clip_a = decode_clip(art.read(clips[i]));
        const Clip clip_b = decode_clip(art.read(clips[i + 1]));
        const ArtifactRef first =
            art.put(encode_ppm(clip_a[static_cast<std::size_t>(lengths[i] - 1 - plan.cut_a)]), kMediaImage, prov);
        const ArtifactRef last = art.put(encode_ppm(clip_b[static_cast<std::size_t>(plan.cut_b)]), kMediaImage, prov);
        const ArtifactRef clip =
            clients_->interpolator->interpolate(first, last, field_ref, derive_seed(seed, "transition-" + tag));
        const std::size_t n = decode_clip(art.read(clip)).size();
        if (n != static_cast<std::size_t>(config_.transition.T)) {
            throw ValidationError("interpolator returned " + std::to_string(n) + " frames, expected T=" +
                                  std::to_string(config_.transition.T));
        }
        out.push_back({{"clip", to_json(clip)},
                       {"frames", n},
                       {"T", config_.transition.T},
                       {"plan", to_json(plan_ref)},
                       {"control_field", to_json(field_ref)},
                       {"tracks", to_json(tracks_ref)},
                       {"boundary_first", to_json(first)},
                       {"boundary_last", to_json(last)},
                       {"cut_a", plan.cut_a},
                       {"cut_b", plan.cut_b},
                       {"clip_a_len", lengths[i]},
                       {"clip_b_len", lengths[i + 1]},
                       {"tracker", tracker_->name()},
                       {"warnings", warnings}});
    }
    return json{{"transitions", std::move(out)}};
}

json Pipeline::run_final(RunRecord& record) {
    const json& clip_art = record.at(Stage::clips).artifacts;
    const std::vector<ArtifactRef> clips = refs_from(clip_art.at("clips"));
    const auto lengths = clip_art.at("frames").get<std::vector<int>>();
    std::vector<ClipSpan> spans;
    for (std::size_t i = 0; i < clips.size(); ++i) {
        spans.push_back({clips[i].digest, lengths[i]});
    }
    std::vector<TransitionPlan> plans;
    std::vector<ClipSpan> transitions;
    for (const auto& t : record.at(Stage::transitions).artifacts.at("transitions")) {
        TransitionPlan p;
        p.cut_a = t.at("cut_a").get<int>();
        p.cut_b = t.at("cut_b").get<int>();
        p.clip_a_len = t.at("clip_a_len").get<int>();
        p.clip_b_len = t.at("clip_b_len").get<int>();
        p.params = config_.transition;
        p.params.T = t.at("T").get<int>();
        plans.push_back(std::move(p));
        transitions.push_back({t.at("clip").at("digest").get<std::string>(), t.at("frames").get<int>()});
    }
    const CutList cuts = stitch_sequence(spans, plans, transitions);

    ArtifactStore& art = store_.artifacts();
    std::map<std::string, Clip> decoded;
    Clip video;
    video.reserve(static_cast<std::size_t>(cuts.total_frames));
    for (const auto& e : cuts.entries) {
        auto it = decoded.find(e.ref);
        if (it == decoded.end()) {
            it = decoded.emplace(e.ref, decode_clip(art.read(e.ref))).first;
        }
        for (int f = e.src_in; f <= e.src_out; ++f) {
            video.push_back(it->second.at(static_cast<std::size_t>(f)));
        }
    }
    const json prov{{"run_id", record.run_id}, {"stage", "final"}};
    const ArtifactRef video_ref = art.put(encode_clip(video), kMediaClip, prov);
    const ArtifactRef edl_ref = art.put(to_json(cuts).dump(2), kMediaJson, prov);
    return json{{"video", to_json(video_ref)}, {"edl", to_json(edl_ref)}, {"total_frames", cuts.total_frames}};
}

RunRecord Pipeline::approve(const std::string& run_id, Stage stage, const std::string& actor) {
    std::lock_guard lock(store_.lock_for(run_id));
    RunRecord record = store_.load(run_id);
    StageRecord& st = record.at(stage);
    if (!st.complete || st.gate != GateState::awaiting_approval) {
        throw ConflictError("stage '" + std::string(to_string(stage)) + "' of run '" + run_id +
                            "' is not awaiting approval (gate: " + std::string(to_string(st.gate)) + ")");
    }
    st.gate = GateState::approved;
    store_.save(record);
    log(record, "approved", stage, json{{"actor", actor}});
    return record;
}

RunRecord Pipeline::reject(const std::string& run_id, Stage stage, const json& edit, const std::string& actor) {
    std::lock_guard lock(store_.lock_for(run_id));
    RunRecord record = store_.load(run_id);
    StageRecord& st = record.at(stage);
    if (!st.complete || st.gate != GateState::awaiting_approval) {
        throw ConflictError("stage '" + std::string(to_string(stage)) + "' of run '" + run_id +
                            "' is not awaiting approval (gate: " + std::string(to_string(st.gate)) + ")");
    }
    json details{{"actor", actor}};
    if (edit.is_object() && edit.contains("note")) {
        details["note"] = edit.at("note");
    }
    const bool screenplay_edit =
        stage == Stage::screenplay && edit.is_object() && (edit.contains("scenario") || edit.contains("screenplay"));
    if (screenplay_edit) {
        Screenplay sp = load_screenplay(record);
        if (edit.contains("screenplay")) {
            sp = screenplay_from_json(edit.at("screenplay"));
            if (!(sp.signals == record.signals)) {
                throw ValidationError("edited screenplay must keep the run's control signals");
            }
        } else {
            sp.scene.scenario = edit.at("scenario").get<std::string>();
        }
        validate_screenplay(sp, config_.taxonomy);
        const json prov{{"run_id", record.run_id}, {"stage", "screenplay"}, {"edited_by", actor}};
        json replaced = st.artifacts;
        st.artifacts["screenplay"] = to_json(store_.artifacts().put(to_json(sp).dump(2), kMediaJson, prov));
        st.artifacts["text"] = to_json(store_.artifacts().put(render_screenplay_text(sp), kMediaText, prov));
        st.artifacts["edited"] = true;
        details["edit"] = {{"previous", replaced.at("screenplay")},
                           {"replacement", st.artifacts.at("screenplay")},
                           {"scenario", sp.scene.scenario}};
        // The edited version now waits for its own approval.
        st.gate = GateState::awaiting_approval;
    } else {
        if (stage == Stage::storyboard && edit.is_object() && edit.contains("keyframes")) {
            const auto marks = edit.at("keyframes").get<std::vector<std::size_t>>();
            const std::size_t n = st.artifacts.at("keyframes").size();
            for (std::size_t k : marks) {
                if (k >= n) {
                    throw ValidationError("keyframe index " + std::to_string(k) + " outside the storyboard");
                }
            }
            st.artifacts["regenerate"] = marks;
            details["keyframes"] = marks;
        }
        st.gate = GateState::rejected;
    }
    store_.save(record);
    log(record, "rejected", stage, std::move(details));
    return record;
}

RunRecord Pipeline::regenerate(const std::string& run_id, Stage stage, const std::string& actor) {
    ActiveRun active(*this, run_id);
    std::unique_lock lock(store_.lock_for(run_id));
    RunRecord record = store_.load(run_id);
    StageRecord& st = record.at(stage);
    if (!st.complete || (st.gate != GateState::awaiting_approval && st.gate != GateState::rejected)) {
        throw ConflictError("stage '" + std::string(to_string(stage)) + "' of run '" + run_id +
                            "' is not held for review (gate: " + std::string(to_string(st.gate)) + ")");
    }
    std::optional<std::size_t> from;
    if (stage == Stage::storyboard && st.artifacts.contains("regenerate")) {
        const auto marks = st.artifacts.at("regenerate").get<std::vector<std::size_t>>();
        if (!marks.empty()) {
            from = *std::ranges::min_element(marks);
        }
    }
    const json previous = st.artifacts;
    ++st.attempt;
    json artifacts = run_stage(record, stage, from);
    st.artifacts = std::move(artifacts);
    st.completed_at = utc_now();
    st.gate = GateState::awaiting_approval;
    bool later = false;
    for (Stage s : kWorkStages) {
        if (later) {
            record.at(s) = StageRecord{};
        }
        later = later || s == stage;
    }
    record.stage = stage;
    store_.save(record);
    log(record, "regenerated", stage,
        json{{"actor", actor}, {"attempt", st.attempt}, {"previous", previous}, {"artifacts", st.artifacts}});
    return record;
}

Manifest Pipeline::export_manifest() const {
    Manifest m;
    std::vector<ControlSignals> finals;
    for (const auto& id : store_.list()) {
        RunRecord r;
        try {
            r = store_.load(id);
        } catch (const Error&) {
            continue;
        }
        if (r.stage != Stage::final) {
            continue;
        }
        const Screenplay sp = load_screenplay(r);
        const Storyboard board = load_storyboard(r);
        ManifestEntry e;
        e.run_id = r.run_id;
        const json& fin = r.at(Stage::final).artifacts;
        e.final_video = ref_at(fin, "video");
        e.edit_list = ref_at(fin, "edl");
        e.total_frames = fin.at("total_frames").get<int>();
        e.scene_description = sp.scene.scenario;
        e.shots = sp.triplets;
        e.genre = r.signals.genre;
        e.subject_count = r.signals.subject_count;
        e.dynamicity = r.signals.dynamicity;
        e.shot_count = r.signals.shot_count;
        for (const auto& k : board.keyframes) {
            e.keyframes.push_back(k.image);
        }
        e.clips = refs_from(r.at(Stage::clips).artifacts.at("clips"));
        for (const auto& t : r.at(Stage::transitions).artifacts.at("transitions")) {
            e.transitions.push_back(ref_at(t, "clip"));
            for (const auto& w : t.at("warnings")) {
                e.transition_warnings.push_back(w.get<std::string>());
            }
        }
        finals.push_back(r.signals);
        m.entries.push_back(std::move(e));
    }
    m.balance = balance_report(finals, config_.taxonomy);
    return m;
}

}  // namespace shotweave
