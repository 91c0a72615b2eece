#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "shotweave/gen_clients.hpp"
#include "shotweave/prompts.hpp"
#include "shotweave/taxonomy.hpp"

namespace shotweave {

struct SceneSubject {
    std::string identity;
    std::string visual_attributes;
    friend bool operator==(const SceneSubject&, const SceneSubject&) = default;
};

struct SceneAction {
    std::string subject_ref;  // a subject identity, or "scene" when nobody is present
    std::string verb_phrase;
    friend bool operator==(const SceneAction&, const SceneAction&) = default;
};

struct SceneRecord {
    std::string lighting;
    std::string location;
    std::vector<SceneSubject> subjects;
    std::vector<SceneAction> actions;
    std::string subject_positions;
    std::string crowd_level;
    std::string scenario;
    friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

struct ShotTriplet {
    std::string shot_init;
    std::string movement;
    std::string shot_end;
    friend bool operator==(const ShotTriplet&, const ShotTriplet&) = default;
};

struct Screenplay {
    ControlSignals signals;
    SceneRecord scene;
    std::vector<ShotTriplet> triplets;
};

// One request/response exchange with an LLM role, kept for provenance.
struct Transcript {
    std::string role;
    std::string model_id;
    int attempt = 1;
    std::string prompt;
    std::string reply;
    std::vector<std::string> violations;  // empty when the reply was accepted
};

nlohmann::json to_json(const SceneRecord& scene);
SceneRecord scene_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const ShotTriplet& triplet);
nlohmann::json to_json(const Screenplay& screenplay);
Screenplay screenplay_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Transcript& transcript);

// Strict key/value parser for storyteller replies. Returns the list of
// violations (empty on success); `out` is filled as far as parsing got.
std::vector<std::string> parse_scene_record(const std::string& text, SceneRecord& out);

// Schema checks: seven fields non-empty, subjects consistent with the
// requested subject count, actions referring to known subjects.
std::vector<std::string> scene_violations(const SceneRecord& scene, const ControlSignals& signals);

// Throws ValidationError on a broken invariant: triplet count, chaining,
// movement labels or the scene schema.
void validate_screenplay(const Screenplay& screenplay, const Taxonomy& taxonomy);

inline constexpr int kMaxReprompts = 3;

struct ScreenplayContext {
    const Taxonomy& taxonomy;
    const PromptLibrary& prompts;
    std::uint64_t seed = 0;
    std::vector<Transcript>* transcripts = nullptr;  // optional provenance sink
};

// Parse-or-retry: up to kMaxReprompts re-prompts with the violations
// appended, then ParseError (unparseable) or ValidationError (schema).
SceneRecord compose_scene(const ControlSignals& signals, LlmClient& storyteller, const ScreenplayContext& ctx);

// Terminal-view description after `movement`. PreconditionError for an
// unknown label, ParseError for an empty reply or a bare movement name.
std::string translate_movement(const std::string& init_desc, const std::string& movement, const SceneRecord& scene,
                               LlmClient& cinematographer, const ScreenplayContext& ctx);

// What the camera sees before the first movement.
std::string opening_view(const SceneRecord& scene);

// Chains triplets so triplets[i].shot_init is byte-identical to
// triplets[i-1].shot_end.
Screenplay build_screenplay(const SceneRecord& scene, const ControlSignals& signals, LlmClient& cinematographer,
                            const ScreenplayContext& ctx);

// Judge-facing text: a "Scenario:" line, scene details, one "Shot k:" line
// per triplet.
std::string render_screenplay_text(const Screenplay& screenplay);

// Retrieval audit. The four retrievable fields.
inline constexpr const char* kAuditFields[] = {"genre", "subject_count", "dynamicity", "shot_count"};

struct JudgeVote {
    std::string judge_id;
    std::map<std::string, std::string> labels;  // field -> label; a missing field is an abstention
};

struct SampleVotes {
    std::string sample_id;
    std::map<std::string, std::string> truth;
    std::vector<JudgeVote> votes;
};

struct FieldScore {
    double accuracy = 0;  // fraction of samples whose majority label is correct
    double variance = 0;  // population variance of per-judge accuracy
};

struct RetrievalAudit {
    std::map<std::string, FieldScore> per_field;
    std::size_t judge_count = 0;
    std::size_t sample_count = 0;
    std::size_t abstentions = 0;
    std::vector<SampleVotes> samples;
};

nlohmann::json to_json(const RetrievalAudit& audit);

// Majority label: strictly more than half of the non-abstaining votes.
// Returns an empty string when there is no majority.
std::string majority_label(const std::vector<std::string>& labels);

// Parses "field: label" lines, keeping only labels from `options`.
JudgeVote parse_judge_reply(const std::string& judge_id, const std::string& text,
                            const std::map<std::string, std::vector<std::string>>& options);

std::map<std::string, std::string> audit_truth(const ControlSignals& signals);
std::map<std::string, std::vector<std::string>> audit_options(const Taxonomy& taxonomy);

// Scores recorded votes over any number of samples.
RetrievalAudit score_votes(std::vector<SampleVotes> samples);

// Each judge classifies every field from the screenplay text alone.
RetrievalAudit audit_screenplay(const Screenplay& screenplay, const ControlSignals& signals,
                                const std::vector<LlmClient*>& judges, const ScreenplayContext& ctx);

// Pools the vote sets of several single-sample audits.
RetrievalAudit combine_audits(const std::vector<RetrievalAudit>& audits);

}  // namespace shotweave
