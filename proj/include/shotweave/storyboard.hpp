#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shotweave/gen_clients.hpp"
#include "shotweave/screenplay.hpp"
#include "shotweave/taxonomy.hpp"

namespace shotweave {

// Per-model benchmark ratings on a 0-10 scale: camera adherence per
// movement family plus two scene-level scores.
struct ScoreMatrix {
    std::vector<std::string> models;    // declaration order
    std::vector<std::string> families;  // column order
    std::map<std::string, std::map<std::string, double>> camera_adherence;  // model -> family -> score
    std::map<std::string, double> scene_preservation;
    std::map<std::string, double> narration_adherence;

    double camera(const std::string& model, const std::string& family) const;
};

// {families: [...], models: [{model_id, camera_adherence: [...], scene_preservation,
// narration_adherence, ...}]}. Throws ValidationError for a missing cell, a
// score outside [0, 10] or a duplicate model.
ScoreMatrix load_score_matrix(const nlohmann::json& doc);
ScoreMatrix load_score_matrix_file(const std::string& path);
// The shipped camera benchmark, compiled in.
ScoreMatrix default_score_matrix();
nlohmann::json to_json(const ScoreMatrix& matrix);

// PreconditionError for a label outside the taxonomy.
std::string family_of(const std::string& movement, const Taxonomy& taxonomy);

// Ties on camera adherence are broken by each criterion in turn (higher
// wins), then by declaration order. Recognised criteria:
// scene_preservation, narration_adherence.
struct TieBreakPolicy {
    std::vector<std::string> criteria{"scene_preservation"};
};

struct RoutingTable {
    std::map<std::string, std::string> assignment;                    // family -> model
    std::map<std::string, std::vector<std::string>> tie_break_trace;  // family -> ranked candidates
};

RoutingTable build_routing(const ScoreMatrix& scores, const TieBreakPolicy& policy = {});
nlohmann::json to_json(const RoutingTable& routing);
RoutingTable routing_from_json(const nlohmann::json& doc);

struct Keyframe {
    ArtifactRef image;
    std::string model_id;
    std::string prompt;
    std::uint64_t seed = 0;
    std::string movement;                 // movement that led to this frame; empty for the first
    std::optional<std::string> source;    // digest of the conditioning keyframe
};

struct Storyboard {
    std::vector<Keyframe> keyframes;
};

nlohmann::json to_json(const Keyframe& keyframe);
nlohmann::json to_json(const Storyboard& storyboard);
Storyboard storyboard_from_json(const nlohmann::json& doc);

// Keyframe 0 from text on the scenario and the first shot's opening view;
// keyframe i from an edit of keyframe i-1 with shot_end[i-1], routed by the
// family of movement[i-1]. Every routed client is checked before anything
// is generated (PreconditionError when one is missing).
Storyboard generate_storyboard(const Screenplay& screenplay, const Taxonomy& taxonomy, const RoutingTable& routing,
                               ImageGenClient& t2i, const std::map<std::string, ImageEditClient*>& i2i_pool,
                               std::uint64_t seed);

// Keeps keyframes [0, from) of `board` and regenerates the rest of the
// chain, since every later frame conditions on its predecessor.
Storyboard regenerate_keyframes(const Storyboard& board, std::size_t from, const Screenplay& screenplay,
                                const Taxonomy& taxonomy, const RoutingTable& routing, ImageGenClient& t2i,
                                const std::map<std::string, ImageEditClient*>& i2i_pool, std::uint64_t seed);

}  // namespace shotweave
