#include "shotweave/storyboard.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "shotweave/builtin_data.hpp"
#include "shotweave/error.hpp"
#include "shotweave/rng.hpp"

namespace shotweave {

using nlohmann::json;

namespace {

void check_score(double v, const std::string& where) {
    if (!(v >= 0.0 && v <= 10.0)) {
        throw ValidationError(where + " score " + std::to_string(v) + " is outside [0, 10]");
    }
}

double criterion(const ScoreMatrix& m, const std::string& name, const std::string& model) {
    if (name == "scene_preservation") {
        return m.scene_preservation.at(model);
    }
    if (name == "narration_adherence") {
        return m.narration_adherence.at(model);
    }
    throw ValidationError("unknown tie-break criterion '" + name + "'");
}

}  // namespace

double ScoreMatrix::camera(const std::string& model, const std::string& family) const {
    const auto row = camera_adherence.find(model);
    if (row == camera_adherence.end()) {
        throw NotFoundError("score matrix has no model '" + model + "'");
    }
    const auto cell = row->second.find(family);
    if (cell == row->second.end()) {
        throw NotFoundError("score matrix has no family '" + family + "' for " + model);
    }
    return cell->second;
}

ScoreMatrix load_score_matrix(const json& doc) {
    ScoreMatrix m;
    try {
        m.families = doc.at("families").get<std::vector<std::string>>();
        std::set<std::string> fams(m.families.begin(), m.families.end());
        if (fams.size() != m.families.size() || m.families.empty()) {
            throw ValidationError("score matrix families must be non-empty and distinct");
        }
        for (const auto& row : doc.at("models")) {
            const std::string id = row.at("model_id").get<std::string>();
            if (m.camera_adherence.contains(id)) {
                throw ValidationError("score matrix lists model '" + id + "' twice");
            }
            const auto cells = row.at("camera_adherence").get<std::vector<double>>();
            if (cells.size() != m.families.size()) {
                throw ValidationError("model '" + id + "' has " + std::to_string(cells.size()) +
                                      " camera scores for " + std::to_string(m.families.size()) + " families");
            }
            auto& out = m.camera_adherence[id];
            for (std::size_t i = 0; i < cells.size(); ++i) {
                check_score(cells[i], id + "/" + m.families[i]);
                out[m.families[i]] = cells[i];
            }
            m.scene_preservation[id] = row.at("scene_preservation").get<double>();
            m.narration_adherence[id] = row.at("narration_adherence").get<double>();
            check_score(m.scene_preservation[id], id + "/scene_preservation");
            check_score(m.narration_adherence[id], id + "/narration_adherence");
            m.models.push_back(id);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("score matrix: ") + e.what());
    }
    return m;
}

ScoreMatrix load_score_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("cannot open score matrix " + path);
    }
    try {
        return load_score_matrix(json::parse(in));
    } catch (const json::parse_error& e) {
        throw ValidationError(path + ": " + e.what());
    }
}

ScoreMatrix default_score_matrix() {
    return load_score_matrix(json::parse(detail::kBuiltinScoreMatrix));
}

json to_json(const ScoreMatrix& m) {
    json models = json::array();
    for (const auto& id : m.models) {
        std::vector<double> cells;
        for (const auto& f : m.families) {
            cells.push_back(m.camera(id, f));
        }
        models.push_back({{"model_id", id},
                          {"camera_adherence", cells},
                          {"scene_preservation", m.scene_preservation.at(id)},
                          {"narration_adherence", m.narration_adherence.at(id)}});
    }
    return json{{"families", m.families}, {"models", std::move(models)}};
}

std::string family_of(const std::string& movement, const Taxonomy& taxonomy) {
    const auto it = taxonomy.movement_families.find(movement);
    if (it == taxonomy.movement_families.end()) {
        throw PreconditionError("unknown camera movement '" + movement + "'");
    }
    return it->second;
}

RoutingTable build_routing(const ScoreMatrix& scores, const TieBreakPolicy& policy) {
    if (scores.models.empty()) {
        throw PreconditionError("build_routing: score matrix has no models");
    }
    for (const auto& c : policy.criteria) {
        criterion(scores, c, scores.models.front());
    }
    RoutingTable table;
    for (const auto& family : scores.families) {
        std::vector<std::size_t> order(scores.models.size());
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) {
            const std::string& ma = scores.models[a];
            const std::string& mb = scores.models[b];
            const double ca = scores.camera(ma, family), cb = scores.camera(mb, family);
            if (ca != cb) {
                return ca > cb;
            }
            for (const auto& c : policy.criteria) {
                const double xa = criterion(scores, c, ma), xb = criterion(scores, c, mb);
                if (xa != xb) {
                    return xa > xb;
                }
            }
            return false;
        });
        auto& trace = table.tie_break_trace[family];
        for (std::size_t i : order) {
            trace.push_back(scores.models[i]);
        }
        table.assignment[family] = trace.front();
    }
    return table;
}

json to_json(const RoutingTable& r) {
    return json{{"assignment", r.assignment}, {"tie_break_trace", r.tie_break_trace}};
}

RoutingTable routing_from_json(const json& doc) {
    RoutingTable r;
    r.assignment = doc.at("assignment").get<std::map<std::string, std::string>>();
    r.tie_break_trace = doc.value("tie_break_trace", json::object()).get<std::map<std::string, std::vector<std::string>>>();
    return r;
}

json to_json(const Keyframe& k) {
    json doc{{"image", to_json(k.image)}, {"model_id", k.model_id}, {"prompt", k.prompt},
             {"seed", k.seed},            {"movement", k.movement}};
    doc["source"] = k.source ? json(*k.source) : json(nullptr);
    return doc;
}

json to_json(const Storyboard& s) {
    json frames = json::array();
    for (const auto& k : s.keyframes) {
        frames.push_back(to_json(k));
    }
    return json{{"keyframes", std::move(frames)}};
}

Storyboard storyboard_from_json(const json& doc) {
    Storyboard s;
    for (const auto& k : doc.at("keyframes")) {
        Keyframe f;
        f.image = artifact_ref_from_json(k.at("image"));
        f.model_id = k.at("model_id").get<std::string>();
        f.prompt = k.at("prompt").get<std::string>();
        f.seed = k.at("seed").get<std::uint64_t>();
        f.movement = k.value("movement", "");
        if (k.contains("source") && !k.at("source").is_null()) {
            f.source = k.at("source").get<std::string>();
        }
        s.keyframes.push_back(std::move(f));
    }
    return s;
}

namespace {

std::vector<ImageEditClient*> routed_editors(const Screenplay& screenplay, const Taxonomy& taxonomy,
                                             const RoutingTable& routing,
                                             const std::map<std::string, ImageEditClient*>& i2i_pool) {
    if (screenplay.triplets.empty()) {
        throw PreconditionError("storyboard: screenplay has no shots");
    }
    std::vector<ImageEditClient*> editors;
    for (const auto& t : screenplay.triplets) {
        const std::string family = family_of(t.movement, taxonomy);
        const auto routed = routing.assignment.find(family);
        if (routed == routing.assignment.end()) {
            throw PreconditionError("routing table has no entry for family '" + family + "'");
        }
        const auto client = i2i_pool.find(routed->second);
        if (client == i2i_pool.end() || client->second == nullptr) {
            throw PreconditionError("no image-edit client for routed model '" + routed->second + "' (family " +
                                    family + ")");
        }
        editors.push_back(client->second);
    }
    return editors;
}

void extend_chain(Storyboard& board, const Screenplay& screenplay, const std::vector<ImageEditClient*>& editors,
                  ImageGenClient& t2i, std::uint64_t seed) {
    if (board.keyframes.empty()) {
        Keyframe first;
        first.prompt = screenplay.scene.scenario + "\n" + screenplay.triplets.front().shot_init;
        first.seed = derive_seed(seed, "keyframe-0");
        first.model_id = t2i.model_id();
        first.image = t2i.generate(first.prompt, first.seed);
        board.keyframes.push_back(std::move(first));
    }
    for (std::size_t i = board.keyframes.size() - 1; i < screenplay.triplets.size(); ++i) {
        const ShotTriplet& t = screenplay.triplets[i];
        Keyframe k;
        k.prompt = t.shot_end;
        k.movement = t.movement;
        k.seed = derive_seed(seed, "keyframe-" + std::to_string(i + 1));
        k.model_id = editors[i]->model_id();
        k.source = board.keyframes.back().image.digest;
        k.image = editors[i]->edit(board.keyframes.back().image, k.prompt, k.seed);
        board.keyframes.push_back(std::move(k));
    }
}

}  // namespace

Storyboard generate_storyboard(const Screenplay& screenplay, const Taxonomy& taxonomy, const RoutingTable& routing,
                               ImageGenClient& t2i, const std::map<std::string, ImageEditClient*>& i2i_pool,
                               std::uint64_t seed) {
    const auto editors = routed_editors(screenplay, taxonomy, routing, i2i_pool);
    Storyboard board;
    extend_chain(board, screenplay, editors, t2i, seed);
    return board;
}

Storyboard regenerate_keyframes(const Storyboard& board, std::size_t from, const Screenplay& screenplay,
                                const Taxonomy& taxonomy, const RoutingTable& routing, ImageGenClient& t2i,
                                const std::map<std::string, ImageEditClient*>& i2i_pool, std::uint64_t seed) {
    const auto editors = routed_editors(screenplay, taxonomy, routing, i2i_pool);
    if (from > board.keyframes.size() || board.keyframes.size() != screenplay.triplets.size() + 1) {
        throw PreconditionError("regenerate_keyframes: index " + std::to_string(from) + " outside the storyboard");
    }
    Storyboard out;
    out.keyframes.assign(board.keyframes.begin(), board.keyframes.begin() + static_cast<std::ptrdiff_t>(from));
    extend_chain(out, screenplay, editors, t2i, seed);
    return out;
}

}  // namespace shotweave
