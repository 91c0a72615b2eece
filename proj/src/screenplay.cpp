#include "shotweave/screenplay.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include "shotweave/error.hpp"
#include "shotweave/rng.hpp"

namespace shotweave {

using nlohmann::json;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::ranges::transform(s, s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::string join(const std::vector<std::string>& items, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        out += (i ? sep : "") + items[i];
    }
    return out;
}

// Splits "key: value"; returns false when there is no colon.
bool split_kv(const std::string& line, std::string& key, std::string& value) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
        return false;
    }
    key = lower(trim(line.substr(0, colon)));
    value = trim(line.substr(colon + 1));
    return true;
}

std::string subject_list(const SceneRecord& scene) {
    if (scene.subjects.empty()) {
        return "none";
    }
    std::vector<std::string> parts;
    for (const auto& s : scene.subjects) {
        parts.push_back(s.identity + " (" + s.visual_attributes + ")");
    }
    return join(parts, "; ");
}

void record(const ScreenplayContext& ctx, Transcript t) {
    if (ctx.transcripts) {
        ctx.transcripts->push_back(std::move(t));
    }
}

}  // namespace

json to_json(const SceneRecord& scene) {
    json subjects = json::array();
    for (const auto& s : scene.subjects) {
        subjects.push_back({{"identity", s.identity}, {"visual_attributes", s.visual_attributes}});
    }
    json actions = json::array();
    for (const auto& a : scene.actions) {
        actions.push_back({{"subject_ref", a.subject_ref}, {"verb_phrase", a.verb_phrase}});
    }
    return json{{"lighting", scene.lighting},
                {"location", scene.location},
                {"subjects", std::move(subjects)},
                {"actions", std::move(actions)},
                {"subject_positions", scene.subject_positions},
                {"crowd_level", scene.crowd_level},
                {"scenario", scene.scenario}};
}

SceneRecord scene_from_json(const json& doc) {
    SceneRecord s;
    s.lighting = doc.at("lighting").get<std::string>();
    s.location = doc.at("location").get<std::string>();
    for (const auto& sub : doc.at("subjects")) {
        s.subjects.push_back({sub.at("identity").get<std::string>(), sub.at("visual_attributes").get<std::string>()});
    }
    for (const auto& a : doc.at("actions")) {
        s.actions.push_back({a.at("subject_ref").get<std::string>(), a.at("verb_phrase").get<std::string>()});
    }
    s.subject_positions = doc.at("subject_positions").get<std::string>();
    s.crowd_level = doc.at("crowd_level").get<std::string>();
    s.scenario = doc.at("scenario").get<std::string>();
    return s;
}

json to_json(const ShotTriplet& t) {
    return json{{"shot_init", t.shot_init}, {"movement", t.movement}, {"shot_end", t.shot_end}};
}

json to_json(const Screenplay& sp) {
    json triplets = json::array();
    for (const auto& t : sp.triplets) {
        triplets.push_back(to_json(t));
    }
    return json{{"signals", to_json(sp.signals)}, {"scene", to_json(sp.scene)}, {"triplets", std::move(triplets)}};
}

Screenplay screenplay_from_json(const json& doc) {
    Screenplay sp;
    sp.signals = signals_from_json(doc.at("signals"));
    sp.scene = scene_from_json(doc.at("scene"));
    for (const auto& t : doc.at("triplets")) {
        sp.triplets.push_back({t.at("shot_init").get<std::string>(), t.at("movement").get<std::string>(),
                               t.at("shot_end").get<std::string>()});
    }
    return sp;
}

json to_json(const Transcript& t) {
    return json{{"role", t.role},     {"model_id", t.model_id}, {"attempt", t.attempt},
                {"prompt", t.prompt}, {"reply", t.reply},       {"violations", t.violations}};
}

std::vector<std::string> parse_scene_record(const std::string& text, SceneRecord& out) {
    static const std::set<std::string> kSingle = {"lighting", "location", "subject_positions", "crowd_level",
                                                  "scenario"};
    std::vector<std::string> violations;
    std::set<std::string> seen;
    std::istringstream lines(text);
    std::size_t lineno = 0;
    for (std::string raw; std::getline(lines, raw);) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty()) {
            continue;
        }
        std::string key, value;
        if (!split_kv(line, key, value)) {
            violations.push_back("line " + std::to_string(lineno) + " is not a 'key: value' pair");
            continue;
        }
        if (kSingle.contains(key)) {
            if (!seen.insert(key).second) {
                violations.push_back("field '" + key + "' appears more than once");
                continue;
            }
            std::string* slot = key == "lighting"            ? &out.lighting
                                : key == "location"          ? &out.location
                                : key == "subject_positions" ? &out.subject_positions
                                : key == "crowd_level"       ? &out.crowd_level
                                                             : &out.scenario;
            *slot = value;
        } else if (key == "subject" || key == "action") {
            const auto bar = value.find('|');
            if (bar == std::string::npos) {
                violations.push_back("line " + std::to_string(lineno) + ": '" + key + "' needs '<left> | <right>'");
                continue;
            }
            const std::string left = trim(value.substr(0, bar));
            const std::string right = trim(value.substr(bar + 1));
            if (key == "subject") {
                out.subjects.push_back({left, right});
            } else {
                out.actions.push_back({left, right});
            }
            seen.insert(key);
        } else {
            violations.push_back("line " + std::to_string(lineno) + ": unknown field '" + key + "'");
        }
    }
    for (const auto& key : kSingle) {
        if (!seen.contains(key)) {
            violations.push_back("missing field '" + key + "'");
        }
    }
    if (!seen.contains("action")) {
        violations.push_back("missing field 'action'");
    }
    return violations;
}

std::vector<std::string> scene_violations(const SceneRecord& scene, const ControlSignals& signals) {
    std::vector<std::string> v;
    auto need = [&](const std::string& value, const char* name) {
        if (trim(value).empty()) {
            v.push_back(std::string("field '") + name + "' is empty");
        }
    };
    need(scene.lighting, "lighting");
    need(scene.location, "location");
    need(scene.subject_positions, "subject_positions");
    need(scene.crowd_level, "crowd_level");
    need(scene.scenario, "scenario");
    if (scene.actions.empty()) {
        v.push_back("field 'actions' is empty");
    }

    const std::size_t n = scene.subjects.size();
    const std::string& want = signals.subject_count;
    if (want == "zero" && n != 0) {
        v.push_back("subject count is zero but " + std::to_string(n) + " subjects were listed");
    } else if (want == "single" && n != 1) {
        v.push_back("subject count is single but " + std::to_string(n) + " subjects were listed");
    } else if (want == "multiple" && n < 2) {
        v.push_back("subject count is multiple but " + std::to_string(n) + " subjects were listed");
    }

    std::set<std::string> ids;
    for (const auto& s : scene.subjects) {
        if (trim(s.identity).empty() || trim(s.visual_attributes).empty()) {
            v.push_back("subject entries need an identity and visual attributes");
        }
        ids.insert(s.identity);
    }
    for (const auto& a : scene.actions) {
        if (trim(a.verb_phrase).empty()) {
            v.push_back("action for '" + a.subject_ref + "' has no verb phrase");
        }
        if (a.subject_ref != "scene" && !ids.contains(a.subject_ref)) {
            v.push_back("action refers to unknown subject '" + a.subject_ref + "'");
        }
    }
    return v;
}

void validate_screenplay(const Screenplay& sp, const Taxonomy& taxonomy) {
    validate_signals(sp.signals, taxonomy);
    if (const auto v = scene_violations(sp.scene, sp.signals); !v.empty()) {
        throw ValidationError("screenplay scene: " + join(v, "; "));
    }
    if (sp.triplets.size() != static_cast<std::size_t>(sp.signals.shot_count)) {
        throw ValidationError("screenplay has " + std::to_string(sp.triplets.size()) + " triplets for " +
                              std::to_string(sp.signals.shot_count) + " shots");
    }
    for (std::size_t i = 0; i < sp.triplets.size(); ++i) {
        const ShotTriplet& t = sp.triplets[i];
        if (!taxonomy.has_movement(t.movement)) {
            throw ValidationError("triplet " + std::to_string(i) + " has unknown movement '" + t.movement + "'");
        }
        if (t.shot_init.empty() || t.shot_end.empty()) {
            throw ValidationError("triplet " + std::to_string(i) + " has an empty description");
        }
        if (i > 0 && t.shot_init != sp.triplets[i - 1].shot_end) {
            throw ValidationError("triplet " + std::to_string(i) + " does not start where the previous shot ended");
        }
    }
}

SceneRecord compose_scene(const ControlSignals& signals, LlmClient& storyteller, const ScreenplayContext& ctx) {
    validate_signals(signals, ctx.taxonomy);
    const std::string base = ctx.prompts.render(
        "storyteller", {{"genre", signals.genre},
                        {"subject_count", signals.subject_count},
                        {"dynamicity", signals.dynamicity},
                        {"shot_count", std::to_string(signals.shot_count)},
                        {"movements", join(signals.movements, ", ")}});

    std::vector<std::string> violations;
    bool parse_failure = false;
    for (int attempt = 0; attempt <= kMaxReprompts; ++attempt) {
        std::string text = base;
        if (!violations.empty()) {
            text += "\n\nYour previous reply was rejected:\n- " + join(violations, "\n- ") +
                    "\nReply again using exactly the format above.";
        }
        LlmPrompt prompt{"storyteller", text, "key/value scene record", json{{"signals", to_json(signals)}}};
        const std::string reply =
            storyteller.complete(prompt, derive_seed(ctx.seed, "storyteller#" + std::to_string(attempt)));

        SceneRecord scene;
        violations = parse_scene_record(reply, scene);
        parse_failure = !violations.empty();
        if (!parse_failure) {
            violations = scene_violations(scene, signals);
        }
        record(ctx, {"storyteller", storyteller.model_id(), attempt + 1, text, reply, violations});
        if (violations.empty()) {
            return scene;
        }
    }
    const std::string msg = "storyteller reply rejected after " + std::to_string(kMaxReprompts + 1) +
                            " attempts: " + join(violations, "; ");
    if (parse_failure) {
        throw ParseError(msg);
    }
    throw ValidationError(msg);
}

std::string translate_movement(const std::string& init_desc, const std::string& movement, const SceneRecord& scene,
                               LlmClient& cinematographer, const ScreenplayContext& ctx) {
    if (!ctx.taxonomy.has_movement(movement)) {
        throw PreconditionError("unknown camera movement '" + movement + "'");
    }
    const std::string text = ctx.prompts.render("cinematographer", {{"init_desc", init_desc},
                                                                    {"movement", movement},
                                                                    {"location", scene.location},
                                                                    {"lighting", scene.lighting},
                                                                    {"subjects", subject_list(scene)}});
    LlmPrompt prompt{"cinematographer", text, "single paragraph",
                     json{{"init_desc", init_desc}, {"movement", movement}, {"scene", to_json(scene)}}};
    const std::string reply = trim(cinematographer.complete(prompt, ctx.seed));
    std::vector<std::string> violations;
    if (reply.empty()) {
        violations.push_back("empty reply");
    } else if (lower(reply) == lower(movement)) {
        violations.push_back("reply names the movement instead of describing the view");
    }
    record(ctx, {"cinematographer", cinematographer.model_id(), 1, text, reply, violations});
    if (!violations.empty()) {
        throw ParseError("cinematographer: " + violations.front());
    }
    return reply;
}

std::string opening_view(const SceneRecord& scene) {
    return "Establishing view of " + scene.location + ", " + scene.lighting + "; " + scene.subject_positions + ".";
}

Screenplay build_screenplay(const SceneRecord& scene, const ControlSignals& signals, LlmClient& cinematographer,
                            const ScreenplayContext& ctx) {
    validate_signals(signals, ctx.taxonomy);
    Screenplay sp{signals, scene, {}};
    std::string view = opening_view(scene);
    for (int i = 0; i < signals.shot_count; ++i) {
        const std::string& movement = signals.movements[static_cast<std::size_t>(i)];
        ScreenplayContext shot_ctx = ctx;
        shot_ctx.seed = derive_seed(ctx.seed, "shot-" + std::to_string(i));
        std::string end = translate_movement(view, movement, scene, cinematographer, shot_ctx);
        sp.triplets.push_back({view, movement, end});
        view = std::move(end);
    }
    return sp;
}

std::string render_screenplay_text(const Screenplay& sp) {
    const SceneRecord& s = sp.scene;
    std::ostringstream out;
    out << "Scenario: " << s.scenario << '\n';
    out << "Location: " << s.location << '\n';
    out << "Lighting: " << s.lighting << '\n';
    out << "Subjects: " << subject_list(s) << '\n';
    std::vector<std::string> actions;
    for (const auto& a : s.actions) {
        actions.push_back(a.subject_ref + " " + a.verb_phrase);
    }
    out << "Actions: " << join(actions, "; ") << '\n';
    out << "Positions: " << s.subject_positions << '\n';
    out << "Crowd: " << s.crowd_level << '\n';
    for (std::size_t i = 0; i < sp.triplets.size(); ++i) {
        const ShotTriplet& t = sp.triplets[i];
        out << "Shot " << i + 1 << ": [" << t.shot_init << "] " << t.movement << " -> [" << t.shot_end << "]\n";
    }
    return out.str();
}

json to_json(const RetrievalAudit& audit) {
    json fields = json::object();
    for (const auto& [field, score] : audit.per_field) {
        fields[field] = {{"accuracy", score.accuracy}, {"variance", score.variance}};
    }
    json samples = json::array();
    for (const auto& s : audit.samples) {
        json votes = json::array();
        for (const auto& v : s.votes) {
            votes.push_back({{"judge_id", v.judge_id}, {"labels", v.labels}});
        }
        samples.push_back({{"sample_id", s.sample_id}, {"truth", s.truth}, {"votes", std::move(votes)}});
    }
    return json{{"per_field", std::move(fields)},
                {"judge_count", audit.judge_count},
                {"sample_count", audit.sample_count},
                {"abstentions", audit.abstentions},
                {"samples", std::move(samples)}};
}

std::string majority_label(const std::vector<std::string>& labels) {
    std::map<std::string, std::size_t> counts;
    for (const auto& l : labels) {
        ++counts[l];
    }
    for (const auto& [label, n] : counts) {
        if (2 * n > labels.size()) {
            return label;
        }
    }
    return {};
}

JudgeVote parse_judge_reply(const std::string& judge_id, const std::string& text,
                            const std::map<std::string, std::vector<std::string>>& options) {
    JudgeVote vote{judge_id, {}};
    std::istringstream lines(text);
    for (std::string raw; std::getline(lines, raw);) {
        std::string key, value;
        if (!split_kv(trim(raw), key, value)) {
            continue;
        }
        const auto it = options.find(key);
        if (it == options.end() || vote.labels.contains(key)) {
            continue;
        }
        const std::string v = lower(value);
        for (const auto& opt : it->second) {
            if (lower(opt) == v) {
                vote.labels[key] = opt;
                break;
            }
        }
    }
    return vote;
}

std::map<std::string, std::string> audit_truth(const ControlSignals& signals) {
    return {{"genre", signals.genre},
            {"subject_count", signals.subject_count},
            {"dynamicity", signals.dynamicity},
            {"shot_count", std::to_string(signals.shot_count)}};
}

std::map<std::string, std::vector<std::string>> audit_options(const Taxonomy& taxonomy) {
    std::vector<std::string> shots;
    for (int n : taxonomy.shot_counts) {
        shots.push_back(std::to_string(n));
    }
    return {{"genre", taxonomy.genres},
            {"subject_count", taxonomy.subject_counts},
            {"dynamicity", taxonomy.dynamicity},
            {"shot_count", shots}};
}

RetrievalAudit score_votes(std::vector<SampleVotes> samples) {
    if (samples.empty()) {
        throw PreconditionError("score_votes: no samples");
    }
    RetrievalAudit audit;
    std::set<std::string> judges;
    for (const auto& s : samples) {
        for (const auto& v : s.votes) {
            judges.insert(v.judge_id);
        }
    }
    if (judges.empty()) {
        throw PreconditionError("score_votes: no judge votes");
    }
    audit.judge_count = judges.size();
    audit.sample_count = samples.size();

    for (const char* field : kAuditFields) {
        std::size_t majority_correct = 0;
        std::map<std::string, std::pair<std::size_t, std::size_t>> per_judge;  // correct, answered
        for (const auto& s : samples) {
            const auto truth_it = s.truth.find(field);
            if (truth_it == s.truth.end()) {
                throw ValidationError("sample " + s.sample_id + " has no ground truth for " + field);
            }
            std::vector<std::string> labels;
            for (const auto& v : s.votes) {
                const auto it = v.labels.find(field);
                if (it == v.labels.end()) {
                    ++audit.abstentions;
                    continue;
                }
                labels.push_back(it->second);
                auto& [correct, answered] = per_judge[v.judge_id];
                correct += it->second == truth_it->second ? 1 : 0;
                ++answered;
            }
            const std::string winner = majority_label(labels);
            majority_correct += !winner.empty() && winner == truth_it->second ? 1 : 0;
        }
        FieldScore score;
        score.accuracy = static_cast<double>(majority_correct) / static_cast<double>(samples.size());
        std::vector<double> accs;
        for (const auto& [judge, ca] : per_judge) {
            accs.push_back(static_cast<double>(ca.first) / static_cast<double>(ca.second));
        }
        if (!accs.empty()) {
            double mean = 0;
            for (double a : accs) {
                mean += a;
            }
            mean /= static_cast<double>(accs.size());
            for (double a : accs) {
                score.variance += (a - mean) * (a - mean);
            }
            score.variance /= static_cast<double>(accs.size());
        }
        audit.per_field[field] = score;
    }
    audit.samples = std::move(samples);
    return audit;
}

RetrievalAudit audit_screenplay(const Screenplay& screenplay, const ControlSignals& signals,
                                const std::vector<LlmClient*>& judges, const ScreenplayContext& ctx) {
    if (judges.empty()) {
        throw PreconditionError("audit_screenplay needs at least one judge");
    }
    const auto options = audit_options(ctx.taxonomy);
    const std::string text = render_screenplay_text(screenplay);
    const std::string prompt_text = ctx.prompts.render(
        "judge", {{"screenplay", text},
                  {"genre_options", join(options.at("genre"), ", ")},
                  {"subject_options", join(options.at("subject_count"), ", ")},
                  {"dynamicity_options", join(options.at("dynamicity"), ", ")},
                  {"shot_options", join(options.at("shot_count"), ", ")}});
    LlmPrompt prompt{"judge", prompt_text, "four key/value lines",
                     json{{"screenplay_text", text}, {"options", options}}};

    SampleVotes sample{signals.sample_id, audit_truth(signals), {}};
    for (LlmClient* judge : judges) {
        const std::string reply = judge->complete(prompt, derive_seed(ctx.seed, "judge"));
        JudgeVote vote = parse_judge_reply(judge->model_id(), reply, options);
        std::vector<std::string> missing;
        for (const char* field : kAuditFields) {
            if (!vote.labels.contains(field)) {
                missing.push_back(std::string("abstained on ") + field);
            }
        }
        record(ctx, {"judge", judge->model_id(), 1, prompt_text, reply, missing});
        sample.votes.push_back(std::move(vote));
    }
    return score_votes({std::move(sample)});
}

RetrievalAudit combine_audits(const std::vector<RetrievalAudit>& audits) {
    std::vector<SampleVotes> all;
    for (const auto& a : audits) {
        all.insert(all.end(), a.samples.begin(), a.samples.end());
    }
    return score_votes(std::move(all));
}

}  // namespace shotweave
