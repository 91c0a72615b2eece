#include "shotweave/mock_transport.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

#include "shotweave/hashing.hpp"
#include "shotweave/media.hpp"
#include "shotweave/rng.hpp"

namespace shotweave {

namespace {

using nlohmann::json;

struct GenreKit {
    const char* genre;
    const char* location;
    const char* lighting;
    const char* identities[4];
    const char* attributes[4];
    const char* verbs[4];
};

// Phrases avoid whole-word genre labels so the mock judge only finds the
// genre where the scenario states it.
constexpr GenreKit kKits[] = {
    {"documentary", "a fishing harbour at dawn", "flat overcast daylight",
     {"old fisherman", "young deckhand", "harbour master", "net mender"},
     {"grey beard, oilskin jacket", "rolled sleeves, red cap", "navy coat, clipboard", "wool sweater, weathered hands"},
     {"coils a wet rope", "hauls a crate ashore", "checks the tide board", "repairs a torn net"}},
    {"drama", "a cramped kitchen in a city apartment", "warm tungsten practicals",
     {"tired mother", "teenage son", "grandfather", "neighbour"},
     {"loose cardigan, hair tied back", "hoodie, headphones around neck", "cane, pressed shirt", "apron, flour on hands"},
     {"sets down a letter", "looks away from the table", "folds his hands slowly", "knocks at the door"}},
    {"action", "a rain-soaked rooftop above neon streets", "hard cyan and magenta neon",
     {"courier", "pursuer", "lookout", "pilot"},
     {"black jacket, satchel", "tactical vest, earpiece", "hooded coat, binoculars", "flight suit, helmet"},
     {"sprints across the ledge", "vaults a vent stack", "signals with a torch", "lands a small drone"}},
    {"comedy", "a chaotic wedding banquet hall", "bright even party light",
     {"best man", "flustered waiter", "flower girl", "uncle"},
     {"crooked bow tie", "stained white jacket", "oversized tiara", "loud floral shirt"},
     {"drops the rings", "juggles three plates", "tosses petals everywhere", "dances on a chair"}},
    {"horror", "an abandoned asylum corridor", "flickering green fluorescent light",
     {"night guard", "lost nurse", "pale child", "investigator"},
     {"torn uniform, torch", "stained scrubs", "white nightgown", "trench coat, camera"},
     {"edges toward a door", "freezes mid-step", "whispers to the wall", "photographs a scratch mark"}},
    {"romance", "a lantern-lit bridge over a canal", "soft golden lantern glow",
     {"young woman", "young man", "street violinist", "boatman"},
     {"red scarf, long coat", "linen shirt, sketchbook", "felt hat, violin", "striped shirt, oar"},
     {"leans on the railing", "offers a folded note", "plays a slow melody", "steers past quietly"}},
    {"fantasy", "a crystal cavern beneath a mountain", "cool blue bioluminescence",
     {"elf archer", "dwarf smith", "young mage", "stone golem"},
     {"silver cloak, longbow", "braided beard, leather apron", "glowing staff, hooded robe", "mossy granite body"},
     {"draws an arrow", "strikes a glowing anvil", "conjures a floating light", "lumbers forward"}},
    {"western", "a dusty frontier main street", "harsh low-angle sunset",
     {"lone gunslinger", "sheriff", "saloon keeper", "stagecoach driver"},
     {"weathered duster coat, wide-brimmed hat", "tin star, grey moustache", "apron, rolled sleeves", "long whip, dusty boots"},
     {"strides toward the saloon", "rests a hand on his holster", "wipes a glass", "reins in the horses"}},
    {"classic", "a grand 1940s hotel lobby", "high-key black-and-white studio light",
     {"elegant singer", "bellhop", "detective", "concierge"},
     {"satin gown, pearls", "pillbox cap, brass buttons", "fedora, pinstripe suit", "tailcoat, ledger"},
     {"descends the staircase", "carries a suitcase", "lights a cigarette", "rings the desk bell"}},
    {"animals", "a savanna waterhole at midday", "bright high sun with heat haze",
     {"old elephant", "zebra foal", "lioness", "heron"},
     {"cracked grey hide, long tusks", "sharp stripes, wobbly legs", "tawny coat, alert ears", "slate feathers, long beak"},
     {"sprays water over its back", "drinks at the edge", "crouches in the grass", "wades through the shallows"}},
    {"sports", "an indoor basketball arena", "bright overhead arena floodlights",
     {"point guard", "centre", "referee", "coach"},
     {"number 7 jersey, wristbands", "number 32 jersey, headband", "striped shirt, whistle", "suit, rolled tactics board"},
     {"dribbles past a defender", "leaps for the rebound", "signals a foul", "shouts from the sideline"}},
    {"science fiction", "the bridge of a deep-space cruiser", "cool white panel light with amber alerts",
     {"captain", "navigator", "android", "engineer"},
     {"grey uniform, silver insignia", "headset, holographic visor", "porcelain face, blue optics", "grease-marked coveralls"},
     {"studies the star map", "plots a jump course", "scans the console", "reroutes power"}},
    {"war", "a muddy trench line at dusk", "smoky orange dusk with flares",
     {"young private", "sergeant", "field medic", "radio operator"},
     {"helmet, mud-caked coat", "scarred cheek, binoculars", "armband, satchel", "headset, backpack radio"},
     {"peers over the parapet", "waves the squad forward", "bandages an arm", "calls in coordinates"}},
};

const GenreKit& kit_for(const std::string& genre, std::uint64_t seed) {
    for (const auto& k : kKits) {
        if (genre == k.genre) {
            return k;
        }
    }
    return kKits[seed % std::size(kKits)];
}

std::string movement_framing(const std::string& movement, const std::string& focus, const std::string& init) {
    auto has = [&](const char* prefix) { return movement.rfind(prefix, 0) == 0; };
    const bool positive = movement.find("in") != std::string::npos || movement.find("up") != std::string::npos ||
                          movement.find("right") != std::string::npos;
    if (movement == "static") {
        return init + " The framing holds unchanged; nothing in the composition moves relative to the lens.";
    }
    if (has("dolly")) {
        return positive ? "Tighter framing: the camera has travelled physically closer, " + focus +
                              " now fills the frame in a close-up with the background falling out of focus."
                        : "Wider framing: the camera has travelled back, revealing " + focus +
                              " small within the full surroundings and more of the set around it.";
    }
    if (has("zoom")) {
        return positive ? "Tighter framing through a longer lens: " + focus +
                              " is magnified to a close-up while perspective stays flat and unchanged."
                        : "Wider framing through a shorter lens: " + focus +
                              " shrinks into a wide view, perspective unchanged, edges of the set now visible.";
    }
    if (has("pan")) {
        return std::string("Reframed to the ") + (positive ? "right" : "left") +
               " by rotating in place: " + focus + " has slid to the " + (positive ? "left" : "right") +
               " edge and new space opens on the " + (positive ? "right" : "left") + ".";
    }
    if (has("tilt")) {
        return std::string("Reframed ") + (positive ? "upward" : "downward") + " by rotating in place: the view now " +
               (positive ? "looks up past " : "looks down past ") + focus + (positive ? " toward the ceiling or sky." : " toward the ground.");
    }
    if (has("truck")) {
        return std::string("Lateral shift to the ") + (positive ? "right" : "left") + ": the camera has slid sideways, " +
               focus + " now seen from a parallel vantage with foreground objects sweeping across.";
    }
    if (has("pedestal")) {
        return std::string(positive ? "Raised" : "Lowered") + " vantage at the same angle: the camera has moved " +
               (positive ? "up" : "down") + " vertically and " + focus + " sits " + (positive ? "lower" : "higher") +
               " in the frame.";
    }
    if (has("crane")) {
        return std::string(positive ? "High sweeping overhead view: " : "Low grounded view after a sweeping descent: ") +
               focus + (positive ? " seen from far above with the whole layout revealed." : " seen at eye level, close to the ground.");
    }
    if (has("arc")) {
        return std::string("Orbited viewpoint: the camera has circled ") + (positive ? "right" : "left") +
               " around " + focus + ", now showing its side profile with the background rotated behind it.";
    }
    return "A new view of " + focus + " after the camera move.";
}

std::string word_bounded_find(const std::string& text, const std::vector<std::string>& labels) {
    std::size_t best_pos = std::string::npos;
    std::string best;
    for (const auto& label : labels) {
        std::size_t pos = 0;
        while ((pos = text.find(label, pos)) != std::string::npos) {
            const bool left_ok = pos == 0 || !std::isalnum(static_cast<unsigned char>(text[pos - 1]));
            const std::size_t end = pos + label.size();
            const bool right_ok = end >= text.size() || !std::isalnum(static_cast<unsigned char>(text[end]));
            if (left_ok && right_ok) {
                if (pos < best_pos) {
                    best_pos = pos;
                    best = label;
                }
                break;
            }
            ++pos;
        }
    }
    return best;
}

std::string corrupt(const std::string& truth, const std::vector<std::string>& options, Rng& rng) {
    std::vector<std::string> others;
    for (const auto& o : options) {
        if (o != truth) {
            others.push_back(o);
        }
    }
    if (others.empty()) {
        return truth;
    }
    return others[rng.below(others.size())];
}

int option_int(const json& options, const char* key, int fallback) {
    if (options.contains(key) && options.at(key).is_number()) {
        return options.at(key).get<int>();
    }
    return fallback;
}

Image load_image(const ArtifactStore& store, const json& payload, const char* key) {
    return decode_ppm(store.read(payload.at(key).get<std::string>()));
}

}  // namespace

std::string mock_storyteller_reply(const json& context, std::uint64_t seed) {
    const json& sig = context.at("signals");
    const std::string genre = sig.at("genre").get<std::string>();
    const std::string subjects = sig.at("subject_count").get<std::string>();
    const std::string dynamicity = sig.at("dynamicity").get<std::string>();
    const int shots = sig.at("shot_count").get<int>();
    const GenreKit& kit = kit_for(genre, seed);
    Rng rng(derive_seed(seed, "storyteller"));

    std::size_t n_subjects = 0;
    if (subjects == "single") {
        n_subjects = 1;
    } else if (subjects == "multiple") {
        n_subjects = 2 + rng.below(3);
    }
    const std::size_t offset = rng.below(4);

    std::ostringstream out;
    out << "lighting: " << kit.lighting << '\n';
    out << "location: " << kit.location << '\n';
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_subjects; ++i) {
        const std::size_t k = (offset + i) % 4;
        names.emplace_back(kit.identities[k]);
        out << "subject: " << kit.identities[k] << " | " << kit.attributes[k] << '\n';
    }
    if (names.empty()) {
        out << "action: scene | " << (dynamicity == "dynamic" ? "wind drives debris across the frame" : "dust hangs motionless in the air") << '\n';
    } else {
        for (std::size_t i = 0; i < names.size(); ++i) {
            const std::size_t k = (offset + i) % 4;
            out << "action: " << names[i] << " | " << (dynamicity == "dynamic" ? kit.verbs[k] : "stands almost motionless")
                << '\n';
        }
    }
    std::string positions;
    if (names.empty()) {
        positions = "no subjects; the location itself is centred";
    } else {
        for (std::size_t i = 0; i < names.size(); ++i) {
            static constexpr const char* kSpots[] = {"centre frame", "left third", "right third", "background"};
            positions += (i ? "; " : "") + names[i] + " at " + kSpots[i % 4];
        }
    }
    out << "subject_positions: " << positions << '\n';
    const int extras = static_cast<int>(rng.below(4));
    out << "crowd_level: " << (names.empty() ? "empty, 0 people" : names.size() == 1 ? "sparse, about " + std::to_string(extras) + " bystanders"
                                                                                    : "moderate, about " + std::to_string(5 + extras * 3) + " people")
        << '\n';

    std::string who = names.empty() ? "no people are present"
                      : names.size() == 1 ? "a single subject, the " + names[0] + ","
                                          : std::to_string(names.size()) + " subjects";
    out << "scenario: In this " << genre << " piece set in " << kit.location << ", " << who
        << (names.empty() ? ", and " : " ") << (names.empty() ? "the place speaks for itself" : "share the frame")
        << ". The scene is " << (dynamicity == "dynamic" ? "full of motion" : "largely still") << ", told over " << shots
        << (shots == 1 ? " shot" : " shots") << " under " << kit.lighting << ".\n";
    return out.str();
}

std::string mock_cinematographer_reply(const json& context, std::uint64_t /*seed*/) {
    const std::string init = context.at("init_desc").get<std::string>();
    const std::string movement = context.at("movement").get<std::string>();
    std::string focus = "the location";
    if (context.contains("scene")) {
        const json& scene = context.at("scene");
        if (scene.contains("subjects") && !scene.at("subjects").empty()) {
            focus = "the " + scene.at("subjects").at(0).at("identity").get<std::string>();
        } else if (scene.contains("location")) {
            focus = scene.at("location").get<std::string>();
        }
    }
    return movement_framing(movement, focus, init);
}

std::string mock_judge_reply(const json& context, std::uint64_t seed, double error_rate) {
    const std::string text = context.at("screenplay_text").get<std::string>();
    const json& options = context.at("options");
    const auto genres = options.at("genre").get<std::vector<std::string>>();
    const auto subject_opts = options.at("subject_count").get<std::vector<std::string>>();
    const auto dyn_opts = options.at("dynamicity").get<std::vector<std::string>>();
    const auto shot_opts = options.at("shot_count").get<std::vector<std::string>>();

    // Only the scenario line carries the control cues.
    std::string scenario = text;
    if (const auto pos = text.find("Scenario:"); pos != std::string::npos) {
        scenario = text.substr(pos, text.find('\n', pos) - pos);
    }
    std::string genre = word_bounded_find(scenario, genres);
    if (genre.empty()) {
        genre = genres.front();
    }
    std::string subjects = "multiple";
    if (scenario.find("no people are present") != std::string::npos) {
        subjects = "zero";
    } else if (scenario.find("a single subject") != std::string::npos) {
        subjects = "single";
    }
    std::string dyn = scenario.find("full of motion") != std::string::npos ? "dynamic" : "static";
    int shot_lines = 0;
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("Shot ", 0) == 0) {
            ++shot_lines;
        }
    }
    std::string shots = std::to_string(shot_lines);

    Rng rng(derive_seed(seed, "judge"));
    auto maybe_wrong = [&](std::string value, const std::vector<std::string>& opts) {
        return rng.unit() < error_rate ? corrupt(value, opts, rng) : value;
    };
    genre = maybe_wrong(genre, genres);
    subjects = maybe_wrong(subjects, subject_opts);
    dyn = maybe_wrong(dyn, dyn_opts);
    shots = maybe_wrong(shots, shot_opts);
    return "genre: " + genre + "\nsubject_count: " + subjects + "\ndynamicity: " + dyn + "\nshot_count: " + shots + "\n";
}

TransportReply MockTransport::send(const ModelEndpoint& endpoint, const GenRequest& request,
                                   const ArtifactStore& store) {
    {
        std::lock_guard lock(mutex_);
        const std::size_t attempt = attempts_[endpoint.model_id]++;
        if (const auto it = failures_.find(endpoint.model_id); it != failures_.end()) {
            const FailureInjection& f = it->second;
            if (f.fail_all || static_cast<int>(attempt) < f.fail_first) {
                throw TransportError("mock: injected failure for " + endpoint.model_id, f.retryable, f.status);
            }
        }
    }

    const json& payload = request.payload;
    const json options = payload.value("options", json::object());
    const json& ep_opts = endpoint.options;
    const int width = option_int(options, "width", option_int(ep_opts, "width", 256));
    const int height = option_int(options, "height", option_int(ep_opts, "height", 144));
    const std::string hash = sha256_hex(canonical_json(payload) + "#" + std::to_string(request.seed));

    TransportReply reply;
    reply.metadata = {{"mock", true}, {"model_id", endpoint.model_id}};
    switch (request.kind) {
        case GenKind::llm: {
            reply.media_type = std::string(kMediaText);
            if (ep_opts.contains("fixed_reply")) {
                reply.bytes = ep_opts.at("fixed_reply").get<std::string>();
                break;
            }
            const std::string role = payload.at("role").get<std::string>();
            const json& ctx = payload.at("context");
            if (role == "storyteller") {
                reply.bytes = mock_storyteller_reply(ctx, request.seed);
            } else if (role == "cinematographer") {
                reply.bytes = mock_cinematographer_reply(ctx, request.seed);
            } else if (role == "judge") {
                reply.bytes = mock_judge_reply(ctx, derive_seed(request.seed, endpoint.model_id),
                                               ep_opts.value("judge_error_rate", 0.0));
            } else {
                throw TransportError("mock: unknown llm role '" + role + "'", false, 400);
            }
            break;
        }
        case GenKind::t2i: {
            reply.media_type = std::string(kMediaImage);
            reply.bytes = encode_ppm(render_procedural(width, height, hash));
            break;
        }
        case GenKind::i2i: {
            const Image source = load_image(store, payload, "source");
            Image overlay = render_procedural(source.width, source.height, hash);
            Image edited = blend(source, overlay, 0.35);
            draw_marker(edited, source.width / 2.0, source.height / 2.0, std::max(1, source.height / 24), 255, 255, 0);
            reply.media_type = std::string(kMediaImage);
            reply.bytes = encode_ppm(edited);
            break;
        }
        case GenKind::flf2v: {
            const Image first = load_image(store, payload, "first");
            const Image last = load_image(store, payload, "last");
            reply.media_type = std::string(kMediaClip);
            reply.bytes = encode_clip(crossfade(first, last, payload.at("num_frames").get<int>()));
            break;
        }
        case GenKind::guided_interp: {
            const Image first = load_image(store, payload, "first");
            const Image last = load_image(store, payload, "last");
            const json field = json::parse(store.read(payload.at("control_field").get<std::string>()));
            const int frames = field.at("T").get<int>();
            Clip clip = crossfade(first, last, frames);
            const double sx = static_cast<double>(first.width) / field.at("width").get<double>();
            const double sy = static_cast<double>(first.height) / field.at("height").get<double>();
            for (const auto& traj : field.at("trajectories")) {
                const auto& pts = traj.at("points");
                for (int f = 1; f + 1 < frames; ++f) {
                    const auto& p = pts.at(static_cast<std::size_t>(f));
                    draw_marker(clip[static_cast<std::size_t>(f)], p.at("x").get<double>() * sx, p.at("y").get<double>() * sy, 0,
                                255, 0, 255);
                }
            }
            reply.media_type = std::string(kMediaClip);
            reply.bytes = encode_clip(clip);
            break;
        }
    }
    return reply;
}

void MockTransport::inject_failure(const std::string& model_id, FailureInjection failure) {
    std::lock_guard lock(mutex_);
    failures_[model_id] = failure;
    attempts_[model_id] = 0;
}

void MockTransport::clear_failures() {
    std::lock_guard lock(mutex_);
    failures_.clear();
}

std::size_t MockTransport::attempts(const std::string& model_id) const {
    std::lock_guard lock(mutex_);
    const auto it = attempts_.find(model_id);
    return it == attempts_.end() ? 0 : it->second;
}

}  // namespace shotweave
