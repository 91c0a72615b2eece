#include "shotweave/taxonomy.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "shotweave/error.hpp"
#include "shotweave/rng.hpp"

namespace shotweave {

namespace {

using nlohmann::json;

const std::vector<std::pair<std::string, std::string>>& default_movements() {
    static const std::vector<std::pair<std::string, std::string>> kMovements = {
        {"static", "static"},       {"pan left", "pan"},        {"pan right", "pan"},
        {"tilt up", "tilt"},        {"tilt down", "tilt"},      {"dolly in", "dolly"},
        {"dolly out", "dolly"},     {"truck left", "truck"},    {"truck right", "truck"},
        {"pedestal up", "pedestal"}, {"pedestal down", "pedestal"}, {"zoom in", "zoom"},
        {"zoom out", "zoom"},       {"crane up", "crane"},      {"crane down", "crane"},
        {"arc left", "arc"},        {"arc right", "arc"},
    };
    return kMovements;
}

template <typename T>
void require_unique(const std::vector<T>& values, std::string_view dimension) {
    if (values.empty()) {
        throw ValidationError("taxonomy: dimension '" + std::string(dimension) + "' is empty");
    }
    std::set<T> seen;
    for (const auto& v : values) {
        if (!seen.insert(v).second) {
            if constexpr (std::is_same_v<T, std::string>) {
                throw ValidationError("taxonomy: duplicate label '" + v + "' in " + std::string(dimension));
            } else {
                throw ValidationError("taxonomy: duplicate value " + std::to_string(v) + " in " +
                                      std::string(dimension));
            }
        }
    }
}

std::vector<std::string> string_list(const json& doc, const char* key) {
    const auto& node = doc.at(key);
    if (!node.is_array()) {
        throw ValidationError(std::string("taxonomy: '") + key + "' must be a list");
    }
    std::vector<std::string> out;
    for (const auto& item : node) {
        if (!item.is_string() || item.get<std::string>().empty()) {
            throw ValidationError(std::string("taxonomy: '") + key + "' entries must be non-empty strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

void validate_taxonomy(const Taxonomy& t) {
    require_unique(t.genres, "genres");
    require_unique(t.movements, "movements");
    require_unique(t.shot_counts, "shot_counts");
    require_unique(t.subject_counts, "subject_counts");
    require_unique(t.dynamicity, "dynamicity");

    if (t.movements.size() != kMovementCount) {
        throw ValidationError("taxonomy: expected 17 movements, got " + std::to_string(t.movements.size()));
    }
    std::set<std::string> families_used;
    for (const auto& m : t.movements) {
        const auto it = t.movement_families.find(m);
        if (it == t.movement_families.end()) {
            throw ValidationError("taxonomy: movement '" + m + "' has no family");
        }
        const bool known = std::ranges::find(kMovementFamilies, it->second) != std::end(kMovementFamilies);
        if (!known) {
            throw ValidationError("taxonomy: movement '" + m + "' maps to unknown family '" + it->second + "'");
        }
        families_used.insert(it->second);
    }
    for (const auto& [label, family] : t.movement_families) {
        if (!t.has_movement(label)) {
            throw ValidationError("taxonomy: family given for unlisted movement '" + label + "'");
        }
    }
    if (families_used.size() != std::size(kMovementFamilies)) {
        throw ValidationError("taxonomy: movements must cover all nine families");
    }
    for (int s : t.shot_counts) {
        if (s < 1 || s > 3) {
            throw ValidationError("taxonomy: shot count " + std::to_string(s) + " outside {1,2,3}");
        }
    }
}

std::vector<std::size_t> stratified(std::size_t n, std::size_t k, Rng rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = i % k;
    }
    rng.shuffle(std::span<std::size_t>(idx));
    return idx;
}

template <typename Label, typename Extract>
DimensionBalance count_dimension(const std::vector<Label>& categories,
                                 const std::vector<ControlSignals>& entries, Extract extract) {
    DimensionBalance out;
    for (const auto& c : categories) {
        if constexpr (std::is_same_v<Label, int>) {
            out.counts.push_back({std::to_string(c), 0});
        } else {
            out.counts.push_back({c, 0});
        }
    }
    for (const auto& e : entries) {
        extract(e, [&](const std::string& label) {
            for (auto& cc : out.counts) {
                if (cc.category == label) {
                    ++cc.count;
                    return;
                }
            }
        });
    }
    if (!out.counts.empty()) {
        const auto [lo, hi] = std::ranges::minmax_element(out.counts, {}, &CategoryCount::count);
        out.max_deviation = hi->count - lo->count;
    }
    return out;
}

}  // namespace

bool Taxonomy::has_movement(std::string_view label) const {
    return std::ranges::find(movements, label) != movements.end();
}

bool Taxonomy::has_genre(std::string_view label) const {
    return std::ranges::find(genres, label) != genres.end();
}

Taxonomy default_taxonomy() {
    Taxonomy t;
    t.genres = {"documentary", "drama",   "action",  "comedy",  "horror",          "romance", "fantasy",
                "western",     "classic", "animals", "sports", "science fiction", "war"};
    for (const auto& [label, family] : default_movements()) {
        t.movements.push_back(label);
        t.movement_families.emplace(label, family);
    }
    t.shot_counts = {1, 2, 3};
    t.subject_counts = {"zero", "single", "multiple"};
    t.dynamicity = {"static", "dynamic"};
    return t;
}

Taxonomy load_taxonomy(const json& config) {
    if (!config.is_object()) {
        throw ValidationError("taxonomy: config must be an object");
    }
    Taxonomy t = default_taxonomy();
    if (config.contains("genres")) {
        t.genres = string_list(config, "genres");
    }
    if (config.contains("movements")) {
        t.movements = string_list(config, "movements");
        t.movement_families.clear();
        if (config.contains("movement_families")) {
            for (const auto& [label, family] : config.at("movement_families").items()) {
                t.movement_families.emplace(label, family.get<std::string>());
            }
        }
    } else if (config.contains("movement_families")) {
        throw ValidationError("taxonomy: 'movement_families' given without 'movements'");
    }
    if (config.contains("shot_counts")) {
        t.shot_counts.clear();
        for (const auto& v : config.at("shot_counts")) {
            if (!v.is_number_integer()) {
                throw ValidationError("taxonomy: shot_counts must be integers");
            }
            t.shot_counts.push_back(v.get<int>());
        }
    }
    if (config.contains("subject_counts")) {
        t.subject_counts = string_list(config, "subject_counts");
    }
    if (config.contains("dynamicity")) {
        t.dynamicity = string_list(config, "dynamicity");
    }
    validate_taxonomy(t);
    return t;
}

Taxonomy load_taxonomy_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw NotFoundError("taxonomy: cannot open " + path);
    }
    return load_taxonomy(json::parse(in));
}

json to_json(const Taxonomy& t) {
    return json{{"genres", t.genres},
                {"movements", t.movements},
                {"movement_families", t.movement_families},
                {"shot_counts", t.shot_counts},
                {"subject_counts", t.subject_counts},
                {"dynamicity", t.dynamicity}};
}

json to_json(const ControlSignals& s) {
    return json{{"sample_id", s.sample_id},         {"genre", s.genre},
                {"shot_count", s.shot_count},       {"movements", s.movements},
                {"subject_count", s.subject_count}, {"dynamicity", s.dynamicity}};
}

ControlSignals signals_from_json(const json& doc) {
    try {
        ControlSignals s;
        s.sample_id = doc.at("sample_id").get<std::string>();
        s.genre = doc.at("genre").get<std::string>();
        s.shot_count = doc.at("shot_count").get<int>();
        s.movements = doc.at("movements").get<std::vector<std::string>>();
        s.subject_count = doc.at("subject_count").get<std::string>();
        s.dynamicity = doc.at("dynamicity").get<std::string>();
        return s;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("control signals: ") + e.what());
    }
}

void validate_signals(const ControlSignals& s, const Taxonomy& t) {
    if (s.sample_id.empty()) {
        throw ValidationError("control signals: empty sample_id");
    }
    if (!t.has_genre(s.genre)) {
        throw ValidationError("control signals: unknown genre '" + s.genre + "'");
    }
    if (std::ranges::find(t.shot_counts, s.shot_count) == t.shot_counts.end()) {
        throw ValidationError("control signals: shot count " + std::to_string(s.shot_count) + " not allowed");
    }
    if (s.movements.size() != static_cast<std::size_t>(s.shot_count)) {
        throw ValidationError("control signals: need one movement per shot");
    }
    std::set<std::string> seen;
    for (const auto& m : s.movements) {
        if (!t.has_movement(m)) {
            throw ValidationError("control signals: unknown movement '" + m + "'");
        }
        if (!seen.insert(m).second) {
            throw ValidationError("control signals: movement '" + m + "' repeated within sample");
        }
    }
    if (std::ranges::find(t.subject_counts, s.subject_count) == t.subject_counts.end()) {
        throw ValidationError("control signals: unknown subject count '" + s.subject_count + "'");
    }
    if (std::ranges::find(t.dynamicity, s.dynamicity) == t.dynamicity.end()) {
        throw ValidationError("control signals: unknown dynamicity '" + s.dynamicity + "'");
    }
}

std::size_t DimensionBalance::total() const {
    std::size_t sum = 0;
    for (const auto& c : counts) {
        sum += c.count;
    }
    return sum;
}

BalancePlan generate_plan(std::size_t n, const Taxonomy& taxonomy, std::uint64_t seed) {
    const int max_shots = *std::ranges::max_element(taxonomy.shot_counts);
    if (static_cast<std::size_t>(max_shots) > taxonomy.movements.size()) {
        throw PreconditionError("generate_plan: shot count " + std::to_string(max_shots) +
                                " exceeds the movement vocabulary");
    }

    const auto genre = stratified(n, taxonomy.genres.size(), Rng(derive_seed(seed, "genre")));
    const auto shots = stratified(n, taxonomy.shot_counts.size(), Rng(derive_seed(seed, "shot_count")));
    const auto first = stratified(n, taxonomy.movements.size(), Rng(derive_seed(seed, "movement")));
    const auto subjects = stratified(n, taxonomy.subject_counts.size(), Rng(derive_seed(seed, "subject_count")));
    const auto dyn = stratified(n, taxonomy.dynamicity.size(), Rng(derive_seed(seed, "dynamicity")));

    std::vector<std::size_t> movement_use(taxonomy.movements.size(), 0);
    for (std::size_t m : first) {
        ++movement_use[m];
    }
    Rng tail_rng(derive_seed(seed, "movement_tail"));

    BalancePlan plan;
    plan.taxonomy = taxonomy;
    plan.seed = seed;
    plan.entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        ControlSignals s;
        char id[32];
        std::snprintf(id, sizeof id, "sample-%05zu", i);
        s.sample_id = id;
        s.genre = taxonomy.genres[genre[i]];
        s.shot_count = taxonomy.shot_counts[shots[i]];
        s.subject_count = taxonomy.subject_counts[subjects[i]];
        s.dynamicity = taxonomy.dynamicity[dyn[i]];

        std::vector<std::size_t> chosen{first[i]};
        while (chosen.size() < static_cast<std::size_t>(s.shot_count)) {
            std::size_t best = ~std::size_t{0};
            std::vector<std::size_t> tied;
            for (std::size_t m = 0; m < taxonomy.movements.size(); ++m) {
                if (std::ranges::find(chosen, m) != chosen.end()) {
                    continue;
                }
                if (movement_use[m] < best) {
                    best = movement_use[m];
                    tied.assign({m});
                } else if (movement_use[m] == best) {
                    tied.push_back(m);
                }
            }
            const std::size_t pick = tied[tail_rng.below(tied.size())];
            ++movement_use[pick];
            chosen.push_back(pick);
        }
        for (std::size_t m : chosen) {
            s.movements.push_back(taxonomy.movements[m]);
        }
        plan.entries.push_back(std::move(s));
    }
    plan.report = balance_report(plan);
    return plan;
}

BalanceReport balance_report(const std::vector<ControlSignals>& entries, const Taxonomy& t) {
    BalanceReport r;
    r["genre"] = count_dimension(t.genres, entries, [](const ControlSignals& s, auto add) { add(s.genre); });
    r["shot_count"] = count_dimension(t.shot_counts, entries,
                                      [](const ControlSignals& s, auto add) { add(std::to_string(s.shot_count)); });
    r["movement"] = count_dimension(t.movements, entries, [](const ControlSignals& s, auto add) {
        if (!s.movements.empty()) {
            add(s.movements.front());
        }
    });
    r["movement_all"] = count_dimension(t.movements, entries, [](const ControlSignals& s, auto add) {
        for (const auto& m : s.movements) {
            add(m);
        }
    });
    r["subject_count"] =
        count_dimension(t.subject_counts, entries, [](const ControlSignals& s, auto add) { add(s.subject_count); });
    r["dynamicity"] =
        count_dimension(t.dynamicity, entries, [](const ControlSignals& s, auto add) { add(s.dynamicity); });
    return r;
}

BalanceReport balance_report(const BalancePlan& plan) { return balance_report(plan.entries, plan.taxonomy); }

json to_json(const BalanceReport& report) {
    json out = json::object();
    for (const auto& [dim, bal] : report) {
        json counts = json::object();
        for (const auto& c : bal.counts) {
            counts[c.category] = c.count;
        }
        out[dim] = json{{"counts", counts}, {"max_deviation", bal.max_deviation}, {"total", bal.total()}};
    }
    return out;
}

void write_plan_jsonl(const BalancePlan& plan, std::ostream& out) {
    for (const auto& e : plan.entries) {
        out << to_json(e).dump() << '\n';
    }
}

std::vector<ControlSignals> read_plan_jsonl(std::istream& in, const Taxonomy& taxonomy) {
    std::vector<ControlSignals> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError("plan line " + std::to_string(lineno) + ": " + e.what());
        }
        auto s = signals_from_json(doc);
        validate_signals(s, taxonomy);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace shotweave
