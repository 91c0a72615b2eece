#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace shotweave {

// The nine camera-movement families used for routing. Each of the 17
// movement labels belongs to exactly one of these.
inline constexpr std::string_view kMovementFamilies[] = {
    "static", "pan", "tilt", "dolly", "truck", "pedestal", "zoom", "crane", "arc"};

inline constexpr std::size_t kMovementCount = 17;

struct Taxonomy {
    std::vector<std::string> genres;
    std::vector<std::string> movements;
    std::map<std::string, std::string> movement_families;
    std::vector<int> shot_counts;
    std::vector<std::string> subject_counts;
    std::vector<std::string> dynamicity;

    bool has_movement(std::string_view label) const;
    bool has_genre(std::string_view label) const;
};

// 13 genres, 17 movements over 9 families, shots {1,2,3},
// subjects {zero,single,multiple}, dynamicity {static,dynamic}.
Taxonomy default_taxonomy();

// Builds a taxonomy from a config document; dimensions missing from the
// document fall back to the defaults. Throws ValidationError on duplicate
// labels, a movement without a family, or an empty dimension.
Taxonomy load_taxonomy(const nlohmann::json& config);
Taxonomy load_taxonomy_file(const std::string& path);

nlohmann::json to_json(const Taxonomy& taxonomy);

struct ControlSignals {
    std::string sample_id;
    std::string genre;
    int shot_count = 1;
    std::vector<std::string> movements;
    std::string subject_count;
    std::string dynamicity;

    friend bool operator==(const ControlSignals&, const ControlSignals&) = default;
};

nlohmann::json to_json(const ControlSignals& signals);
ControlSignals signals_from_json(const nlohmann::json& doc);

// Throws ValidationError unless every label is drawn from the taxonomy,
// movements are pairwise distinct and there is one movement per shot.
void validate_signals(const ControlSignals& signals, const Taxonomy& taxonomy);

struct CategoryCount {
    std::string category;
    std::size_t count = 0;
};

struct DimensionBalance {
    std::vector<CategoryCount> counts;  // taxonomy order, zeros included
    std::size_t max_deviation = 0;      // max count - min count
    std::size_t total() const;
};

// Keyed by dimension: genre, shot_count, movement (first-shot marginal),
// subject_count, dynamicity. movement_all counts every shot and is
// informational only.
using BalanceReport = std::map<std::string, DimensionBalance>;

struct BalancePlan {
    Taxonomy taxonomy;
    std::vector<ControlSignals> entries;
    std::uint64_t seed = 0;
    BalanceReport report;
};

// Stratified round-robin per dimension followed by a seeded shuffle. Later
// shot movements are chosen greedily to even out the all-shot movement
// counts while staying distinct within the sample.
BalancePlan generate_plan(std::size_t n, const Taxonomy& taxonomy, std::uint64_t seed);

BalanceReport balance_report(const BalancePlan& plan);
BalanceReport balance_report(const std::vector<ControlSignals>& entries, const Taxonomy& taxonomy);
nlohmann::json to_json(const BalanceReport& report);

// One ControlSignals object per line.
void write_plan_jsonl(const BalancePlan& plan, std::ostream& out);
std::vector<ControlSignals> read_plan_jsonl(std::istream& in, const Taxonomy& taxonomy);

}  // namespace shotweave
