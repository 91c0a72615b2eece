#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace shotweave {

// Half-up rounding on the decimal value, so 57.475 -> 57.5 even though the
// nearest double sits just below it.
double round_half_up(double value, int decimals = 1);

struct RatingRecord {
    std::string evaluator_id;
    std::string item_id;
    std::string method_id;
    std::string metric_id;
    double score = 0;  // 0 (poor) .. 10 (perfect)
};

struct RatingSummary {
    std::size_t n = 0;
    double mean = 0;
    double sample_std = 0;        // n-1 denominator; 0 when n == 1
    double population_std = 0;
    double sample_variance = 0;
    double population_variance = 0;
    double min = 0;
    double max = 0;
};

using RatingKey = std::pair<std::string, std::string>;  // (method, metric)

// Throws ValidationError for scores outside [0, 10].
std::map<RatingKey, RatingSummary> aggregate_ratings(const std::vector<RatingRecord>& ratings);

struct BinaryLabel {
    std::string item_id;
    std::string field;
    bool correct = false;
};

// 100 * correct / total per field.
std::map<std::string, double> binary_accuracy(const std::vector<BinaryLabel>& labels);

struct Ranking {
    std::string evaluator_id;
    std::string item_id;
    std::vector<std::string> order;  // best first
};

// Percentage of rankings that put each method first. Every ranking must be
// a permutation of the same method set (ValidationError otherwise).
std::map<std::string, double> win_rate(const std::vector<Ranking>& rankings);

struct FieldAccuracy {
    std::string field;
    double accuracy = 0;  // fraction in [0, 1]
    double variance = 0;  // dispersion across judges
};

struct ModelAudit {
    std::string model_id;
    std::vector<FieldAccuracy> fields;
};

struct AuditRow {
    std::string model_id;
    std::vector<FieldAccuracy> fields;  // accuracy as a percentage
    double average = 0;                  // unweighted mean of the field percentages
};

std::vector<AuditRow> summarize_llm_audit(const std::vector<ModelAudit>& audits);

// Table documents with values rounded for display.
nlohmann::json ratings_table(const std::map<RatingKey, RatingSummary>& summary);
nlohmann::json audit_table(const std::vector<AuditRow>& rows);

// Line-delimited record readers for annotation exports.
std::vector<RatingRecord> read_ratings_jsonl(std::istream& in);
std::vector<BinaryLabel> read_binary_jsonl(std::istream& in);
std::vector<Ranking> read_rankings_jsonl(std::istream& in);
std::vector<ModelAudit> read_audits_jsonl(std::istream& in);

}  // namespace shotweave
