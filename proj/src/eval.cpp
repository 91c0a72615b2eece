#include "shotweave/eval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <set>

#include "shotweave/error.hpp"

namespace shotweave {

using nlohmann::json;

namespace {

template <typename T, typename Parse>
std::vector<T> read_jsonl(std::istream& in, Parse parse) {
    std::vector<T> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(parse(json::parse(line)));
        } catch (const json::exception& e) {
            throw ValidationError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace

double round_half_up(double value, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double scaled = value * scale;
    // Nudge by a few ulps so values printed as ...5 round up.
    const double nudge = std::abs(scaled) * 1e-12 + 1e-12;
    return std::floor(scaled + 0.5 + (scaled >= 0 ? nudge : -nudge)) / scale;
}

std::map<RatingKey, RatingSummary> aggregate_ratings(const std::vector<RatingRecord>& ratings) {
    std::map<RatingKey, std::vector<double>> cells;
    for (const auto& r : ratings) {
        if (!(r.score >= 0.0 && r.score <= 10.0)) {
            throw ValidationError("rating " + std::to_string(r.score) + " from " + r.evaluator_id +
                                  " is outside the 0-10 scale");
        }
        cells[{r.method_id, r.metric_id}].push_back(r.score);
    }
    std::map<RatingKey, RatingSummary> out;
    for (const auto& [key, scores] : cells) {
        RatingSummary s;
        s.n = scores.size();
        double sum = 0;
        for (double v : scores) {
            sum += v;
        }
        s.mean = sum / static_cast<double>(s.n);
        double ss = 0;
        for (double v : scores) {
            ss += (v - s.mean) * (v - s.mean);
        }
        s.population_variance = ss / static_cast<double>(s.n);
        s.sample_variance = s.n > 1 ? ss / static_cast<double>(s.n - 1) : 0.0;
        s.population_std = std::sqrt(s.population_variance);
        s.sample_std = std::sqrt(s.sample_variance);
        const auto [lo, hi] = std::ranges::minmax(scores);
        s.min = lo;
        s.max = hi;
        out.emplace(key, s);
    }
    return out;
}

std::map<std::string, double> binary_accuracy(const std::vector<BinaryLabel>& labels) {
    if (labels.empty()) {
        throw PreconditionError("binary_accuracy: no labels");
    }
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // correct, total
    for (const auto& l : labels) {
        auto& [correct, total] = tally[l.field];
        correct += l.correct ? 1 : 0;
        ++total;
    }
    std::map<std::string, double> out;
    for (const auto& [field, ct] : tally) {
        out[field] = 100.0 * static_cast<double>(ct.first) / static_cast<double>(ct.second);
    }
    return out;
}

std::map<std::string, double> win_rate(const std::vector<Ranking>& rankings) {
    if (rankings.empty()) {
        throw PreconditionError("win_rate: no rankings");
    }
    const std::set<std::string> methods(rankings.front().order.begin(), rankings.front().order.end());
    if (methods.size() != rankings.front().order.size() || methods.empty()) {
        throw ValidationError("win_rate: first ranking repeats a method or is empty");
    }
    std::map<std::string, std::size_t> firsts;
    for (const auto& m : methods) {
        firsts[m] = 0;
    }
    for (const auto& r : rankings) {
        const std::set<std::string> seen(r.order.begin(), r.order.end());
        if (seen.size() != r.order.size() || seen != methods) {
            throw ValidationError("win_rate: ranking from " + r.evaluator_id + " on " + r.item_id +
                                  " is not a permutation of the method set");
        }
        ++firsts[r.order.front()];
    }
    std::map<std::string, double> out;
    for (const auto& [m, n] : firsts) {
        out[m] = 100.0 * static_cast<double>(n) / static_cast<double>(rankings.size());
    }
    return out;
}

std::vector<AuditRow> summarize_llm_audit(const std::vector<ModelAudit>& audits) {
    if (audits.empty()) {
        throw PreconditionError("summarize_llm_audit: no audits");
    }
    std::vector<AuditRow> rows;
    for (const auto& a : audits) {
        AuditRow row{a.model_id, {}, 0};
        double sum = 0;
        for (const auto& f : a.fields) {
            row.fields.push_back({f.field, 100.0 * f.accuracy, f.variance});
            sum += 100.0 * f.accuracy;
        }
        row.average = a.fields.empty() ? 0.0 : sum / static_cast<double>(a.fields.size());
        rows.push_back(std::move(row));
    }
    return rows;
}

json ratings_table(const std::map<RatingKey, RatingSummary>& summary) {
    json rows = json::array();
    for (const auto& [key, s] : summary) {
        rows.push_back({{"method", key.first},
                        {"metric", key.second},
                        {"n", s.n},
                        {"mean", round_half_up(s.mean)},
                        {"sample_std", round_half_up(s.sample_std)},
                        {"population_std", round_half_up(s.population_std)},
                        {"sample_variance", round_half_up(s.sample_variance, 2)},
                        {"population_variance", round_half_up(s.population_variance, 2)}});
    }
    return json{{"table", "ratings"}, {"rows", std::move(rows)}};
}

json audit_table(const std::vector<AuditRow>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json fields = json::array();
        for (const auto& f : r.fields) {
            fields.push_back({{"field", f.field},
                              {"accuracy_pct", round_half_up(f.accuracy)},
                              {"variance", round_half_up(f.variance, 2)}});
        }
        out.push_back({{"model", r.model_id}, {"fields", std::move(fields)}, {"average_pct", round_half_up(r.average)}});
    }
    return json{{"table", "llm_audit"}, {"rows", std::move(out)}};
}

std::vector<RatingRecord> read_ratings_jsonl(std::istream& in) {
    return read_jsonl<RatingRecord>(in, [](const json& d) {
        return RatingRecord{d.at("evaluator_id").get<std::string>(), d.at("item_id").get<std::string>(),
                            d.at("method_id").get<std::string>(), d.at("metric_id").get<std::string>(),
                            d.at("score").get<double>()};
    });
}

std::vector<BinaryLabel> read_binary_jsonl(std::istream& in) {
    return read_jsonl<BinaryLabel>(in, [](const json& d) {
        return BinaryLabel{d.at("item_id").get<std::string>(), d.at("field").get<std::string>(),
                           d.at("correct").get<bool>()};
    });
}

std::vector<Ranking> read_rankings_jsonl(std::istream& in) {
    return read_jsonl<Ranking>(in, [](const json& d) {
        return Ranking{d.value("evaluator_id", ""), d.value("item_id", ""),
                       d.at("order").get<std::vector<std::string>>()};
    });
}

std::vector<ModelAudit> read_audits_jsonl(std::istream& in) {
    return read_jsonl<ModelAudit>(in, [](const json& d) {
        ModelAudit a{d.at("model_id").get<std::string>(), {}};
        for (const auto& f : d.at("fields")) {
            a.fields.push_back({f.at("field").get<std::string>(), f.at("accuracy").get<double>(),
                                f.value("variance", 0.0)});
        }
        return a;
    });
}

}  // namespace shotweave
