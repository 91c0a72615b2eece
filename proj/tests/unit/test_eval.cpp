#include <doctest.h>

#include <sstream>

#include "shotweave/error.hpp"
#include "shotweave/eval.hpp"
#include "shotweave/rng.hpp"

using namespace shotweave;

namespace {

std::vector<BinaryLabel> labels(const std::string& field, int correct, int total) {
    std::vector<BinaryLabel> out;
    for (int i = 0; i < total; ++i) {
        out.push_back({"item" + std::to_string(i), field, i < correct});
    }
    return out;
}

std::vector<Ranking> rankings_with_firsts(const std::vector<std::pair<std::string, int>>& firsts,
                                          const std::vector<std::string>& methods) {
    std::vector<Ranking> out;
    int n = 0;
    for (const auto& [winner, count] : firsts) {
        for (int i = 0; i < count; ++i) {
            std::vector<std::string> order{winner};
            for (const auto& m : methods) {
                if (m != winner) {
                    order.push_back(m);
                }
            }
            out.push_back({"rater" + std::to_string(n % 5), "item" + std::to_string(n), order});
            ++n;
        }
    }
    return out;
}

}  // namespace

TEST_SUITE("eval") {
    TEST_CASE("half-up rounding of printed decimals") {
        CHECK(round_half_up(57.475, 2) == doctest::Approx(57.48));
        CHECK(round_half_up(57.475) == doctest::Approx(57.5));
        CHECK(round_half_up(0.05) == doctest::Approx(0.1));
        CHECK(round_half_up(87.675) == doctest::Approx(87.7));
        CHECK(round_half_up(60.1) == doctest::Approx(60.1));
        CHECK(round_half_up(-1.25) == doctest::Approx(-1.3));
        CHECK(round_half_up(2.5, 0) == 3.0);
    }

    TEST_CASE("rating aggregation") {
        const auto s = aggregate_ratings({{"e1", "i", "m", "q", 8}, {"e2", "i", "m", "q", 8}, {"e3", "i", "m", "q", 8}});
        const RatingSummary& r = s.at({"m", "q"});
        CHECK(r.n == 3);
        CHECK(r.mean == 8.0);
        CHECK(r.sample_std == 0.0);
        CHECK(r.population_std == 0.0);

        const auto one = aggregate_ratings({{"e", "i", "m", "q", 3}});
        CHECK(one.at({"m", "q"}).sample_std == 0.0);

        CHECK_THROWS_AS(aggregate_ratings({{"e", "i", "m", "q", 10.5}}), ValidationError);
        CHECK_THROWS_AS(aggregate_ratings({{"e", "i", "m", "q", -0.1}}), ValidationError);
    }

    TEST_CASE("rating statistics match a direct two-pass oracle") {
        Rng rng(3);
        for (int trial = 0; trial < 200; ++trial) {
            std::vector<RatingRecord> rs;
            std::vector<double> xs;
            const std::size_t n = 1 + rng.below(30);
            for (std::size_t i = 0; i < n; ++i) {
                const double v = static_cast<double>(rng.below(101)) / 10.0;
                xs.push_back(v);
                rs.push_back({"e" + std::to_string(i), "item", "m", "q", v});
            }
            double mean = 0;
            for (double v : xs) mean += v;
            mean /= static_cast<double>(n);
            double ss = 0;
            for (double v : xs) ss += (v - mean) * (v - mean);
            const RatingSummary& s = aggregate_ratings(rs).at({"m", "q"});
            REQUIRE(s.mean == doctest::Approx(mean));
            REQUIRE(s.population_std == doctest::Approx(std::sqrt(ss / static_cast<double>(n))));
            if (n > 1) {
                REQUIRE(s.sample_std == doctest::Approx(std::sqrt(ss / static_cast<double>(n - 1))));
            }
            REQUIRE(s.min == *std::min_element(xs.begin(), xs.end()));
            REQUIRE(s.max == *std::max_element(xs.begin(), xs.end()));
        }
    }

    TEST_CASE("published rating means and spreads are reproduced") {
        // Alternating scores mean +/- d give mean exactly and population std d.
        std::vector<RatingRecord> rs;
        for (int i = 0; i < 40; ++i) {
            rs.push_back({"e" + std::to_string(i), "item", "ours", "screenplay", i % 2 ? 7.6 + 1.1 : 7.6 - 1.1});
            rs.push_back({"e" + std::to_string(i), "item", "ours", "camera", i % 2 ? 8.3 + 1.1 : 8.3 - 1.1});
        }
        const auto s = aggregate_ratings(rs);
        const auto table = ratings_table(s);
        REQUIRE(table.at("rows").size() == 2);
        for (const auto& row : table.at("rows")) {
            CHECK(row.at("population_std").get<double>() == doctest::Approx(1.1));
        }
        CHECK(round_half_up(s.at({"ours", "screenplay"}).mean) == doctest::Approx(7.6));
        CHECK(round_half_up(s.at({"ours", "camera"}).mean) == doctest::Approx(8.3));
    }

    TEST_CASE("binary accuracy") {
        CHECK(binary_accuracy(labels("genre", 9, 10)).at("genre") == doctest::Approx(90.0));
        CHECK_THROWS_AS(binary_accuracy({}), PreconditionError);

        // Published percentages over 1000 judged items each.
        std::vector<BinaryLabel> all;
        for (const auto& [field, k] : std::vector<std::pair<std::string, int>>{
                 {"shot_count", 912}, {"genre", 935}, {"subject_count", 908}, {"dynamicity", 893}}) {
            const auto part = labels(field, k, 1000);
            all.insert(all.end(), part.begin(), part.end());
        }
        const auto acc = binary_accuracy(all);
        CHECK(round_half_up(acc.at("shot_count")) == doctest::Approx(91.2));
        CHECK(round_half_up(acc.at("genre")) == doctest::Approx(93.5));
        CHECK(round_half_up(acc.at("subject_count")) == doctest::Approx(90.8));
        CHECK(round_half_up(acc.at("dynamicity")) == doctest::Approx(89.3));
    }

    TEST_CASE("win rate") {
        const std::vector<std::string> methods{"a", "b", "c", "ours"};
        const auto wr = win_rate(rankings_with_firsts({{"a", 14}, {"b", 7}, {"c", 15}, {"ours", 64}}, methods));
        CHECK(wr.at("a") == doctest::Approx(14));
        CHECK(wr.at("b") == doctest::Approx(7));
        CHECK(wr.at("c") == doctest::Approx(15));
        CHECK(wr.at("ours") == doctest::Approx(64));
        double total = 0;
        for (const auto& [m, v] : wr) total += v;
        CHECK(total == doctest::Approx(100));

        const auto single = win_rate({{"r", "i", {"x", "y", "z"}}});
        CHECK(single.at("x") == 100.0);
        CHECK(single.at("y") == 0.0);
        CHECK(single.at("z") == 0.0);

        const auto split = win_rate({{"r1", "i", {"x", "y"}}, {"r2", "i", {"y", "x"}}});
        CHECK(split.at("x") == 50.0);
        CHECK(split.at("y") == 50.0);

        CHECK_THROWS_AS(win_rate({{"r1", "i", {"x", "y"}}, {"r2", "i", {"x", "z"}}}), ValidationError);
        CHECK_THROWS_AS(win_rate({{"r1", "i", {"x", "x"}}}), ValidationError);
        CHECK_THROWS_AS(win_rate({{"r1", "i", {"x", "y"}}, {"r2", "i", {"x"}}}), ValidationError);
        CHECK_THROWS_AS(win_rate({}), PreconditionError);
    }

    TEST_CASE("audit summary from printed field percentages") {
        const std::vector<ModelAudit> audits{
            {"gpt-5-mini", {{"genre", .947, 0}, {"subject", .596, 0}, {"dynamicity", .965, 0}, {"movement", 1.0, 0}}},
            {"qwen-3", {{"genre", .860, 0}, {"subject", .404, 0}, {"dynamicity", .877, 0}, {"movement", .158, 0}}},
            {"gemini", {{"genre", .895, 0}, {"subject", .456, 0}, {"dynamicity", .842, 0}, {"movement", .211, 0}}},
        };
        const auto rows = summarize_llm_audit(audits);
        CHECK(round_half_up(rows[0].average) == doctest::Approx(87.7));
        CHECK(round_half_up(rows[1].average) == doctest::Approx(57.5));
        CHECK(round_half_up(rows[2].average) == doctest::Approx(60.1));
        CHECK(rows[1].fields[3].accuracy == doctest::Approx(15.8));

        const auto table = audit_table(rows);
        CHECK(table.at("rows")[1].at("average_pct").get<double>() == doctest::Approx(57.5));

        const auto zero = summarize_llm_audit({{"m", {{"genre", 0, 0}, {"subject", 0, 0}}}});
        CHECK(zero[0].average == 0.0);
        CHECK_THROWS_AS(summarize_llm_audit({}), PreconditionError);
    }

    TEST_CASE("jsonl readers") {
        std::istringstream ratings(R"({"evaluator_id":"e","item_id":"i","method_id":"m","metric_id":"q","score":7}

{"evaluator_id":"e2","item_id":"i","method_id":"m","metric_id":"q","score":9})");
        const auto rs = read_ratings_jsonl(ratings);
        REQUIRE(rs.size() == 2);
        CHECK(rs[1].score == 9);

        std::istringstream binary(R"({"item_id":"a","field":"genre","correct":true})");
        CHECK(read_binary_jsonl(binary).at(0).correct);

        std::istringstream ranks(R"({"order":["x","y"]})");
        CHECK(read_rankings_jsonl(ranks).at(0).order.size() == 2);

        std::istringstream audits(R"({"model_id":"m","fields":[{"field":"genre","accuracy":0.5}]})");
        CHECK(read_audits_jsonl(audits).at(0).fields.at(0).accuracy == 0.5);

        std::istringstream bad("{\"item_id\":\"a\"}\nnot json\n");
        CHECK_THROWS_AS(read_binary_jsonl(bad), ValidationError);
        std::istringstream bad_line("{\"order\":[\"x\"]}\n{oops\n");
        try {
            read_rankings_jsonl(bad_line);
            FAIL("expected a parse error");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("line 2") != std::string::npos);
        }
    }
}
