#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "shotweave/error.hpp"
#include "shotweave/taxonomy.hpp"

using namespace shotweave;
using nlohmann::json;

namespace {

// Independent marginal count over one dimension.
template <typename Extract>
std::map<std::string, std::size_t> marginal(const std::vector<ControlSignals>& entries, Extract extract) {
    std::map<std::string, std::size_t> counts;
    for (const auto& e : entries) {
        ++counts[extract(e)];
    }
    return counts;
}

std::size_t spread(const std::map<std::string, std::size_t>& counts, std::size_t categories) {
    std::size_t lo = counts.size() < categories ? 0 : ~std::size_t{0};
    std::size_t hi = 0;
    for (const auto& [k, v] : counts) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

}  // namespace

TEST_SUITE("taxonomy") {
    TEST_CASE("default taxonomy has 17 movements over 9 families") {
        const Taxonomy t = default_taxonomy();
        CHECK(t.movements.size() == 17);
        std::set<std::string> families;
        for (const auto& m : t.movements) {
            families.insert(t.movement_families.at(m));
        }
        CHECK(families.size() == 9);
        CHECK(t.genres.size() == 13);
        CHECK(t.shot_counts == std::vector<int>{1, 2, 3});
        CHECK(t.movement_families.at("pedestal up") == "pedestal");
        CHECK(t.movement_families.at("arc right") == "arc");
    }

    TEST_CASE("config extends genres and rejects broken vocabularies") {
        const Taxonomy t = load_taxonomy(json{{"genres", {"noir", "musical"}}});
        CHECK(t.genres == std::vector<std::string>{"noir", "musical"});
        CHECK(t.movements.size() == 17);

        CHECK_THROWS_AS(load_taxonomy(json{{"genres", {"noir", "noir"}}}), ValidationError);
        CHECK_THROWS_AS(load_taxonomy(json{{"genres", json::array()}}), ValidationError);
        CHECK_THROWS_AS(load_taxonomy(json{{"movements", {"static"}}}), ValidationError);
        CHECK_THROWS_AS(load_taxonomy(json{{"shot_counts", {1, 4}}}), ValidationError);
        CHECK_THROWS_AS(load_taxonomy(json::array()), ValidationError);

        json moves = to_json(default_taxonomy());
        moves["movement_families"].erase("arc left");
        CHECK_THROWS_AS(load_taxonomy(moves), ValidationError);
    }

    TEST_CASE("taxonomy document round-trips") {
        const Taxonomy t = default_taxonomy();
        const Taxonomy back = load_taxonomy(to_json(t));
        CHECK(back.genres == t.genres);
        CHECK(back.movements == t.movements);
        CHECK(back.movement_families == t.movement_families);
    }

    TEST_CASE("signals validation") {
        const Taxonomy t = default_taxonomy();
        ControlSignals s{"s1", "drama", 2, {"pan left", "zoom in"}, "single", "dynamic"};
        CHECK_NOTHROW(validate_signals(s, t));

        auto bad = s;
        bad.movements = {"pan left", "pan left"};
        CHECK_THROWS_AS(validate_signals(bad, t), ValidationError);
        bad = s;
        bad.movements = {"pan left"};
        CHECK_THROWS_AS(validate_signals(bad, t), ValidationError);
        bad = s;
        bad.genre = "opera";
        CHECK_THROWS_AS(validate_signals(bad, t), ValidationError);
        bad = s;
        bad.movements = {"pan left", "whip pan"};
        CHECK_THROWS_AS(validate_signals(bad, t), ValidationError);
        bad = s;
        bad.subject_count = "two";
        CHECK_THROWS_AS(validate_signals(bad, t), ValidationError);
        CHECK_THROWS_AS(signals_from_json(json{{"sample_id", "x"}}), ValidationError);
    }

    TEST_CASE("plan marginals are balanced for many sizes") {
        const Taxonomy t = default_taxonomy();
        for (std::size_t n : {0u, 1u, 2u, 16u, 17u, 18u, 100u, 391u, 1000u}) {
            CAPTURE(n);
            const BalancePlan plan = generate_plan(n, t, 1234 + n);
            REQUIRE(plan.entries.size() == n);
            const auto& e = plan.entries;
            CHECK(spread(marginal(e, [](auto& s) { return s.genre; }), t.genres.size()) <= 1);
            CHECK(spread(marginal(e, [](auto& s) { return std::to_string(s.shot_count); }), 3) <= 1);
            CHECK(spread(marginal(e, [](auto& s) { return s.movements.front(); }), 17) <= 1);
            CHECK(spread(marginal(e, [](auto& s) { return s.subject_count; }), 3) <= 1);
            CHECK(spread(marginal(e, [](auto& s) { return s.dynamicity; }), 2) <= 1);
            for (const auto& s : e) {
                REQUIRE_NOTHROW(validate_signals(s, t));
            }
            for (const auto& [dim, bal] : plan.report) {
                CAPTURE(dim);
                if (dim != "movement_all") {
                    CHECK(bal.max_deviation <= 1);
                    CHECK(bal.total() == n);
                }
            }
        }
    }

    TEST_CASE("later-shot movements keep all-shot counts close") {
        const BalancePlan plan = generate_plan(1700, default_taxonomy(), 5);
        std::map<std::string, std::size_t> all;
        for (const auto& s : plan.entries) {
            for (const auto& m : s.movements) {
                ++all[m];
            }
        }
        CHECK(all.size() == 17);
        CHECK(spread(all, 17) <= 2);
    }

    TEST_CASE("plans are deterministic in the seed") {
        const Taxonomy t = default_taxonomy();
        std::ostringstream a, b, c;
        write_plan_jsonl(generate_plan(300, t, 9), a);
        write_plan_jsonl(generate_plan(300, t, 9), b);
        write_plan_jsonl(generate_plan(300, t, 10), c);
        CHECK(a.str() == b.str());
        CHECK(a.str() != c.str());
    }

    TEST_CASE("plan jsonl round-trips and validates lines") {
        const Taxonomy t = default_taxonomy();
        const BalancePlan plan = generate_plan(40, t, 3);
        std::stringstream io;
        write_plan_jsonl(plan, io);
        const auto back = read_plan_jsonl(io, t);
        CHECK(back == plan.entries);

        std::istringstream bad(R"({"sample_id":"a","genre":"opera","shot_count":1,"movements":["static"],)"
                               R"("subject_count":"zero","dynamicity":"static"})");
        CHECK_THROWS_AS(read_plan_jsonl(bad, t), ValidationError);
        std::istringstream garbage("{not json\n");
        CHECK_THROWS_AS(read_plan_jsonl(garbage, t), ValidationError);
    }

    TEST_CASE("balance report handles an empty entry list") {
        const auto report = balance_report(std::vector<ControlSignals>{}, default_taxonomy());
        CHECK(report.at("genre").total() == 0);
        CHECK(report.at("genre").max_deviation == 0);
    }
}
