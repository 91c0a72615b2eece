#include <doctest.h>

#include <fstream>

#include "shotweave/error.hpp"
#include "shotweave/prompts.hpp"
#include "test_support.hpp"

using namespace shotweave;
using shotweave::testing::TempDir;

TEST_SUITE("prompts") {
    TEST_CASE("built-in templates are present with their placeholders") {
        const PromptLibrary lib;
        for (const char* name : {"storyteller", "cinematographer", "judge"}) {
            CAPTURE(name);
            REQUIRE(lib.contains(name));
        }
        CHECK(lib.get("storyteller").find("{{genre}}") != std::string::npos);
        CHECK(lib.get("cinematographer").find("{{movement}}") != std::string::npos);
        CHECK(lib.get("judge").find("{{screenplay}}") != std::string::npos);
        CHECK_THROWS_AS(lib.get("narrator"), NotFoundError);
    }

    TEST_CASE("render substitutes every slot and rejects missing values") {
        CHECK(render_template("a {{x}} b {{y}}{{x}}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 21");
        CHECK(render_template("no slots", {}) == "no slots");
        CHECK_THROWS_AS(render_template("{{x}}", {}), ValidationError);
        CHECK_THROWS_AS(render_template("{{x", {{"x", "1"}}), ValidationError);
    }

    TEST_CASE("override directory replaces named templates only") {
        TempDir dir("prompts");
        std::ofstream(dir / "judge.txt") << "Judge {{screenplay}}";
        std::ofstream(dir / "notes.md") << "ignored";
        const PromptLibrary lib(dir.path());
        CHECK(lib.get("judge") == "Judge {{screenplay}}");
        CHECK(lib.get("storyteller") == PromptLibrary().get("storyteller"));
        CHECK_FALSE(lib.contains("notes"));
        CHECK_THROWS_AS(PromptLibrary(dir / "missing"), ValidationError);
    }
}
