#include <doctest.h>

#include "helpers.hpp"
#include "kneexnet/toml.hpp"

using nlohmann::json;
using namespace kneexnet;

TEST_CASE("toml scalars, arrays and tables") {
    const auto doc = toml::parse(R"(# experiment
name = "knee"   # trailing comment
path = 'C:\data\x'
count = 1_000
neg = -3
rate = 1e-4
ratio = 0.5
on = true
off = false
seeds = [0, 1,
  2,  # third
]
nested = [[1, 2], ["a"]]
point = { x = 1, y = "two" }

[split]
ratios = "7:1:2"

[train.augmentation]
hflip_prob = 0.0
"quoted key" = "esc\t\"q\"\u00e9"
)");
    CHECK(doc["name"] == "knee");
    CHECK(doc["path"] == "C:\\data\\x");
    CHECK(doc["count"] == 1000);
    CHECK(doc["neg"] == -3);
    CHECK(doc["rate"].get<double>() == 1e-4);
    CHECK(doc["ratio"].is_number_float());
    CHECK(doc["on"] == true);
    CHECK(doc["off"] == false);
    CHECK(doc["seeds"] == json::array({0, 1, 2}));
    CHECK(doc["nested"][1][0] == "a");
    CHECK(doc["point"] == json({{"x", 1}, {"y", "two"}}));
    CHECK(doc["split"]["ratios"] == "7:1:2");
    CHECK(doc["train"]["augmentation"]["hflip_prob"].get<double>() == 0.0);
    CHECK(doc["train"]["augmentation"]["quoted key"] == "esc\t\"q\"\xc3\xa9");
}

TEST_CASE("toml dump round trips") {
    const json doc = {{"a", 1},
                      {"b", 0.1},
                      {"c", 3.0},
                      {"d", "x\"y\n"},
                      {"e", json::array({1.5, 2.5})},
                      {"f", true},
                      {"g", {{"h", 1e-9}, {"i", {{"j", "deep"}}}}},
                      {"odd key", -2}};
    const auto text = toml::dump(doc);
    CHECK(text.find("c = 3.0") != std::string::npos);
    CHECK(text.find("[g.i]") != std::string::npos);
    CHECK(toml::parse(text) == doc);
    CHECK(toml::dump(toml::parse(text)) == text);
}

TEST_CASE("toml errors report the line") {
    auto message = [](std::string_view text) {
        try {
            toml::parse(text);
        } catch (const toml::ParseError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message("a = 1\na = 2\n") == "line 2: duplicate key 'a'");
    CHECK(message("a = \"open\n") == "line 1: unterminated string");
    CHECK(message("a = [1, 2\n") .find("line") == 0);
    CHECK(message("a = 12abc\n") == "line 1: invalid value '12abc'");
    CHECK(message("a = 1 b = 2\n") == "line 1: unexpected trailing characters");
    CHECK(message("x = 1\n\n[[t]]\n") == "line 3: arrays of tables are not supported");
    CHECK(message("a = 1\n[a]\n") == "line 2: 'a' is not a table");
    CHECK(message("= 3\n") == "line 1: expected a key");
    CHECK(message("a =\n") == "line 1: expected a value");
}

TEST_CASE("toml file errors name the file") {
    const auto dir = test_support::scratch_dir("toml_file");
    test_support::write_file(dir / "bad.toml", "x = \n");
    CHECK_THROWS_WITH_AS(toml::parse_file(dir / "bad.toml"), doctest::Contains("bad.toml: line 1"), toml::ParseError);
    CHECK_THROWS_WITH_AS(toml::parse_file(dir / "missing.toml"), doctest::Contains("cannot open"), toml::ParseError);
}
