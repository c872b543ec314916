#include <cmath>

#include <doctest.h>

#include "fixtures.hpp"
#include "srcplan/config.hpp"
#include "srcplan/error.hpp"
#include "srcplan/report.hpp"

using namespace srcplan;

TEST_SUITE("config") {

TEST_CASE("parse key = value lines with comments") {
    auto c = Config::parse("# run\nseed = 7\n\nlm.alpha=0.25\nschemata = A, B ,,C\nflag = yes\n");
    CHECK(c.get_u64("seed", 0) == 7);
    CHECK(c.get_double("lm.alpha", 0) == 0.25);
    CHECK(c.get_list("schemata") == std::vector<std::string>{"A", "B", "C"});
    CHECK(c.get_bool("flag", false));
    CHECK(c.get_string("missing", "fallback") == "fallback");
    CHECK(c.get_size("missing", 3) == 3);
}

TEST_CASE("malformed configs are usage errors with line numbers") {
    try {
        Config::parse("a = 1\nno equals sign\n");
        FAIL("expected a usage error");
    } catch (const UsageError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(Config::parse("a = 1\na = 2\n"), UsageError);
    auto c = Config::parse("n = -4\nx = 1.5abc\nb = maybe\n");
    CHECK_THROWS_AS(c.get_u64("n", 0), UsageError);
    CHECK_THROWS_AS(c.get_double("x", 0), UsageError);
    CHECK_THROWS_AS(c.get_bool("b", false), UsageError);
    std::vector<std::string_view> known{"n", "x"};
    CHECK_THROWS_AS(c.require_known(known), UsageError);
}

TEST_CASE("overrides, canonical form and hash") {
    auto a = Config::parse("b = 2\na = 1\n");
    auto b = Config::parse("a=1\nb=2\n");
    CHECK(a.canonical() == "a=1\nb=2\n");
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);
    b.set_override("b=3");
    CHECK(b.get_u64("b", 0) == 3);
    CHECK(a.hash() != b.hash());
    CHECK_THROWS_AS(b.set_override("nothing"), UsageError);
}

}  // TEST_SUITE

TEST_SUITE("report") {

TEST_CASE("CSV round trip with metadata and quoting") {
    Table t;
    t.header = {"name", "value"};
    t.rows = {{"plain", "1"}, {"with, comma", "say \"hi\""}, {"multi\nline", ""}};
    auto text = to_csv(t, {{"config_hash", "abc"}, {"seed", "7"}});
    CHECK(text.rfind("# config_hash: abc\n# seed: 7\n", 0) == 0);
    auto back = parse_csv(text);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
    CHECK_THROWS_AS(parse_csv("a,b\n1\n"), DataError);
    CHECK_THROWS_AS(parse_csv("a\n\"open\n"), DataError);
}

TEST_CASE("markdown table shape") {
    Table t{{"a", "b"}, {{"1", "2"}}};
    CHECK(to_markdown(t) == "| a | b |\n| --- | --- |\n| 1 | 2 |\n");
}

TEST_CASE("number formatting") {
    CHECK(format_number(1.23456789) == "1.2346");
    CHECK(format_number(-0.00001) == "0.0000");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(2.5, 1) == "2.5");
}

TEST_CASE("summary table marks significance") {
    SummaryRow sig{"Stance", 4, 12.5};
    sig.delta_base_r = -1.5;
    sig.p_base_r = 0.01;
    sig.delta_base_k = 0.2;
    sig.p_base_k = 0.3;
    sig.f1 = 0.6;
    SummaryRow same{"Copy", 4, 13.0};
    same.delta_base_r = 0.0;
    same.p_base_r = 1.0;
    auto t = summary_table({sig, same});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][4] == "-1.5000**");
    CHECK(t.rows[0][3] == "0.2000");
    CHECK(t.rows[1][4] == "0.0000");
    CHECK(t.rows[1][5].empty());
    CHECK(significance_stars(std::nullopt).empty());
}

TEST_CASE("SVG output is well formed enough to open") {
    auto h = svg_histogram("ppl <A&B>", {1, 2, 2, 3, 10}, 4);
    CHECK(h.rfind("<svg", 0) == 0);
    CHECK(h.find("&lt;A&amp;B&gt;") != std::string::npos);
    CHECK(h.find("</svg>") != std::string::npos);
    auto m = svg_heatmap("V", {"a", "b"}, {{1, 0.3}, {0.3, 1}});
    CHECK(m.find("0.30") != std::string::npos);
}

TEST_CASE("write and read text files") {
    fixture::TempDir tmp("report");
    write_text(tmp.path / "nested" / "f.txt", "hello\n");
    CHECK(read_text(tmp.path / "nested" / "f.txt") == "hello\n");
    CHECK_THROWS_AS(read_text(tmp.path / "absent.txt"), DataError);
}

}  // TEST_SUITE
