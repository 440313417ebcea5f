#include <doctest.h>

#include <algorithm>
#include <set>

#include "cyl/config.hpp"
#include "cyl/floer.hpp"
#include "cyl/report.hpp"
#include "cyl/suites.hpp"

using namespace cyl;

namespace {

// the first diagnostic mentioning `key`, or ""
std::string error_for(const std::string& text, const std::string& key) {
    try {
        ExperimentConfig::parse(text);
    } catch (const ConfigError& e) {
        for (const auto& f : e.fields)
            if (f.rfind(key, 0) == 0) return f;
        return "other: " + e.fields.front();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults are valid and round-trip") {
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    auto back = ExperimentConfig::parse(c.serialize());
    CHECK(back == c);
    CHECK(back.serialize() == c.serialize());
    CHECK(back.hash() == c.hash());
    CHECK(c.hash_hex().size() == 16);

    // a non-default value survives too, including awkward doubles
    auto d = ExperimentConfig::parse("model.eps = 0.1\niia.sizes = 1e-2, 0.30000000000000004\nseed = 7\n");
    CHECK(d.real("model.eps") == 0.1);
    CHECK(d.reals("iia.sizes")[1] == 0.30000000000000004);
    CHECK(ExperimentConfig::parse(d.serialize()) == d);
    CHECK(d.hash() != c.hash());
    CHECK(d.integer("seed") == 7);
}

TEST_CASE("grid overrides inherit per field") {
    auto c = ExperimentConfig::parse("grid.s_max = 160\ngrid.n_s = 481\nindex.grid.n_t = 16\n");
    auto g = c.grid("index");
    CHECK(g.s_max == 160);
    CHECK(g.n_s == 481);
    CHECK(g.n_t == 16);
    CHECK(c.grid("glue").n_s == 3201);
    CHECK(c.grid().n_t == 8);
}

TEST_CASE("field-level diagnostics") {
    CHECK(error_for("grid.n_s = 400\n", "grid.n_s").find("odd") != std::string::npos);
    CHECK(error_for("glue.grid.n_s = 3200\n", "glue.grid.n_s").find("odd") != std::string::npos);
    CHECK(error_for("no.such.key = 1\n", "no.such.key").find("unknown key") != std::string::npos);
    CHECK(error_for("model.a = fast\n", "model.a").find("number") != std::string::npos);
    CHECK(error_for("seed = 1\nseed = 2\n", "seed").find("twice") != std::string::npos);
    CHECK(error_for("weights.delta = 0.2, 0.1\n", "weights.delta").find("increasing") != std::string::npos);
    CHECK(error_for("weights.cap = 0.3\n", "weights.cap") != "");
    CHECK(error_for("iia.models = linear, cubic\n", "iia.models").find("cubic") != std::string::npos);
    CHECK(error_for("iib.levels = 3\n", "iib.levels").find("delta_4") != std::string::npos);
    CHECK(error_for("contraction.levels = 0\n", "contraction.levels") != "");
    CHECK(error_for("scales.pairs = 0:1\n", "scales.pairs") != "");
    CHECK(error_for("glue.necks = 40\n", "glue.necks").find("42") != std::string::npos);
    CHECK(error_for("just words\n", "line 1").find("key = value") != std::string::npos);
    // the margin rule names the key to change and the value it needs
    auto m = error_for("index.necks = 45, 120\n", "index.necks");
    CHECK(m.find("grid.s_max >= 171") != std::string::npos);
    CHECK(error_for("germ.grid.s_max = 60\n", "germ.neck").find("germ.grid.s_max >= 96") != std::string::npos);

    // every problem is reported at once
    try {
        ExperimentConfig::parse("grid.n_s = 400\nmodel.a = -1\nfoo = 1\n");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.fields.size() == 1);  // parse errors stop before validation
    }
    try {
        ExperimentConfig::parse("grid.n_s = 400\nmodel.a = -1\n");
        FAIL("expected a config error");
    } catch (const ConfigError& e) {
        CHECK(e.fields.size() >= 2);
    }
    ExperimentConfig c;
    CHECK_THROWS_AS(c.set("grid.n_s", "x"), ConfigError);
    CHECK_THROWS_AS(c.set("bogus", "1"), ConfigError);
}

TEST_CASE("hash and csv helpers") {
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);

    Csv t({"a", "b", "c"});
    t.row(1, -0.0, std::string("x"));
    t.row(2.5, 1e-20, true);
    CHECK(t.str() == "a,b,c\n1,0,x\n2.5,1e-20,1\n");
    CHECK_THROWS(t.row(1, 2));
    CHECK(Csv::cell(kInfiniteRate) == "inf");
}

TEST_CASE("suites and exit codes") {
    const auto& n = suite_names();
    CHECK(n.size() == 10);
    std::set<int> codes;
    for (const auto& s : n) codes.insert(suite_exit_code(s));
    CHECK(codes.size() == n.size());
    CHECK(*codes.begin() == 3);
    CHECK_FALSE(is_suite("full-report"));
    CHECK_THROWS(suite_exit_code("nope"));
}
