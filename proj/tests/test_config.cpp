#include <catch_amalgamated.hpp>

#include "scatlen/config.hpp"

using namespace scatlen;

namespace {

Json minimal() {
    return Json::parse(R"({
        "problem": {"dim": 1, "alpha": 0.6, "box": {"lower": [-4], "upper": [4]}, "n": 64},
        "potential": {"type": "gaussian", "center": [0], "width": 0.5, "amplitude": 1}
    })");
}

std::string error_key(const Json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "<no error>";
}

}  // namespace

TEST_CASE("shipped default config parses", "[config]") {
    const RunConfig c = load_config(std::string(SCATLEN_SOURCE_DIR) + "/configs/default.json");
    CHECK(c.problem.dim == 1);
    CHECK(c.problem.alpha == 0.6);
    CHECK(c.problem.n == 256);
    CHECK(c.mc.paths == 100000);
    CHECK_FALSE(c.mc.start.has_value());
    CHECK(c.capacity.set.has_value());
    CHECK(c.spectral.omega == cube(1, -1, 1));
}

TEST_CASE("defaults fill optional blocks", "[config]") {
    const RunConfig c = parse_config(minimal());
    CHECK(c.solver.tolerance == 1e-10);
    CHECK(c.scaling_r == 2.0);
    CHECK(c.threads == 1);
    CHECK(c.mc_config().seed == c.seed);
}

TEST_CASE("errors name the offending key", "[config]") {
    Json j = minimal();
    j["problem"].erase("alpha");
    CHECK(error_key(j) == "problem.alpha");

    j = minimal();
    j["mc"] = {{"paths", 10}, {"stepp", 0.1}};
    CHECK(error_key(j) == "mc.stepp");

    j = minimal();
    j["extra"] = 1;
    CHECK(error_key(j) == "extra");

    j = minimal();
    j["problem"]["alpha"] = 2.5;
    CHECK(error_key(j) == "problem");

    j = minimal();
    j["potential"] = {{"type", "sum"}, {"terms", {{{"type", "box"}, {"lower", {0}}}}}};
    CHECK(error_key(j) == "potential.terms[0].upper");

    j = minimal();
    j["potential"]["amplitude"] = -1.0;
    CHECK(error_key(j) == "potential");

    j = minimal();
    j["potential"]["type"] = "hexagon";
    CHECK(error_key(j) == "potential.type");

    j = minimal();
    j["problem"]["n"] = "many";
    CHECK(error_key(j) == "problem.n");

    j = minimal();
    j["mc"] = {{"horizon", 0.001}};
    CHECK(error_key(j) == "mc");

    j = minimal();
    j["capacity"] = {{"multipliers", {10, 5}}};
    CHECK(error_key(j) == "capacity.multipliers");

    CHECK_THROWS_AS(parse_config_text("{ not json"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("resolved config round-trips", "[config]") {
    Json j = minimal();
    j["potential"] = Json::parse(R"({"type": "sum", "terms": [
        {"type": "scale", "factor": 2, "of": {"type": "ball", "center": [0.5], "radius": 0.25}},
        {"type": "box", "lower": [-1], "upper": [0], "amplitude": 3}]})");
    j["mc"] = {{"start", {0.25}}};
    const RunConfig a = parse_config(j);
    const RunConfig b = parse_config(config_to_json(a));
    CHECK(config_to_json(a) == config_to_json(b));
    const GridSpec g = a.problem.grid();
    const Potential va = eval_potential(a.potential, g), vb = eval_potential(b.potential, g);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(va[i] == vb[i]);
    REQUIRE(b.mc.start.has_value());
    CHECK((*b.mc.start)[0] == 0.25);
}

TEST_CASE("config hash ignores threads and output", "[config]") {
    RunConfig a = parse_config(minimal());
    RunConfig b = a;
    b.threads = 4;
    b.output.dir = "/tmp/x";
    CHECK(config_hash(a) == config_hash(b));
    b.seed += 1;
    CHECK(config_hash(a) != config_hash(b));
    CHECK(config_hash(a).size() == 16);
}
