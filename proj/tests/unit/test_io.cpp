#include <doctest.h>

#include <filesystem>

#include "epsim/bench.hpp"
#include "epsim/io.hpp"
#include "support/helpers.hpp"

using namespace epsim;
using namespace epsim::testing;
using nlohmann::json;

TEST_CASE("network document round trips") {
    for (auto scheme : {PhaseScheme::FourPhase, PhaseScheme::EightPhase}) {
        const RoadNetwork net = build_grid(2, 3, 400, 800, scheme);
        const json doc = network_to_json(net);
        CHECK(doc.contains("intersections"));
        CHECK(doc.contains("roads"));
        CHECK(doc.contains("phase_scheme"));
        const RoadNetwork back = network_from_json(doc);
        CHECK(network_to_json(back) == doc);
        CHECK(back.intersections.size() == net.intersections.size());
        CHECK(back.lanes.size() == net.lanes.size());
        CHECK(validate(back).empty());
    }
}

TEST_CASE("network document uses boundary markers and lane designations") {
    const json doc = network_to_json(build_grid(1, 1, 300, 300, PhaseScheme::FourPhase));
    bool saw_source = false;
    for (const auto& road : doc["roads"]) {
        if (road["from"] == "boundary") {
            saw_source = true;
            CHECK(road["lanes"].size() == 3);
            CHECK(road["lanes"][0]["designation"] == json::array({"L"}));
            CHECK(road["lanes"][0]["index"] == 0);
        }
        CHECK(road.contains("length_m"));
        CHECK(road.contains("speed_mps"));
    }
    CHECK(saw_source);
}

TEST_CASE("network loader rejects malformed documents") {
    json doc = network_to_json(build_grid(1, 1, 300, 300, PhaseScheme::FourPhase));
    SUBCASE("missing key") {
        doc.erase("roads");
        CHECK_THROWS_AS(network_from_json(doc), ConfigError);
    }
    SUBCASE("unknown endpoint") {
        doc["roads"][0]["to"] = "nowhere";
        CHECK_THROWS_AS(network_from_json(doc), ConfigError);
    }
    SUBCASE("both endpoints boundary") {
        doc["roads"][0]["from"] = "boundary";
        doc["roads"][0]["to"] = "boundary";
        CHECK_THROWS_AS(network_from_json(doc), ConfigError);
    }
    SUBCASE("bad designation") {
        doc["roads"][0]["lanes"][0]["designation"] = json::array({"X"});
        CHECK_THROWS_AS(network_from_json(doc), ConfigError);
    }
}

TEST_CASE("flow document round trips and validates routes") {
    const RoadNetwork net = build_grid(1, 2, 300, 300, PhaseScheme::FourPhase);
    const auto flows = generate_synthetic_demand(net, UniformDemand{0.05}, 4);
    const json doc = flows_to_json(net, flows);
    const auto back = flows_from_json(net, doc);
    REQUIRE(back.size() == flows.size());
    for (std::size_t k = 0; k < flows.size(); ++k) {
        CHECK(back[k].route == flows[k].route);
        CHECK(back[k].start_s == flows[k].start_s);
        CHECK(back[k].end_s == flows[k].end_s);
        CHECK(back[k].headway_s == flows[k].headway_s);
    }

    json bad = json::array({{{"route", {"in:I_0_0:W", "out:I_0_0:N"}}, {"start_s", 0}, {"end_s", 10}, {"headway_s", 0}}});
    CHECK_THROWS_AS(flows_from_json(net, bad), ConfigError);
    bad[0]["headway_s"] = 5;
    bad[0]["route"] = {"in:I_0_0:W", "I_0_1->I_0_0"};
    CHECK_THROWS_AS(flows_from_json(net, bad), ConfigError);
    bad[0]["route"] = {"in:I_0_0:W", "no-such-road"};
    CHECK_THROWS_AS(flows_from_json(net, bad), ConfigError);
    bad[0]["route"] = {"I_0_0->I_0_1", "out:I_0_1:E"};
    CHECK_THROWS_AS(flows_from_json(net, bad), ConfigError);
}

TEST_CASE("sim config overrides keep defaults for absent keys") {
    const SimConfig c = sim_config_from_json(json{{"yellow", 4}, {"episode_length", 600}});
    CHECK(c.yellow == 4);
    CHECK(c.episode_length == 600);
    CHECK(c.all_red == 2);
    CHECK(c.tick == 1);
    CHECK(sim_config_from_json(sim_config_to_json(c)).yellow == 4);
    CHECK_THROWS_AS(sim_config_from_json(json{{"tick", 0}}), ConfigError);
}

TEST_CASE("files round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "epsim_io_test";
    std::filesystem::create_directories(dir);
    const RoadNetwork net = build_grid(2, 2, 300, 300, PhaseScheme::EightPhase);
    save_network(dir / "net.json", net);
    const RoadNetwork back = load_network(dir / "net.json");
    CHECK(network_to_json(back) == network_to_json(net));
    const auto flows = generate_synthetic_demand(back, UniformDemand{0.02}, 1);
    save_flows(dir / "flows.json", back, flows);
    CHECK(load_flows(dir / "flows.json", back).size() == flows.size());
    CHECK_THROWS_AS(load_network(dir / "missing.json"), ConfigError);
    std::filesystem::remove_all(dir);
}
