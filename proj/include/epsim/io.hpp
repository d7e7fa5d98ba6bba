#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "epsim/network.hpp"
#include "epsim/sim.hpp"

namespace epsim {

// Network document:
//   { "phase_scheme": "4" | "8",
//     "intersections": [ { "id", "approaches": {"N": road, ...}, "exits": {...} } ],
//     "roads": [ { "id", "from", "to", "length_m", "speed_mps",
//                  "lanes": [ { "index", "designation": ["L","T","R"] } ] } ] }
// "from"/"to" hold an intersection id or "boundary".
nlohmann::json network_to_json(const RoadNetwork& net);
RoadNetwork network_from_json(const nlohmann::json& doc);

// Flow document: [ { "route": [road ids], "start_s", "end_s", "headway_s" } ]
nlohmann::json flows_to_json(const RoadNetwork& net, const std::vector<FlowSpec>& flows);
std::vector<FlowSpec> flows_from_json(const RoadNetwork& net, const nlohmann::json& doc);

/// SimConfig overrides; absent keys keep the defaults in `base`.
SimConfig sim_config_from_json(const nlohmann::json& doc, SimConfig base = {});
nlohmann::json sim_config_to_json(const SimConfig& config);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

RoadNetwork load_network(const std::filesystem::path& path);
void save_network(const std::filesystem::path& path, const RoadNetwork& net);
std::vector<FlowSpec> load_flows(const std::filesystem::path& path, const RoadNetwork& net);
void save_flows(const std::filesystem::path& path, const RoadNetwork& net, const std::vector<FlowSpec>& flows);

}  // namespace epsim
