#include "epsim/io.hpp"

#include <algorithm>
#include <fstream>
#include <map>

namespace epsim {

using nlohmann::json;

namespace {

constexpr const char* kBoundary = "boundary";

template <class T>
T field(const json& doc, const char* key, const std::string& where) {
    if (!doc.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
    try {
        return doc.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(where + ": bad field '" + key + "': " + e.what());
    }
}

}  // namespace

json network_to_json(const RoadNetwork& net) {
    json doc;
    doc["phase_scheme"] = std::string(to_string(net.phase_scheme));
    auto endpoint = [&](const std::optional<IntersectionId>& id) -> json {
        return id ? json(net.intersection(*id).name) : json(kBoundary);
    };
    json intersections = json::array();
    for (const auto& node : net.intersections) {
        json approaches = json::object();
        json exits = json::object();
        for (Compass c : kCompassOrder) {
            const auto s = static_cast<std::size_t>(c);
            if (node.approach_roads[s]) approaches[std::string(to_string(c))] = net.road(*node.approach_roads[s]).name;
            if (node.exit_roads[s]) exits[std::string(to_string(c))] = net.road(*node.exit_roads[s]).name;
        }
        intersections.push_back({{"id", node.name}, {"approaches", approaches}, {"exits", exits}});
    }
    doc["intersections"] = std::move(intersections);

    json roads = json::array();
    for (const auto& road : net.roads) {
        json lanes = json::array();
        for (LaneId l : road.lanes) {
            const Lane& lane = net.lane(l);
            json designation = json::array();
            for (Turn t : kTurnOrder)
                if (lane.designation.contains(t)) designation.push_back(std::string(to_string(t)));
            lanes.push_back({{"index", lane.index}, {"designation", designation}});
        }
        roads.push_back({{"id", road.name},
                         {"from", endpoint(road.from)},
                         {"to", endpoint(road.to)},
                         {"length_m", road.length_m},
                         {"speed_mps", road.speed_mps},
                         {"lanes", lanes}});
    }
    doc["roads"] = std::move(roads);
    return doc;
}

RoadNetwork network_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("network document must be an object");
    RoadNetwork net;
    const json scheme = doc.value("phase_scheme", json("4"));
    net.phase_scheme = phase_scheme_from_string(scheme.is_number() ? std::to_string(scheme.get<int>())
                                                                   : scheme.get<std::string>());

    std::map<std::string, IntersectionId> node_ids;
    for (const auto& item : field<json>(doc, "intersections", "network")) {
        Intersection node;
        node.id = IntersectionId(net.intersections.size());
        node.name = field<std::string>(item, "id", "intersection");
        if (!node_ids.emplace(node.name, node.id).second) throw ConfigError("duplicate intersection id " + node.name);
        net.intersections.push_back(std::move(node));
    }

    std::map<std::string, RoadId> road_ids;
    for (const auto& item : field<json>(doc, "roads", "network")) {
        Road road;
        road.id = RoadId(net.roads.size());
        road.name = field<std::string>(item, "id", "road");
        const std::string where = "road " + road.name;
        auto resolve = [&](const char* key) -> std::optional<IntersectionId> {
            const auto name = field<std::string>(item, key, where);
            if (name == kBoundary) return std::nullopt;
            const auto it = node_ids.find(name);
            if (it == node_ids.end()) throw ConfigError(where + ": unknown intersection " + name);
            return it->second;
        };
        road.from = resolve("from");
        road.to = resolve("to");
        road.length_m = field<double>(item, "length_m", where);
        road.speed_mps = field<double>(item, "speed_mps", where);
        auto lanes = field<json>(item, "lanes", where);
        std::vector<std::pair<int, TurnSet>> parsed;
        for (const auto& lane_doc : lanes) {
            TurnSet designation;
            for (const auto& t : field<std::vector<std::string>>(lane_doc, "designation", where))
                designation.insert(turn_from_string(t));
            parsed.emplace_back(field<int>(lane_doc, "index", where), designation);
        }
        std::sort(parsed.begin(), parsed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (const auto& [index, designation] : parsed) {
            Lane lane;
            lane.id = LaneId(net.lanes.size());
            lane.road = road.id;
            lane.index = index;
            lane.designation = designation;
            road.lanes.push_back(lane.id);
            net.lanes.push_back(lane);
        }
        if (!road_ids.emplace(road.name, road.id).second) throw ConfigError("duplicate road id " + road.name);
        net.roads.push_back(std::move(road));
    }

    const auto& nodes = doc.at("intersections");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        auto& node = net.intersections[k];
        auto attach = [&](const char* key, std::array<std::optional<RoadId>, 4>& slots, bool incoming) {
            if (!nodes[k].contains(key)) return;
            for (const auto& [side, name] : nodes[k].at(key).items()) {
                const auto it = road_ids.find(name.get<std::string>());
                if (it == road_ids.end()) throw ConfigError("intersection " + node.name + ": unknown road " + name.dump());
                const Road& road = net.road(it->second);
                if ((incoming ? road.to : road.from) != node.id)
                    throw ConfigError("intersection " + node.name + ": road " + road.name + " is not attached here");
                slots[static_cast<std::size_t>(compass_from_string(side))] = it->second;
            }
        };
        attach("approaches", node.approach_roads, true);
        attach("exits", node.exit_roads, false);
    }
    finalize_network(net);
    return net;
}

json flows_to_json(const RoadNetwork& net, const std::vector<FlowSpec>& flows) {
    json doc = json::array();
    for (const auto& f : flows) {
        json route = json::array();
        for (RoadId r : f.route) route.push_back(net.road(r).name);
        doc.push_back({{"route", route}, {"start_s", f.start_s}, {"end_s", f.end_s}, {"headway_s", f.headway_s}});
    }
    return doc;
}

std::vector<FlowSpec> flows_from_json(const RoadNetwork& net, const json& doc) {
    if (!doc.is_array()) throw ConfigError("flow document must be a list");
    std::vector<FlowSpec> flows;
    for (const auto& item : doc) {
        const std::string where = "flow " + std::to_string(flows.size());
        FlowSpec f;
        for (const auto& name : field<std::vector<std::string>>(item, "route", where)) {
            const auto id = net.find_road(name);
            if (!id) throw ConfigError(where + ": unknown road " + name);
            f.route.push_back(*id);
        }
        f.start_s = field<double>(item, "start_s", where);
        f.end_s = field<double>(item, "end_s", where);
        f.headway_s = field<double>(item, "headway_s", where);
        compile_route(net, f, flows.size());
        flows.push_back(std::move(f));
    }
    return flows;
}

SimConfig sim_config_from_json(const json& doc, SimConfig base) {
    if (doc.is_null()) return base;
    if (!doc.is_object()) throw ConfigError("sim config must be an object");
    base.tick = doc.value("tick", base.tick);
    base.yellow = doc.value("yellow", base.yellow);
    base.all_red = doc.value("all_red", base.all_red);
    base.saturation_headway = doc.value("saturation_headway", base.saturation_headway);
    base.lane_capacity = doc.value("lane_capacity", base.lane_capacity);
    base.episode_length = doc.value("episode_length", base.episode_length);
    base.seed = doc.value("seed", base.seed);
    base.check();
    return base;
}

json sim_config_to_json(const SimConfig& c) {
    return {{"tick", c.tick},
            {"yellow", c.yellow},
            {"all_red", c.all_red},
            {"saturation_headway", c.saturation_headway},
            {"lane_capacity", c.lane_capacity},
            {"episode_length", c.episode_length},
            {"seed", c.seed}};
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

void write_json_file(const std::filesystem::path& path, const json& doc) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

RoadNetwork load_network(const std::filesystem::path& path) { return network_from_json(read_json_file(path)); }

void save_network(const std::filesystem::path& path, const RoadNetwork& net) {
    write_json_file(path, network_to_json(net));
}

std::vector<FlowSpec> load_flows(const std::filesystem::path& path, const RoadNetwork& net) {
    return flows_from_json(net, read_json_file(path));
}

void save_flows(const std::filesystem::path& path, const RoadNetwork& net, const std::vector<FlowSpec>& flows) {
    write_json_file(path, flows_to_json(net, flows));
}

}  // namespace epsim
