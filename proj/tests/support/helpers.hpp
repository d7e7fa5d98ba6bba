#pragma once

#include <stdexcept>
#include <string>

#include "epsim/network.hpp"
#include "epsim/sim.hpp"

namespace epsim::testing {

inline RoadId road_named(const RoadNetwork& net, const std::string& name) {
    const auto r = net.find_road(name);
    if (!r) throw std::out_of_range("no road " + name);
    return *r;
}

/// First lane of the road whose designation carries `turn`.
inline LaneId lane_for(const RoadNetwork& net, const std::string& road, Turn turn) {
    for (LaneId l : net.road(road_named(net, road)).lanes)
        if (net.lane(l).designation.contains(turn)) return l;
    throw std::out_of_range("no lane for turn on " + road);
}

inline void set_queue(SimState& state, LaneId lane, int n) {
    state.lane_queues[lane.index()].assign(static_cast<std::size_t>(n), 0);
}

inline FlowSpec flow(const RoadNetwork& net, std::initializer_list<const char*> roads, double start, double end,
                     double headway) {
    FlowSpec f;
    for (const char* r : roads) f.route.push_back(road_named(net, r));
    f.start_s = start;
    f.end_s = end;
    f.headway_s = headway;
    return f;
}

}  // namespace epsim::testing
