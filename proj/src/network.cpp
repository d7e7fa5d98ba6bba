#include "epsim/network.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace epsim {

namespace {

constexpr int side(Compass c) { return static_cast<int>(c); }
constexpr Compass opposite(Compass c) { return static_cast<Compass>((side(c) + 2) % 4); }

std::string name_of(const RoadNetwork& net, IntersectionId id) {
    if (id.valid() && id.index() < net.intersections.size()) return net.intersections[id.index()].name;
    return "#" + std::to_string(id.value);
}

std::string movement_label(Compass approach, Turn turn) {
    return std::string(to_string(approach)) + "-" + std::string(to_string(turn));
}

}  // namespace

std::string_view to_string(Compass c) {
    switch (c) {
        case Compass::North: return "N";
        case Compass::East: return "E";
        case Compass::South: return "S";
        case Compass::West: return "W";
    }
    return "?";
}

std::string_view to_string(Turn t) {
    switch (t) {
        case Turn::Left: return "L";
        case Turn::Through: return "T";
        case Turn::Right: return "R";
    }
    return "?";
}

std::string_view to_string(PhaseScheme s) { return s == PhaseScheme::FourPhase ? "4" : "8"; }

std::string_view to_string(LaneLayout l) { return l == LaneLayout::Exclusive ? "exclusive" : "shared"; }

Compass compass_from_string(std::string_view s) {
    for (Compass c : kCompassOrder)
        if (to_string(c) == s) return c;
    throw ConfigError("unknown compass direction '" + std::string(s) + "'");
}

Turn turn_from_string(std::string_view s) {
    for (Turn t : kTurnOrder)
        if (to_string(t) == s) return t;
    throw ConfigError("unknown turn '" + std::string(s) + "'");
}

PhaseScheme phase_scheme_from_string(std::string_view s) {
    if (s == "4" || s == "four" || s == "FourPhase") return PhaseScheme::FourPhase;
    if (s == "8" || s == "eight" || s == "EightPhase") return PhaseScheme::EightPhase;
    throw ConfigError("unknown phase scheme '" + std::string(s) + "'");
}

Compass exit_side(Compass approach, Turn turn) {
    const int heading = (side(approach) + 2) % 4;
    switch (turn) {
        case Turn::Through: return static_cast<Compass>(heading);
        case Turn::Right: return static_cast<Compass>((heading + 1) % 4);
        case Turn::Left: return static_cast<Compass>((heading + 3) % 4);
    }
    return approach;
}

std::optional<Turn> turn_between(Compass approach, Compass exit) {
    for (Turn t : kTurnOrder)
        if (exit_side(approach, t) == exit) return t;
    return std::nullopt;
}

int Intersection::movement_index(Compass approach, Turn turn) const {
    for (const auto& m : movements)
        if (m.approach == approach && m.turn == turn) return m.id;
    return -1;
}

std::vector<int> Intersection::signalized_movements() const {
    std::vector<int> out;
    for (const auto& m : movements)
        if (m.signalized()) out.push_back(m.id);
    return out;
}

std::optional<RoadId> RoadNetwork::find_road(std::string_view name) const {
    for (const auto& r : roads)
        if (r.name == name) return r.id;
    return std::nullopt;
}

std::optional<IntersectionId> RoadNetwork::find_intersection(std::string_view name) const {
    for (const auto& i : intersections)
        if (i.name == name) return i.id;
    return std::nullopt;
}

std::optional<LaneId> RoadNetwork::receiving_lane(LaneId exiting) const {
    if (road_of(exiting).to.has_value()) return exiting;
    return std::nullopt;
}

bool movements_conflict(Compass a_approach, Turn a_turn, Compass b_approach, Turn b_turn) {
    if (a_turn == Turn::Right || b_turn == Turn::Right) return false;
    if (a_approach == b_approach) return a_turn == b_turn;
    if (opposite(a_approach) == b_approach) return a_turn != b_turn;
    return true;
}

std::vector<std::array<std::pair<Compass, Turn>, 2>> canonical_phase_table(PhaseScheme scheme) {
    using C = Compass;
    using T = Turn;
    std::vector<std::array<std::pair<Compass, Turn>, 2>> table = {
        {{{C::North, T::Through}, {C::South, T::Through}}},
        {{{C::East, T::Through}, {C::West, T::Through}}},
        {{{C::North, T::Left}, {C::South, T::Left}}},
        {{{C::East, T::Left}, {C::West, T::Left}}},
    };
    if (scheme == PhaseScheme::EightPhase) {
        for (C c : kCompassOrder) table.push_back({{{c, T::Through}, {c, T::Left}}});
    }
    return table;
}

namespace {

void build_phases(Intersection& node, PhaseScheme scheme) {
    node.phases.clear();
    for (const auto& pair : canonical_phase_table(scheme)) {
        const int a = node.movement_index(pair[0].first, pair[0].second);
        const int b = node.movement_index(pair[1].first, pair[1].second);
        if (a < 0 || b < 0) continue;
        Phase p;
        p.id = static_cast<int>(node.phases.size());
        p.label = std::string(1, static_cast<char>('A' + p.id));
        p.movements = {a, b};
        node.phases.push_back(std::move(p));
    }
}

}  // namespace

void finalize_network(RoadNetwork& net) {
    net.downstream.clear();
    for (auto& node : net.intersections) {
        node.entering_lanes.clear();
        node.exiting_lanes.clear();
        node.movements.clear();
        for (Compass c : kCompassOrder) {
            if (const auto& r = node.approach_roads[side(c)])
                for (LaneId l : net.road(*r).lanes) node.entering_lanes.push_back(l);
            if (const auto& r = node.exit_roads[side(c)])
                for (LaneId l : net.road(*r).lanes) node.exiting_lanes.push_back(l);
        }
        for (Compass approach : kCompassOrder) {
            const auto& in = node.approach_roads[side(approach)];
            if (!in) continue;
            for (Turn turn : kTurnOrder) {
                const auto& out = node.exit_roads[side(exit_side(approach, turn))];
                if (!out) continue;
                TrafficMovement m;
                m.approach = approach;
                m.turn = turn;
                m.in_road = *in;
                m.out_road = *out;
                for (LaneId l : net.road(*in).lanes)
                    if (net.lane(l).designation.contains(turn)) m.entering.push_back(l);
                if (m.entering.empty()) continue;
                m.exiting = net.road(*out).lanes;
                m.tm_entering = m.entering.front();
                const auto& out_lanes = net.road(*out).lanes;
                const auto same_index =
                    std::min<std::size_t>(static_cast<std::size_t>(net.lane(m.tm_entering).index), out_lanes.size() - 1);
                m.tm_exiting = out_lanes[same_index];
                m.id = static_cast<int>(node.movements.size());
                node.movements.push_back(std::move(m));
            }
        }
        build_phases(node, net.phase_scheme);
        for (LaneId l : node.exiting_lanes) net.downstream.push_back({l, net.receiving_lane(l)});
    }
    std::sort(net.downstream.begin(), net.downstream.end(),
              [](const DownstreamLink& a, const DownstreamLink& b) { return a.exiting < b.exiting; });
}

RoadNetwork with_phase_scheme(const RoadNetwork& net, PhaseScheme scheme) {
    RoadNetwork out = net;
    out.phase_scheme = scheme;
    for (auto& node : out.intersections) build_phases(node, scheme);
    return out;
}

RoadNetwork build_grid(int rows, int cols, double ew_length_m, double sn_length_m, PhaseScheme scheme,
                       const GridOptions& options) {
    if (rows < 1 || cols < 1) throw ConfigError("grid dimensions must be at least 1x1");
    if (!(ew_length_m > 0.0) || !(sn_length_m > 0.0)) throw ConfigError("road lengths must be positive");
    if (!(options.speed_mps > 0.0)) throw ConfigError("free-flow speed must be positive");

    RoadNetwork net;
    net.phase_scheme = scheme;
    auto at = [cols](int r, int c) { return IntersectionId(static_cast<std::int32_t>(r * cols + c)); };
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Intersection node;
            node.id = at(r, c);
            node.name = "I_" + std::to_string(r) + "_" + std::to_string(c);
            net.intersections.push_back(std::move(node));
        }
    }

    auto neighbour = [&](int r, int c, Compass s) -> std::optional<IntersectionId> {
        switch (s) {
            case Compass::North: r -= 1; break;
            case Compass::South: r += 1; break;
            case Compass::East: c += 1; break;
            case Compass::West: c -= 1; break;
        }
        if (r < 0 || r >= rows || c < 0 || c >= cols) return std::nullopt;
        return at(r, c);
    };

    auto add_road = [&](std::string name, std::optional<IntersectionId> from, std::optional<IntersectionId> to,
                        Compass s) {
        Road road;
        road.id = RoadId(net.roads.size());
        road.name = std::move(name);
        road.from = from;
        road.to = to;
        road.length_m = (s == Compass::East || s == Compass::West) ? ew_length_m : sn_length_m;
        road.speed_mps = options.speed_mps;
        const int lane_count = options.layout == LaneLayout::Exclusive ? 3 : 1;
        for (int k = 0; k < lane_count; ++k) {
            Lane lane;
            lane.id = LaneId(net.lanes.size());
            lane.road = road.id;
            lane.index = k;
            lane.designation = options.layout == LaneLayout::Exclusive ? TurnSet{kTurnOrder[static_cast<std::size_t>(k)]}
                                                                       : TurnSet{Turn::Left, Turn::Through, Turn::Right};
            road.lanes.push_back(lane.id);
            net.lanes.push_back(lane);
        }
        net.roads.push_back(std::move(road));
        return net.roads.back().id;
    };

    // Every directed edge is the incoming road of exactly one intersection.
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            auto& node = net.intersections[at(r, c).index()];
            for (Compass s : kCompassOrder) {
                const auto from = neighbour(r, c, s);
                const std::string from_name = from ? net.intersections[from->index()].name : "boundary";
                const std::string name = from ? from_name + "->" + node.name
                                              : "in:" + node.name + ":" + std::string(to_string(s));
                node.approach_roads[side(s)] = add_road(name, from, node.id, s);
            }
        }
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            auto& node = net.intersections[at(r, c).index()];
            for (Compass s : kCompassOrder) {
                if (const auto to = neighbour(r, c, s)) {
                    node.exit_roads[side(s)] = net.intersections[to->index()].approach_roads[side(opposite(s))];
                } else {
                    node.exit_roads[side(s)] =
                        add_road("out:" + node.name + ":" + std::string(to_string(s)), node.id, std::nullopt, s);
                }
            }
        }
    }
    finalize_network(net);
    return net;
}

std::vector<Violation> validate(const RoadNetwork& net) {
    std::vector<Violation> out;
    auto report = [&out](std::string entity, std::string message) {
        out.push_back({std::move(entity), std::move(message)});
    };
    auto lane_ok = [&net](LaneId l) { return l.valid() && l.index() < net.lanes.size(); };

    for (std::size_t k = 0; k < net.lanes.size(); ++k) {
        const Lane& lane = net.lanes[k];
        const std::string entity = "lane " + std::to_string(k);
        if (lane.id.index() != k) report(entity, "lane id does not match its position");
        if (lane.designation.empty()) report(entity, "designation is empty");
        if (!lane.road.valid() || lane.road.index() >= net.roads.size()) {
            report(entity, "parent road does not exist");
            continue;
        }
        const Road& road = net.roads[lane.road.index()];
        if (lane.index < 0 || static_cast<std::size_t>(lane.index) >= road.lanes.size())
            report(entity, "index exceeds the parent road's lane count");
    }

    for (std::size_t k = 0; k < net.roads.size(); ++k) {
        const Road& road = net.roads[k];
        const std::string entity = "road " + road.name;
        if (road.id.index() != k) report(entity, "road id does not match its position");
        if (road.lanes.empty()) report(entity, "road has no lanes");
        if (!(road.length_m > 0.0)) report(entity, "length must be positive");
        if (!(road.speed_mps > 0.0)) report(entity, "free-flow speed must be positive");
        if (!road.from && !road.to) report(entity, "both endpoints are boundaries");
        for (const auto& end : {road.from, road.to})
            if (end && (!end->valid() || end->index() >= net.intersections.size()))
                report(entity, "endpoint names a missing intersection " + name_of(net, *end));
        for (std::size_t idx = 0; idx < road.lanes.size(); ++idx) {
            const LaneId l = road.lanes[idx];
            if (!lane_ok(l) || net.lanes[l.index()].road != road.id ||
                net.lanes[l.index()].index != static_cast<int>(idx))
                report(entity, "lane list is inconsistent with the lane table");
        }
    }

    for (const auto& node : net.intersections) {
        const std::string entity = "intersection " + node.name;
        std::set<LaneId> entering(node.entering_lanes.begin(), node.entering_lanes.end());
        std::set<LaneId> exiting(node.exiting_lanes.begin(), node.exiting_lanes.end());
        for (LaneId l : entering)
            if (exiting.contains(l)) report(entity, "lane " + std::to_string(l.value) + " is both entering and exiting");

        for (const auto& m : node.movements) {
            const std::string mv = entity + " movement " + movement_label(m.approach, m.turn);
            if (m.entering.empty() || m.exiting.empty()) report(mv, "entering and exiting lane sets must be non-empty");
            for (LaneId l : m.entering) {
                if (!entering.contains(l)) report(mv, "source lane is not an entering lane of the intersection");
                if (std::find(m.exiting.begin(), m.exiting.end(), l) != m.exiting.end())
                    report(mv, "lane is both source and target");
                if (lane_ok(l) && !net.lanes[l.index()].designation.contains(m.turn))
                    report(mv, "source lane designation lacks the movement's turn");
            }
            for (LaneId l : m.exiting)
                if (!exiting.contains(l)) report(mv, "target lane is not an exiting lane of the intersection");
        }

        std::vector<int> phase_count(node.movements.size(), 0);
        for (const auto& p : node.phases) {
            const std::string ph = entity + " phase " + p.label;
            const int a = p.movements[0];
            const int b = p.movements[1];
            const auto n = static_cast<int>(node.movements.size());
            if (a < 0 || a >= n || b < 0 || b >= n) {
                report(ph, "phase references a missing movement");
                continue;
            }
            if (a == b) {
                report(ph, "phase must pair two distinct movements");
                continue;
            }
            const auto& ma = node.movements[static_cast<std::size_t>(a)];
            const auto& mb = node.movements[static_cast<std::size_t>(b)];
            if (movements_conflict(ma.approach, ma.turn, mb.approach, mb.turn))
                report(ph, "conflicting movements " + movement_label(ma.approach, ma.turn) + " and " +
                               movement_label(mb.approach, mb.turn));
            ++phase_count[static_cast<std::size_t>(a)];
            ++phase_count[static_cast<std::size_t>(b)];
        }
        for (const auto& m : node.movements) {
            const int count = phase_count[static_cast<std::size_t>(m.id)];
            if (m.signalized() && count == 0)
                report(entity + " movement " + movement_label(m.approach, m.turn), "signalized movement is in no phase");
            if (!m.signalized() && count > 0)
                report(entity + " movement " + movement_label(m.approach, m.turn), "right turn appears in a phase");
        }
    }

    std::map<LaneId, std::vector<std::optional<LaneId>>> links;
    for (const auto& link : net.downstream) links[link.exiting].push_back(link.receiving);
    for (const auto& node : net.intersections) {
        for (LaneId l : node.exiting_lanes) {
            if (!lane_ok(l)) continue;
            const std::string entity = "exiting lane " + std::to_string(l.value);
            const auto it = links.find(l);
            const std::size_t count = it == links.end() ? 0 : it->second.size();
            const bool interior = net.roads[net.lanes[l.index()].road.index()].to.has_value();
            if (count != 1) {
                report(entity, "maps to " + std::to_string(count) + " downstream lanes, expected exactly one");
                continue;
            }
            if (interior && it->second.front() != net.receiving_lane(l))
                report(entity, "downstream lane does not match road topology");
        }
    }
    return out;
}

}  // namespace epsim
