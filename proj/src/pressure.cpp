#include "epsim/pressure.hpp"

#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

namespace epsim {

std::string_view to_string(StateKind k) {
    switch (k) {
        case StateKind::NV: return "nv";
        case StateKind::PressureNV: return "pressure-nv";
        case StateKind::PressureQueue: return "pressure-queue";
        case StateKind::EfficientPressure: return "ep";
    }
    return "?";
}

std::string_view to_string(RewardKind k) {
    return k == RewardKind::NegIntersectionPressure ? "pressure" : "queue";
}

StateKind state_kind_from_string(std::string_view s) {
    for (StateKind k : {StateKind::NV, StateKind::PressureNV, StateKind::PressureQueue, StateKind::EfficientPressure})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown state kind '" + std::string(s) + "' (expected nv|pressure-nv|pressure-queue|ep)");
}

RewardKind reward_kind_from_string(std::string_view s) {
    if (s == "pressure") return RewardKind::NegIntersectionPressure;
    if (s == "queue") return RewardKind::NegQueueLength;
    throw ConfigError("unknown reward kind '" + std::string(s) + "' (expected pressure|queue)");
}

LaneStats lane_stats(const SimState& state, LaneId lane) {
    return {lane, state.queue(lane), state.vehicles_on(lane)};
}

int movement_pressure(int x_l, int x_m) { return x_l - x_m; }

int phase_pressure(int p1, int p2) { return p1 + p2; }

double efficient_pressure(std::span<const int> entering, std::span<const int> exiting) {
    if (entering.empty() || exiting.empty())
        throw ContractViolation("efficient pressure needs at least one entering and one exiting lane");
    const double in = std::accumulate(entering.begin(), entering.end(), 0.0) / static_cast<double>(entering.size());
    const double out = std::accumulate(exiting.begin(), exiting.end(), 0.0) / static_cast<double>(exiting.size());
    return in - out;
}

int downstream_queue(const SimState& state, const RoadNetwork& net, LaneId exiting) {
    const auto receiving = net.receiving_lane(exiting);
    return receiving ? state.queue(*receiving) : 0;
}

int downstream_vehicles(const SimState& state, const RoadNetwork& net, LaneId exiting) {
    const auto receiving = net.receiving_lane(exiting);
    return receiving ? state.vehicles_on(*receiving) : 0;
}

namespace {

const Intersection& checked(const RoadNetwork& net, IntersectionId i) {
    if (!i.valid() || i.index() >= net.intersections.size())
        throw ConfigError("unknown intersection id " + std::to_string(i.value));
    return net.intersections[i.index()];
}

}  // namespace

int intersection_pressure(const SimState& state, const RoadNetwork& net, IntersectionId i) {
    const auto& node = checked(net, i);
    int total = 0;
    for (LaneId l : node.entering_lanes) total += state.queue(l);
    for (LaneId m : node.exiting_lanes) total -= downstream_queue(state, net, m);
    return total;
}

double movement_efficient_pressure(const SimState& state, const RoadNetwork& net, const TrafficMovement& m) {
    std::vector<int> in;
    std::vector<int> out;
    in.reserve(m.entering.size());
    out.reserve(m.exiting.size());
    for (LaneId l : m.entering) in.push_back(state.queue(l));
    for (LaneId l : m.exiting) out.push_back(downstream_queue(state, net, l));
    return efficient_pressure(in, out);
}

double phase_efficient_pressure(const SimState& state, const RoadNetwork& net, IntersectionId i, int phase) {
    const auto& node = checked(net, i);
    const auto& p = node.phases.at(static_cast<std::size_t>(phase));
    return movement_efficient_pressure(state, net, node.movements[static_cast<std::size_t>(p.movements[0])]) +
           movement_efficient_pressure(state, net, node.movements[static_cast<std::size_t>(p.movements[1])]);
}

PressureReport pressure_report(const SimState& state, const RoadNetwork& net, IntersectionId i) {
    const auto& node = checked(net, i);
    PressureReport r;
    r.intersection = i;
    for (const auto& m : node.movements) {
        r.movement_pressure.push_back(
            movement_pressure(state.queue(m.tm_entering), downstream_queue(state, net, m.tm_exiting)));
        r.movement_ep.push_back(movement_efficient_pressure(state, net, m));
    }
    for (const auto& p : node.phases) {
        const auto a = static_cast<std::size_t>(p.movements[0]);
        const auto b = static_cast<std::size_t>(p.movements[1]);
        r.phase_pressure.push_back(phase_pressure(r.movement_pressure[a], r.movement_pressure[b]));
        r.phase_ep.push_back(r.movement_ep[a] + r.movement_ep[b]);
    }
    r.intersection_pressure = intersection_pressure(state, net, i);
    return r;
}

void write_pressure_csv_header(std::ostream& os) { os << "tick,intersection,phase,p_s,ep_s,P_i\n"; }

void write_pressure_csv_rows(std::ostream& os, std::int64_t tick, const RoadNetwork& net,
                             const PressureReport& report) {
    const auto& node = net.intersection(report.intersection);
    for (std::size_t p = 0; p < report.phase_pressure.size(); ++p) {
        os << tick << ',' << node.name << ',' << node.phases[p].label << ',' << report.phase_pressure[p] << ','
           << report.phase_ep[p] << ',' << report.intersection_pressure << '\n';
    }
}

std::vector<double> StateVector::flatten() const {
    std::vector<double> out = features;
    out.insert(out.end(), current_phase.begin(), current_phase.end());
    return out;
}

StateVector extract_state(const SimState& state, const RoadNetwork& net, IntersectionId i, StateKind kind) {
    const auto& node = checked(net, i);
    StateVector sv;
    sv.intersection = i;
    sv.kind = kind;
    sv.current_phase.assign(node.phases.size(), 0.0);
    const auto& signal = state.signals.at(i.index());
    if (!node.phases.empty()) sv.current_phase[static_cast<std::size_t>(signal.active_phase)] = 1.0;

    for (const auto& m : node.movements) {
        if (!m.signalized()) continue;
        double value = 0.0;
        switch (kind) {
            case StateKind::NV:
                for (LaneId l : m.entering) value += state.vehicles_on(l);
                break;
            case StateKind::PressureNV:
                value = movement_pressure(state.vehicles_on(m.tm_entering), downstream_vehicles(state, net, m.tm_exiting));
                break;
            case StateKind::PressureQueue:
                value = movement_pressure(state.queue(m.tm_entering), downstream_queue(state, net, m.tm_exiting));
                break;
            case StateKind::EfficientPressure:
                value = movement_efficient_pressure(state, net, m);
                break;
            default:
                throw ConfigError("unknown state kind");
        }
        sv.features.push_back(value);
    }
    return sv;
}

double reward(const SimState& state, const RoadNetwork& net, IntersectionId i, RewardKind kind) {
    switch (kind) {
        case RewardKind::NegIntersectionPressure:
            return -std::abs(static_cast<double>(intersection_pressure(state, net, i)));
        case RewardKind::NegQueueLength: {
            int total = 0;
            for (LaneId l : checked(net, i).entering_lanes) total += state.queue(l);
            return -static_cast<double>(total);
        }
    }
    throw ConfigError("unknown reward kind");
}

}  // namespace epsim
