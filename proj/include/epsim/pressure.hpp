#pragma once

#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "epsim/network.hpp"
#include "epsim/sim.hpp"

namespace epsim {

/// Traffic-state representations, in ablation order.
enum class StateKind : std::uint8_t {
    NV,                 // vehicles on each signalized movement's entering lanes
    PressureNV,         // lane-to-lane pressure from vehicle counts
    PressureQueue,      // lane-to-lane pressure from queue lengths
    EfficientPressure,  // lanes-to-lanes pressure from average queue lengths
};

enum class RewardKind : std::uint8_t { NegIntersectionPressure, NegQueueLength };

std::string_view to_string(StateKind k);
std::string_view to_string(RewardKind k);
StateKind state_kind_from_string(std::string_view s);
RewardKind reward_kind_from_string(std::string_view s);

struct LaneStats {
    LaneId lane;
    int queue = 0;     // x(l)
    int vehicles = 0;  // queued + in transit towards this lane
};

LaneStats lane_stats(const SimState& state, LaneId lane);

/// x(l) - x(m). May be negative.
int movement_pressure(int x_l, int x_m);

/// Sum of the pressures of a phase's two movements.
int phase_pressure(int p1, int p2);

/// Mean queue over the entering lanes minus mean queue over the exiting lanes.
/// Both spans must be non-empty.
double efficient_pressure(std::span<const int> entering, std::span<const int> exiting);

/// Queue on the lane that receives an exiting lane's traffic; 0 at boundary sinks.
int downstream_queue(const SimState& state, const RoadNetwork& net, LaneId exiting);
int downstream_vehicles(const SimState& state, const RoadNetwork& net, LaneId exiting);

/// Sum of entering-lane queues minus sum of downstream queues of the exiting lanes.
int intersection_pressure(const SimState& state, const RoadNetwork& net, IntersectionId i);

/// Efficient pressure of one movement, with the whole receiving road as its exiting set.
double movement_efficient_pressure(const SimState& state, const RoadNetwork& net, const TrafficMovement& m);

double phase_efficient_pressure(const SimState& state, const RoadNetwork& net, IntersectionId i, int phase);

struct PressureReport {
    IntersectionId intersection;
    std::vector<int> movement_pressure;     // per movement, lane-to-lane with queues
    std::vector<double> movement_ep;        // per movement
    std::vector<int> phase_pressure;        // per phase
    std::vector<double> phase_ep;           // per phase
    int intersection_pressure = 0;
};

PressureReport pressure_report(const SimState& state, const RoadNetwork& net, IntersectionId i);

void write_pressure_csv_header(std::ostream& os);
/// One row per phase: tick, intersection, phase, p_s, ep_s, P_i.
void write_pressure_csv_rows(std::ostream& os, std::int64_t tick, const RoadNetwork& net,
                             const PressureReport& report);

struct StateVector {
    IntersectionId intersection;
    StateKind kind = StateKind::EfficientPressure;
    std::vector<double> current_phase;  // one-hot over phases
    std::vector<double> features;       // one entry per signalized movement

    /// features followed by the phase one-hot.
    std::vector<double> flatten() const;
};

StateVector extract_state(const SimState& state, const RoadNetwork& net, IntersectionId i, StateKind kind);

double reward(const SimState& state, const RoadNetwork& net, IntersectionId i, RewardKind kind);

}  // namespace epsim
