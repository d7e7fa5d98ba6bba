#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "epsim/controller.hpp"
#include "epsim/network.hpp"

namespace epsim {

struct FlowSpec {
    std::vector<RoadId> route;
    double start_s = 0.0;
    double end_s = 0.0;
    double headway_s = 1.0;
};

struct SimConfig {
    double tick = 1.0;
    double yellow = 3.0;
    double all_red = 2.0;
    double saturation_headway = 2.0;  // seconds per discharged vehicle per lane
    int lane_capacity = 0;            // 0: floor(road length / 7.5 m) per lane
    double episode_length = 3600.0;
    std::uint64_t seed = 0;

    void check() const;
};

inline constexpr double kJamSpacing = 7.5;

struct InTransit {
    RoadId road;
    LaneId target;   // lane the vehicle will queue on
    double arrival;  // time it reaches the queue (or the sink)
};
struct Queued {
    LaneId lane;
};
struct Finished {};

using Location = std::variant<InTransit, Queued, Finished>;

struct Vehicle {
    std::int64_t id = 0;
    int route = 0;      // flow index; the road list lives in the compiled route
    int route_pos = 0;  // index of the current road
    double entry_time = 0.0;
    std::optional<double> exit_time;
    Location location = Finished{};
};

struct Transition {
    enum class Stage : std::uint8_t { Yellow, AllRed };
    Stage stage = Stage::Yellow;
    double remaining = 0.0;
    int next_phase = 0;
};

struct SignalState {
    int active_phase = 0;
    double phase_elapsed = 0.0;
    std::optional<Transition> transition;

    bool in_transition() const { return transition.has_value(); }
};

struct SimCounters {
    std::int64_t demanded = 0;  // spawn attempts = spawned + blocked
    std::int64_t spawned = 0;
    std::int64_t blocked = 0;
    std::int64_t finished = 0;
    std::int64_t decisions = 0;
    std::int64_t max_total_queue = 0;
};

struct SimState {
    double clock = 0.0;
    std::vector<Vehicle> vehicles;                    // indexed by vehicle id
    std::vector<std::deque<std::int64_t>> lane_queues;  // x(l) = lane_queues[l].size()
    std::vector<std::vector<std::int64_t>> in_transit;  // per road, arrival order
    std::vector<int> lane_inbound;                    // in-transit vehicles targeting each lane
    std::vector<double> service_credit;               // per lane
    std::vector<SignalState> signals;                 // per intersection
    std::uint64_t rng_seed = 0;
    SimCounters counters;

    int queue(LaneId l) const { return static_cast<int>(lane_queues[l.index()].size()); }
    /// Queued plus in-transit vehicles assigned to the lane.
    int vehicles_on(LaneId l) const { return queue(l) + lane_inbound[l.index()]; }
    std::int64_t total_queue() const;
    std::int64_t total_in_transit() const;

    /// Empty state sized for `net`: every signal on phase 0.
    static SimState empty(const RoadNetwork& net);
};

/// A flow route resolved against the network.
struct CompiledRoute {
    std::vector<RoadId> roads;
    std::vector<Turn> turns;  // turns[k]: turn taken at the end of roads[k]
};

/// Checks a flow against the network and resolves its turns. Throws ConfigError.
CompiledRoute compile_route(const RoadNetwork& net, const FlowSpec& flow, std::size_t flow_index = 0);

/// Point-queue network simulation. Vehicles traverse a road in free-flow time,
/// then wait in a FIFO queue on the lane designated for their next turn.
class Simulation {
public:
    Simulation(std::shared_ptr<const RoadNetwork> net, std::vector<FlowSpec> flows, SimConfig config);

    const RoadNetwork& network() const { return *net_; }
    std::shared_ptr<const RoadNetwork> network_ptr() const { return net_; }
    const SimConfig& config() const { return config_; }
    const std::vector<FlowSpec>& flows() const { return flows_; }
    const std::vector<CompiledRoute>& routes() const { return routes_; }
    const SimState& state() const { return state_; }
    SimState& mutable_state() { return state_; }

    void reset();

    /// Creates the vehicles scheduled in [now, now + tick).
    void spawn(double now);
    /// Moves arrived vehicles into their lane queues; finishes vehicles on sink roads.
    void advance_transit();
    /// Releases queued vehicles on green movements.
    void discharge();
    /// Requests a phase. Returns false when ignored because a transition is active.
    bool set_phase(IntersectionId intersection, int phase);
    /// Advances the clock by one tick and moves transitions forward.
    void advance_clock();

    /// One tick: spawn, advance_transit, poll due controllers, discharge, advance_clock.
    void step(Controller* controller);
    /// Steps until the clock reaches the episode length.
    void run(Controller* controller);
    bool done() const;

    int lane_capacity(LaneId l) const { return capacity_[l.index()]; }
    Turn next_turn(const Vehicle& v) const;
    /// Lane a vehicle at route position `pos` joins on that road.
    LaneId choose_lane(int route, int pos) const;

    /// Broken invariants at the current instant (conservation, FIFO bookkeeping,
    /// designation routing, vehicle record consistency).
    std::vector<std::string> check_invariants() const;
    /// FNV-1a digest over the full state.
    std::uint64_t digest() const;

private:
    bool has_room(LaneId l) const;
    void settle(SignalState& signal) const;

    std::shared_ptr<const RoadNetwork> net_;
    std::vector<FlowSpec> flows_;
    SimConfig config_;
    std::vector<CompiledRoute> routes_;
    std::vector<int> capacity_;
    // Per entering lane: movement index (at the lane's intersection) for each turn, or -1.
    std::vector<std::array<int, 3>> lane_turn_movement_;
    SimState state_;
};

}  // namespace epsim
