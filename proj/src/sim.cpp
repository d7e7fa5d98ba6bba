#include "epsim/sim.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

namespace epsim {

namespace {

constexpr double kEps = 1e-9;

class Fnv1a {
public:
    void add(std::uint64_t v) {
        for (int k = 0; k < 8; ++k) {
            hash_ ^= (v >> (8 * k)) & 0xffu;
            hash_ *= 0x100000001b3ull;
        }
    }
    void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
    void add(std::int64_t v) { add(static_cast<std::uint64_t>(v)); }
    void add(int v) { add(static_cast<std::uint64_t>(static_cast<std::int64_t>(v))); }
    std::uint64_t value() const { return hash_; }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

int side_of(const std::array<std::optional<RoadId>, 4>& roads, RoadId r) {
    for (int s = 0; s < 4; ++s)
        if (roads[static_cast<std::size_t>(s)] == r) return s;
    return -1;
}

}  // namespace

void SimConfig::check() const {
    if (!(tick > 0.0)) throw ConfigError("tick must be positive");
    if (yellow < 0.0 || all_red < 0.0) throw ConfigError("yellow and all-red must be non-negative");
    if (!(saturation_headway > 0.0)) throw ConfigError("saturation headway must be positive");
    if (!(episode_length > 0.0)) throw ConfigError("episode length must be positive");
    if (lane_capacity < 0) throw ConfigError("lane capacity must be non-negative");
}

std::int64_t SimState::total_queue() const {
    std::int64_t total = 0;
    for (const auto& q : lane_queues) total += static_cast<std::int64_t>(q.size());
    return total;
}

std::int64_t SimState::total_in_transit() const {
    std::int64_t total = 0;
    for (const auto& t : in_transit) total += static_cast<std::int64_t>(t.size());
    return total;
}

SimState SimState::empty(const RoadNetwork& net) {
    SimState s;
    s.lane_queues.resize(net.lanes.size());
    s.in_transit.resize(net.roads.size());
    s.lane_inbound.assign(net.lanes.size(), 0);
    s.service_credit.assign(net.lanes.size(), 0.0);
    s.signals.resize(net.intersections.size());
    return s;
}

CompiledRoute compile_route(const RoadNetwork& net, const FlowSpec& flow, std::size_t flow_index) {
    const std::string where = "flow " + std::to_string(flow_index) + ": ";
    if (!(flow.headway_s > 0.0)) throw ConfigError(where + "headway must be positive");
    if (flow.start_s > flow.end_s) throw ConfigError(where + "start is after end");
    if (flow.route.empty()) throw ConfigError(where + "route is empty");
    for (RoadId r : flow.route)
        if (!r.valid() || r.index() >= net.roads.size()) throw ConfigError(where + "route names a missing road");
    if (!net.road(flow.route.front()).is_source()) throw ConfigError(where + "route must begin at a boundary road");
    if (!net.road(flow.route.back()).is_sink()) throw ConfigError(where + "route must end at a boundary road");

    CompiledRoute out;
    out.roads = flow.route;
    for (std::size_t k = 0; k + 1 < flow.route.size(); ++k) {
        const Road& in = net.road(flow.route[k]);
        const Road& next = net.road(flow.route[k + 1]);
        if (!in.to || in.to != next.from)
            throw ConfigError(where + "roads " + in.name + " and " + next.name + " are not connected");
        const Intersection& node = net.intersection(*in.to);
        const int a = side_of(node.approach_roads, in.id);
        const int e = side_of(node.exit_roads, next.id);
        if (a < 0 || e < 0) throw ConfigError(where + "road not attached to intersection " + node.name);
        const auto turn = turn_between(static_cast<Compass>(a), static_cast<Compass>(e));
        if (!turn || node.movement_index(static_cast<Compass>(a), *turn) < 0)
            throw ConfigError(where + "no movement from " + in.name + " to " + next.name);
        out.turns.push_back(*turn);
    }
    return out;
}

Simulation::Simulation(std::shared_ptr<const RoadNetwork> net, std::vector<FlowSpec> flows, SimConfig config)
    : net_(std::move(net)), flows_(std::move(flows)), config_(config) {
    if (!net_) throw ContractViolation("simulation needs a network");
    config_.check();
    for (std::size_t i = 0; i < flows_.size(); ++i) routes_.push_back(compile_route(*net_, flows_[i], i));

    capacity_.resize(net_->lanes.size());
    for (const Lane& lane : net_->lanes) {
        const Road& road = net_->road(lane.road);
        capacity_[lane.id.index()] = config_.lane_capacity > 0
                                         ? config_.lane_capacity
                                         : std::max(1, static_cast<int>(std::floor(road.length_m / kJamSpacing)));
    }
    lane_turn_movement_.assign(net_->lanes.size(), {-1, -1, -1});
    for (const auto& node : net_->intersections)
        for (const auto& m : node.movements)
            for (LaneId l : m.entering) lane_turn_movement_[l.index()][static_cast<std::size_t>(m.turn)] = m.id;
    reset();
}

void Simulation::reset() {
    state_ = SimState::empty(*net_);
    state_.rng_seed = config_.seed;
}

bool Simulation::done() const { return state_.clock >= config_.episode_length - kEps; }

Turn Simulation::next_turn(const Vehicle& v) const {
    return routes_[static_cast<std::size_t>(v.route)].turns.at(static_cast<std::size_t>(v.route_pos));
}

LaneId Simulation::choose_lane(int route, int pos) const {
    const auto& r = routes_[static_cast<std::size_t>(route)];
    const Road& road = net_->road(r.roads[static_cast<std::size_t>(pos)]);
    const bool terminal = static_cast<std::size_t>(pos) + 1 == r.roads.size();
    LaneId best;
    int best_load = std::numeric_limits<int>::max();
    for (LaneId l : road.lanes) {
        if (!terminal && !net_->lane(l).designation.contains(r.turns[static_cast<std::size_t>(pos)])) continue;
        const int load = state_.vehicles_on(l);
        if (load < best_load) {
            best = l;
            best_load = load;
        }
    }
    return best;
}

bool Simulation::has_room(LaneId l) const {
    if (net_->road_of(l).is_sink()) return true;
    return state_.vehicles_on(l) < capacity_[l.index()];
}

void Simulation::spawn(double now) {
    const double window_end = now + config_.tick;
    for (std::size_t i = 0; i < flows_.size(); ++i) {
        const FlowSpec& f = flows_[i];
        if (f.end_s < now - kEps || f.start_s >= window_end - kEps) continue;
        const double first = std::max(0.0, std::ceil((now - f.start_s) / f.headway_s - kEps));
        for (double k = first;; k += 1.0) {
            const double t = f.start_s + k * f.headway_s;
            if (t >= window_end - kEps || t > f.end_s + kEps) break;
            ++state_.counters.demanded;
            const int route = static_cast<int>(i);
            const LaneId lane = choose_lane(route, 0);
            if (!has_room(lane)) {
                ++state_.counters.blocked;
                continue;
            }
            const RoadId road = routes_[i].roads.front();
            Vehicle v;
            v.id = static_cast<std::int64_t>(state_.vehicles.size());
            v.route = route;
            v.route_pos = 0;
            v.entry_time = t;
            v.location = InTransit{road, lane, t + net_->road(road).free_flow_time()};
            state_.in_transit[road.index()].push_back(v.id);
            ++state_.lane_inbound[lane.index()];
            state_.vehicles.push_back(std::move(v));
            ++state_.counters.spawned;
        }
    }
}

void Simulation::advance_transit() {
    const double now = state_.clock;
    for (std::size_t r = 0; r < state_.in_transit.size(); ++r) {
        auto& list = state_.in_transit[r];
        if (list.empty()) continue;
        const bool sink = net_->roads[r].is_sink();
        std::size_t keep = 0;
        for (std::size_t k = 0; k < list.size(); ++k) {
            Vehicle& v = state_.vehicles[static_cast<std::size_t>(list[k])];
            const auto& transit = std::get<InTransit>(v.location);
            bool moved = false;
            if (transit.arrival <= now + kEps) {
                const LaneId lane = transit.target;
                if (sink) {
                    --state_.lane_inbound[lane.index()];
                    v.exit_time = now;
                    v.location = Finished{};
                    ++state_.counters.finished;
                    moved = true;
                } else if (state_.queue(lane) < capacity_[lane.index()]) {
                    --state_.lane_inbound[lane.index()];
                    state_.lane_queues[lane.index()].push_back(v.id);
                    v.location = Queued{lane};
                    moved = true;
                }
            }
            if (!moved) list[keep++] = list[k];
        }
        list.resize(keep);
    }
}

void Simulation::discharge() {
    const double per_tick = config_.tick / config_.saturation_headway;
    const double credit_cap = std::max(1.0, per_tick);
    std::vector<char> green;
    for (const auto& node : net_->intersections) {
        const SignalState& signal = state_.signals[node.id.index()];
        green.assign(node.movements.size(), 0);
        for (const auto& m : node.movements)
            if (!m.signalized()) green[static_cast<std::size_t>(m.id)] = 1;
        if (!signal.in_transition() && !node.phases.empty()) {
            for (int m : node.phases[static_cast<std::size_t>(signal.active_phase)].movements)
                green[static_cast<std::size_t>(m)] = 1;
        }

        for (LaneId lane : node.entering_lanes) {
            const auto& turn_movement = lane_turn_movement_[lane.index()];
            bool served = false;
            for (int m : turn_movement)
                if (m >= 0 && green[static_cast<std::size_t>(m)]) served = true;
            double& credit = state_.service_credit[lane.index()];
            if (!served) {
                credit = 0.0;
                continue;
            }
            credit = std::min(credit + per_tick, credit_cap);
            auto& queue = state_.lane_queues[lane.index()];
            while (credit >= 1.0 - kEps && !queue.empty()) {
                Vehicle& v = state_.vehicles[static_cast<std::size_t>(queue.front())];
                const int m = turn_movement[static_cast<std::size_t>(next_turn(v))];
                if (m < 0 || !green[static_cast<std::size_t>(m)]) break;
                const auto& route = routes_[static_cast<std::size_t>(v.route)];
                const int next_pos = v.route_pos + 1;
                const RoadId next_road = route.roads[static_cast<std::size_t>(next_pos)];
                const LaneId target = choose_lane(v.route, next_pos);
                if (!has_room(target)) break;
                queue.pop_front();
                credit -= 1.0;
                v.route_pos = next_pos;
                v.location = InTransit{next_road, target, state_.clock + net_->road(next_road).free_flow_time()};
                state_.in_transit[next_road.index()].push_back(v.id);
                ++state_.lane_inbound[target.index()];
            }
        }
    }
}

void Simulation::settle(SignalState& signal) const {
    while (signal.transition && signal.transition->remaining <= kEps) {
        auto& tr = *signal.transition;
        if (tr.stage == Transition::Stage::Yellow) {
            tr.stage = Transition::Stage::AllRed;
            tr.remaining += config_.all_red;
        } else {
            signal.active_phase = tr.next_phase;
            signal.phase_elapsed = 0.0;
            signal.transition.reset();
        }
    }
}

bool Simulation::set_phase(IntersectionId intersection, int phase) {
    if (!intersection.valid() || intersection.index() >= net_->intersections.size())
        throw ConfigError("unknown intersection id " + std::to_string(intersection.value));
    const auto& node = net_->intersection(intersection);
    if (phase < 0 || static_cast<std::size_t>(phase) >= node.phases.size())
        throw ConfigError("unknown phase " + std::to_string(phase) + " at " + node.name);
    SignalState& signal = state_.signals[intersection.index()];
    if (signal.in_transition()) return false;
    signal.phase_elapsed = 0.0;
    if (phase == signal.active_phase) return true;
    signal.transition = Transition{Transition::Stage::Yellow, config_.yellow, phase};
    settle(signal);
    return true;
}

void Simulation::advance_clock() {
    state_.clock += config_.tick;
    for (auto& signal : state_.signals) {
        if (signal.transition) {
            signal.transition->remaining -= config_.tick;
            settle(signal);
        } else {
            signal.phase_elapsed += config_.tick;
        }
    }
}

void Simulation::step(Controller* controller) {
    spawn(state_.clock);
    advance_transit();
    if (controller != nullptr) {
        const double duration = controller->t_duration();
        for (const auto& node : net_->intersections) {
            const SignalState& signal = state_.signals[node.id.index()];
            if (signal.in_transition() || signal.phase_elapsed < duration - kEps) continue;
            const int phase = controller->decide(Observation{*net_, state_, node.id, signal.active_phase});
            set_phase(node.id, phase);
            ++state_.counters.decisions;
        }
    }
    discharge();
    state_.counters.max_total_queue = std::max(state_.counters.max_total_queue, state_.total_queue());
    advance_clock();
}

void Simulation::run(Controller* controller) {
    while (!done()) step(controller);
}

std::vector<std::string> Simulation::check_invariants() const {
    std::vector<std::string> out;
    const auto& c = state_.counters;
    const std::int64_t queued = state_.total_queue();
    const std::int64_t transit = state_.total_in_transit();
    if (c.spawned != c.finished + queued + transit)
        out.push_back("conservation: spawned " + std::to_string(c.spawned) + " != finished " +
                      std::to_string(c.finished) + " + queued " + std::to_string(queued) + " + in transit " +
                      std::to_string(transit));
    if (c.demanded != c.spawned + c.blocked) out.push_back("conservation: demanded != spawned + blocked");
    if (static_cast<std::int64_t>(state_.vehicles.size()) != c.spawned)
        out.push_back("vehicle table size differs from spawn counter");

    std::vector<int> inbound(net_->lanes.size(), 0);
    std::int64_t finished = 0;
    for (const Vehicle& v : state_.vehicles) {
        const auto& route = routes_[static_cast<std::size_t>(v.route)];
        const bool is_finished = std::holds_alternative<Finished>(v.location);
        const std::string who = "vehicle " + std::to_string(v.id);
        if (is_finished != v.exit_time.has_value()) out.push_back(who + ": exit time set iff finished violated");
        if (v.exit_time && *v.exit_time < v.entry_time) out.push_back(who + ": exit before entry");
        if (static_cast<std::size_t>(v.route_pos) >= route.roads.size()) out.push_back(who + ": route position overflow");
        if (is_finished) ++finished;
        if (const auto* t = std::get_if<InTransit>(&v.location)) {
            ++inbound[t->target.index()];
            if (net_->lane(t->target).road != t->road) out.push_back(who + ": target lane not on current road");
        }
        if (const auto* q = std::get_if<Queued>(&v.location)) {
            if (!net_->lane(q->lane).designation.contains(next_turn(v)))
                out.push_back(who + ": queued on a lane not designated for its next turn");
        }
    }
    if (finished != c.finished) out.push_back("finished counter differs from vehicle records");
    if (inbound != state_.lane_inbound) out.push_back("lane inbound counters differ from vehicle records");
    for (std::size_t l = 0; l < state_.lane_queues.size(); ++l) {
        for (std::int64_t id : state_.lane_queues[l]) {
            const auto* q = std::get_if<Queued>(&state_.vehicles[static_cast<std::size_t>(id)].location);
            if (q == nullptr || q->lane.index() != l) out.push_back("lane queue holds a vehicle not queued there");
        }
    }
    for (const auto& signal : state_.signals)
        if (signal.phase_elapsed < 0.0) out.push_back("negative phase elapsed time");
    return out;
}

std::uint64_t Simulation::digest() const {
    Fnv1a h;
    h.add(state_.clock);
    for (const Vehicle& v : state_.vehicles) {
        h.add(v.id);
        h.add(v.route);
        h.add(v.route_pos);
        h.add(v.entry_time);
        h.add(v.exit_time.value_or(-1.0));
        h.add(static_cast<int>(v.location.index()));
        if (const auto* t = std::get_if<InTransit>(&v.location)) {
            h.add(t->road.value);
            h.add(t->target.value);
            h.add(t->arrival);
        } else if (const auto* q = std::get_if<Queued>(&v.location)) {
            h.add(q->lane.value);
        }
    }
    for (const auto& q : state_.lane_queues) {
        h.add(static_cast<std::int64_t>(q.size()));
        for (std::int64_t id : q) h.add(id);
    }
    for (double credit : state_.service_credit) h.add(credit);
    for (const auto& s : state_.signals) {
        h.add(s.active_phase);
        h.add(s.phase_elapsed);
        h.add(s.transition ? s.transition->remaining : -1.0);
        h.add(s.transition ? s.transition->next_phase : -1);
    }
    const auto& c = state_.counters;
    for (std::int64_t v : {c.demanded, c.spawned, c.blocked, c.finished, c.decisions, c.max_total_queue}) h.add(v);
    return h.value();
}

}  // namespace epsim
