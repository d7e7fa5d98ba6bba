#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "epsim/common.hpp"

namespace epsim {

/// Side of an intersection, clockwise from north.
enum class Compass : std::uint8_t { North = 0, East = 1, South = 2, West = 3 };

enum class Turn : std::uint8_t { Left = 0, Through = 1, Right = 2 };

enum class PhaseScheme : std::uint8_t { FourPhase, EightPhase };

/// Lane arrangement per approach used by build_grid.
///   Exclusive: three lanes, one per turn (0 = Left, 1 = Through, 2 = Right).
///   Shared:    a single lane carrying all three turns.
enum class LaneLayout : std::uint8_t { Exclusive, Shared };

inline constexpr std::array<Compass, 4> kCompassOrder = {Compass::North, Compass::East, Compass::South,
                                                         Compass::West};
inline constexpr std::array<Turn, 3> kTurnOrder = {Turn::Left, Turn::Through, Turn::Right};

std::string_view to_string(Compass c);
std::string_view to_string(Turn t);
std::string_view to_string(PhaseScheme s);
std::string_view to_string(LaneLayout l);
Compass compass_from_string(std::string_view s);
Turn turn_from_string(std::string_view s);
PhaseScheme phase_scheme_from_string(std::string_view s);

/// Side a vehicle leaves through after entering from `approach` and making `turn`
/// (right-hand traffic).
Compass exit_side(Compass approach, Turn turn);

/// Inverse of exit_side; nullopt for a U-turn.
std::optional<Turn> turn_between(Compass approach, Compass exit);

/// Set of permitted turn directions on a lane.
class TurnSet {
public:
    constexpr TurnSet() = default;
    constexpr TurnSet(std::initializer_list<Turn> turns) {
        for (Turn t : turns) insert(t);
    }

    constexpr void insert(Turn t) { bits_ |= bit(t); }
    constexpr bool contains(Turn t) const { return (bits_ & bit(t)) != 0; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::uint8_t bits() const { return bits_; }
    constexpr bool operator==(const TurnSet&) const = default;

private:
    static constexpr std::uint8_t bit(Turn t) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t)); }
    std::uint8_t bits_ = 0;
};

struct Lane {
    LaneId id;
    RoadId road;
    int index = 0;  // 0 = innermost
    TurnSet designation;
};

struct Road {
    RoadId id;
    std::string name;
    std::optional<IntersectionId> from;  // nullopt = boundary source
    std::optional<IntersectionId> to;    // nullopt = boundary sink
    double length_m = 0.0;
    double speed_mps = 0.0;
    std::vector<LaneId> lanes;  // ordered by index

    bool is_sink() const { return !to.has_value(); }
    bool is_source() const { return !from.has_value(); }
    double free_flow_time() const { return length_m / speed_mps; }
};

/// An effective traffic movement: entering lanes of one approach feeding the
/// lanes of one receiving road. The lane-to-lane movement used by classical
/// max-pressure is carried alongside as (tm_entering, tm_exiting).
struct TrafficMovement {
    int id = 0;
    Compass approach = Compass::North;
    Turn turn = Turn::Through;
    RoadId in_road;
    RoadId out_road;
    std::vector<LaneId> entering;
    std::vector<LaneId> exiting;
    LaneId tm_entering;
    LaneId tm_exiting;

    bool signalized() const { return turn != Turn::Right; }
};

struct Phase {
    int id = 0;
    std::string label;
    std::array<int, 2> movements{};  // movement ids within the intersection
};

struct Intersection {
    IntersectionId id;
    std::string name;
    std::array<std::optional<RoadId>, 4> approach_roads;  // incoming, indexed by Compass
    std::array<std::optional<RoadId>, 4> exit_roads;      // outgoing, indexed by Compass
    std::vector<LaneId> entering_lanes;
    std::vector<LaneId> exiting_lanes;
    std::vector<TrafficMovement> movements;
    std::vector<Phase> phases;

    /// Movement for (approach, turn), or -1.
    int movement_index(Compass approach, Turn turn) const;
    /// Signalized movements in movement order.
    std::vector<int> signalized_movements() const;
};

/// An exiting lane and the entering lane that receives its traffic downstream.
struct DownstreamLink {
    LaneId exiting;
    std::optional<LaneId> receiving;  // nullopt = boundary sink
};

struct RoadNetwork {
    std::vector<Intersection> intersections;
    std::vector<Road> roads;
    std::vector<Lane> lanes;  // lane_index: LaneId -> Lane (and through it, Road)
    std::vector<DownstreamLink> downstream;
    PhaseScheme phase_scheme = PhaseScheme::FourPhase;

    const Lane& lane(LaneId id) const { return lanes.at(id.index()); }
    const Road& road(RoadId id) const { return roads.at(id.index()); }
    const Intersection& intersection(IntersectionId id) const { return intersections.at(id.index()); }
    const Road& road_of(LaneId id) const { return road(lane(id).road); }

    std::optional<RoadId> find_road(std::string_view name) const;
    std::optional<IntersectionId> find_intersection(std::string_view name) const;

    /// Entering lane holding the downstream queue of an exiting lane; nullopt at sinks.
    std::optional<LaneId> receiving_lane(LaneId exiting) const;
};

/// Static conflict table over (approach, turn) pairs. Right turns conflict with
/// nothing; a movement conflicts with itself.
bool movements_conflict(Compass a_approach, Turn a_turn, Compass b_approach, Turn b_turn);

/// Canonical phase pairings as (approach, turn) pairs, in cycle order.
std::vector<std::array<std::pair<Compass, Turn>, 2>> canonical_phase_table(PhaseScheme scheme);

struct GridOptions {
    double speed_mps = 10.0;
    LaneLayout layout = LaneLayout::Exclusive;
};

/// Rows x cols grid of 4-approach intersections. Edge approaches connect to
/// boundary sources and sinks. Row 0 is the northern edge, column 0 the western.
RoadNetwork build_grid(int rows, int cols, double ew_length_m, double sn_length_m, PhaseScheme scheme,
                       const GridOptions& options = {});

/// Assembles movements, phases and the downstream table from roads plus the
/// approach/exit road assignment of each intersection. Used by build_grid and
/// the file loader.
void finalize_network(RoadNetwork& net);

/// Copy of `net` with phase tables rebuilt for `scheme`.
RoadNetwork with_phase_scheme(const RoadNetwork& net, PhaseScheme scheme);

struct Violation {
    std::string entity;
    std::string message;
};

/// Every broken structural invariant; empty for a well-formed network.
std::vector<Violation> validate(const RoadNetwork& net);

}  // namespace epsim
