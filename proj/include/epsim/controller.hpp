#pragma once

#include <string>

#include "epsim/network.hpp"

namespace epsim {

struct SimState;

/// What a controller sees at a decision instant.
struct Observation {
    const RoadNetwork& network;
    const SimState& state;
    IntersectionId intersection;
    int current_phase = 0;
};

/// Decision interface polled by the simulator. A controller is polled only
/// when an intersection has no active transition and its phase has been held
/// for t_duration(); it answers for any intersection in the network.
class Controller {
public:
    virtual ~Controller() = default;

    virtual std::string name() const = 0;
    virtual double t_duration() const = 0;
    virtual int decide(const Observation& obs) = 0;

    virtual void begin_episode(const RoadNetwork& /*net*/) {}
    virtual void end_episode() {}
};

}  // namespace epsim
