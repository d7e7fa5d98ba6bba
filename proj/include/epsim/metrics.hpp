#pragma once

#include <span>
#include <string>

#include "epsim/sim.hpp"

namespace epsim {

struct TravelTime {
    double seconds = 0.0;
    bool empty_run = false;  // no vehicles were spawned; seconds is 0
};

/// Mean of (exit - entry) over all spawned vehicles. Unfinished vehicles count
/// (episode_length - entry).
TravelTime average_travel_time(std::span<const Vehicle> vehicles, double episode_length);

/// Per-episode (or per-cell) metrics. Count fields are doubles because RL cells
/// report means over their last evaluation episodes.
struct RunReport {
    std::string scenario;
    std::string controller;
    std::string sweep;  // "param=value" or empty
    std::uint64_t seed = 0;
    double average_travel_time = 0.0;
    bool travel_time_warning = false;
    double demand = 0.0;  // spawn attempts
    double spawned = 0.0;
    double throughput = 0.0;  // finished vehicles
    double unfinished = 0.0;
    double blocked_spawns = 0.0;
    double max_total_queue = 0.0;
    double decisions = 0.0;
    int episodes_averaged = 1;
    double wall_time = 0.0;
};

/// Metrics of the simulation's current episode.
RunReport summarize(const Simulation& sim);

/// Field-wise mean of reports (identity fields copied from the first).
RunReport mean_report(std::span<const RunReport> reports);

}  // namespace epsim
