#include "epsim/metrics.hpp"

#include <algorithm>

namespace epsim {

TravelTime average_travel_time(std::span<const Vehicle> vehicles, double episode_length) {
    if (vehicles.empty()) return {0.0, true};
    double total = 0.0;
    for (const Vehicle& v : vehicles) {
        const double exit = v.exit_time.value_or(std::max(episode_length, v.entry_time));
        total += exit - v.entry_time;
    }
    return {total / static_cast<double>(vehicles.size()), false};
}

RunReport summarize(const Simulation& sim) {
    const SimState& s = sim.state();
    RunReport r;
    const auto att = average_travel_time(s.vehicles, sim.config().episode_length);
    r.seed = sim.config().seed;
    r.average_travel_time = att.seconds;
    r.travel_time_warning = att.empty_run;
    r.demand = static_cast<double>(s.counters.demanded);
    r.spawned = static_cast<double>(s.counters.spawned);
    r.throughput = static_cast<double>(s.counters.finished);
    r.unfinished = static_cast<double>(s.counters.spawned - s.counters.finished);
    r.blocked_spawns = static_cast<double>(s.counters.blocked);
    r.max_total_queue = static_cast<double>(s.counters.max_total_queue);
    r.decisions = static_cast<double>(s.counters.decisions);
    return r;
}

RunReport mean_report(std::span<const RunReport> reports) {
    if (reports.empty()) return {};
    RunReport out = reports.front();
    const auto n = static_cast<double>(reports.size());
    auto mean_of = [&](double RunReport::*field) {
        double total = 0.0;
        for (const auto& r : reports) total += r.*field;
        out.*field = total / n;
    };
    for (auto field : {&RunReport::average_travel_time, &RunReport::demand, &RunReport::spawned, &RunReport::throughput,
                       &RunReport::unfinished, &RunReport::blocked_spawns, &RunReport::max_total_queue,
                       &RunReport::decisions, &RunReport::wall_time})
        mean_of(field);
    out.travel_time_warning = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.travel_time_warning; });
    out.episodes_averaged = static_cast<int>(reports.size());
    return out;
}

}  // namespace epsim
