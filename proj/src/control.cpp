#include "epsim/control.hpp"

#include <algorithm>

namespace epsim {

void ControllerConfig::check() const {
    if (!(t_duration > 0.0)) throw ConfigError("t_duration must be positive");
}

int fixed_time_decide(int current_phase, std::span<const int> phases) {
    const auto it = std::find(phases.begin(), phases.end(), current_phase);
    if (it == phases.end()) throw ContractViolation("current phase is not in the phase list");
    const auto next = std::next(it);
    return next == phases.end() ? phases.front() : *next;
}

int mp_decide(const PressureReport& report) { return argmax_lowest(std::span<const int>(report.phase_pressure)); }

int efficient_mp_decide(const PressureReport& report) {
    return argmax_lowest(std::span<const double>(report.phase_ep));
}

FixedTimeController::FixedTimeController(ControllerConfig config) : config_(config) { config_.check(); }

int FixedTimeController::decide(const Observation& obs) {
    const auto& node = obs.network.intersection(obs.intersection);
    std::vector<int> order(node.phases.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = static_cast<int>(k);
    return fixed_time_decide(obs.current_phase, order);
}

MaxPressureController::MaxPressureController(ControllerConfig config) : config_(config) { config_.check(); }

int MaxPressureController::decide(const Observation& obs) {
    return mp_decide(pressure_report(obs.state, obs.network, obs.intersection));
}

EfficientMaxPressureController::EfficientMaxPressureController(ControllerConfig config) : config_(config) {
    config_.check();
}

int EfficientMaxPressureController::decide(const Observation& obs) {
    return efficient_mp_decide(pressure_report(obs.state, obs.network, obs.intersection));
}

}  // namespace epsim
