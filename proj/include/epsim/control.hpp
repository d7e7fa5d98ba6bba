#pragma once

#include <optional>
#include <span>
#include <string>

#include "epsim/controller.hpp"
#include "epsim/pressure.hpp"

namespace epsim {

enum class TieBreak : std::uint8_t { LowestPhaseIndex };

struct ControllerConfig {
    double t_duration = 15.0;
    TieBreak tie_break = TieBreak::LowestPhaseIndex;
    std::optional<PhaseScheme> scheme;  // unset: keep the network's phase table

    void check() const;
};

/// Index of the first maximum. Empty input is a contract violation.
template <class T>
int argmax_lowest(std::span<const T> values) {
    if (values.empty()) throw ContractViolation("argmax over an empty set");
    int best = 0;
    for (std::size_t k = 1; k < values.size(); ++k)
        if (values[k] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

/// Next phase in cyclic order.
int fixed_time_decide(int current_phase, std::span<const int> phases);

/// Phase with the highest lane-to-lane phase pressure.
int mp_decide(const PressureReport& report);

/// Phase with the highest phase efficient pressure.
int efficient_mp_decide(const PressureReport& report);

class FixedTimeController final : public Controller {
public:
    explicit FixedTimeController(ControllerConfig config = {});
    std::string name() const override { return "fixedtime"; }
    double t_duration() const override { return config_.t_duration; }
    int decide(const Observation& obs) override;

private:
    ControllerConfig config_;
};

class MaxPressureController final : public Controller {
public:
    explicit MaxPressureController(ControllerConfig config = {});
    std::string name() const override { return "mp"; }
    double t_duration() const override { return config_.t_duration; }
    int decide(const Observation& obs) override;

private:
    ControllerConfig config_;
};

class EfficientMaxPressureController final : public Controller {
public:
    explicit EfficientMaxPressureController(ControllerConfig config = {});
    std::string name() const override { return "efficient-mp"; }
    double t_duration() const override { return config_.t_duration; }
    int decide(const Observation& obs) override;

private:
    ControllerConfig config_;
};

}  // namespace epsim
