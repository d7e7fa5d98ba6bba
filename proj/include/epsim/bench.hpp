#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "epsim/control.hpp"
#include "epsim/metrics.hpp"
#include "epsim/network.hpp"
#include "epsim/rl.hpp"
#include "epsim/sim.hpp"

namespace epsim {

// ---------------------------------------------------------------------------
// Synthetic demand

struct UniformDemand {
    double rate = 0.1;  // vehicles per second per route
};
/// Routes entering from the east or west edge at major_rate, north or south at minor_rate.
struct AsymmetricDemand {
    double major_rate = 0.2;
    double minor_rate = 0.05;
};
/// `base` rate outside [window_start, window_end), `peak` inside.
struct PeakedDemand {
    double base = 0.05;
    double peak = 0.2;
    double window_start = 1200.0;
    double window_end = 2400.0;
};
using DemandProfile = std::variant<UniformDemand, AsymmetricDemand, PeakedDemand>;

struct DemandOptions {
    double end_s = 3600.0;              // last spawn instant
    double saturation_headway = 2.0;    // used to reject infeasible entry rates
};

/// Boundary-to-boundary routes: from every source road, one route per turn at the
/// first intersection, continuing straight to the grid edge. Start offsets are
/// jittered within one headway by `seed`.
std::vector<FlowSpec> generate_synthetic_demand(const RoadNetwork& net, const DemandProfile& profile,
                                                std::uint64_t seed, const DemandOptions& options = {});

// ---------------------------------------------------------------------------
// Experiments

enum class ControllerKind : std::uint8_t { FixedTime, MaxPressure, EfficientMaxPressure, QLearning };

std::string_view to_string(ControllerKind k);
ControllerKind controller_kind_from_string(std::string_view s);

struct ControllerSpec {
    std::string label;  // empty: reported as the kind name
    ControllerKind kind = ControllerKind::MaxPressure;
    ControllerConfig control;
    QLearnerConfig rl;  // used by QLearning only
    std::shared_ptr<const QFunction> pretrained;  // QLearning: evaluate greedily with these parameters, no training
};

struct Scenario {
    std::string id;
    std::shared_ptr<const RoadNetwork> network;
    SimConfig sim;
    std::vector<FlowSpec> flows;          // used when profile is empty
    std::optional<DemandProfile> profile;  // regenerated per seed when set
};

/// Sweep over one controller parameter: t_duration, phases (4|8) or state (nv|...|ep).
struct SweepSpec {
    std::string parameter;
    std::vector<std::string> values;
};

struct ExperimentPlan {
    std::vector<Scenario> scenarios;
    std::vector<ControllerSpec> controllers;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
    std::optional<SweepSpec> sweep;
    std::filesystem::path output_dir;  // empty: no files written
    int parallelism = 1;
};

struct Cell {
    std::size_t scenario = 0;
    std::size_t controller = 0;
    std::optional<std::size_t> sweep_point;
    std::uint64_t seed = 0;
};

struct CellResult {
    Cell cell;
    RunReport report;
    std::vector<RunReport> episodes;  // RL training curve; empty for classical controllers
    std::vector<QFunction> models;    // trained RL parameters
    std::optional<std::string> error;
};

struct ExperimentResult {
    std::vector<CellResult> cells;
    bool ok() const;
};

std::vector<Cell> enumerate_cells(const ExperimentPlan& plan);

/// Controller spec after applying a cell's sweep point. Throws ConfigError on a bad value.
ControllerSpec apply_sweep(const ControllerSpec& spec, const SweepSpec& sweep, std::size_t point);

std::unique_ptr<Controller> make_controller(const ControllerSpec& spec, const RoadNetwork& net);

/// Runs one cell in isolation. Failures are recorded in CellResult::error.
CellResult run_cell(const ExperimentPlan& plan, const Cell& cell);

/// Runs every cell, then writes cells.csv, timing.csv, summary.csv (and
/// episodes.csv when RL cells exist) under plan.output_dir.
ExperimentResult run_experiment(const ExperimentPlan& plan);

void write_cells_csv(std::ostream& os, const std::vector<CellResult>& cells);
void write_timing_csv(std::ostream& os, const std::vector<CellResult>& cells);
void write_episodes_csv(std::ostream& os, const std::vector<CellResult>& cells);

/// Seed-averaged travel time per (row label, scenario).
struct SummaryTable {
    std::vector<std::string> rows;     // controller label, with "[param=value]" under a sweep
    std::vector<std::string> columns;  // scenario ids
    std::vector<std::vector<std::optional<double>>> mean;   // [row][column]
    std::vector<std::vector<std::optional<double>>> delta;  // percent vs the MP row, when one exists
};

SummaryTable summarize_experiment(const ExperimentPlan& plan, const std::vector<CellResult>& cells);
/// "mean" or "mean (+x.xx%)", two decimals.
std::string format_summary_value(double mean, std::optional<double> delta);
void write_summary_csv(std::ostream& os, const SummaryTable& table);
void print_summary(std::ostream& os, const SummaryTable& table);

}  // namespace epsim
