#include "epsim/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace epsim {

// ---------------------------------------------------------------------------
// Demand

namespace {

struct RateWindow {
    double rate;
    double start;
    double end;
};

std::vector<RoadId> straight_route(const RoadNetwork& net, RoadId source, const Intersection& first, Compass approach,
                                   Turn turn) {
    std::vector<RoadId> roads{source};
    const Intersection* node = &first;
    Compass heading = exit_side(approach, turn);
    for (;;) {
        const auto out = node->exit_roads[static_cast<std::size_t>(heading)];
        if (!out) return {};
        roads.push_back(*out);
        const Road& road = net.road(*out);
        if (road.is_sink()) return roads;
        node = &net.intersection(*road.to);
    }
}

}  // namespace

std::vector<FlowSpec> generate_synthetic_demand(const RoadNetwork& net, const DemandProfile& profile,
                                                std::uint64_t seed, const DemandOptions& options) {
    const auto windows = [&](Compass entry) -> std::vector<RateWindow> {
        return std::visit(
            [&](const auto& p) -> std::vector<RateWindow> {
                using P = std::decay_t<decltype(p)>;
                if constexpr (std::is_same_v<P, UniformDemand>) {
                    return {{p.rate, 0.0, options.end_s}};
                } else if constexpr (std::is_same_v<P, AsymmetricDemand>) {
                    const bool major = entry == Compass::East || entry == Compass::West;
                    return {{major ? p.major_rate : p.minor_rate, 0.0, options.end_s}};
                } else {
                    if (!(p.window_start < p.window_end)) throw ConfigError("peak window must be non-empty");
                    return {{p.base, 0.0, p.window_start}, {p.peak, p.window_start, p.window_end},
                            {p.base, p.window_end, options.end_s}};
                }
            },
            profile);
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<FlowSpec> flows;
    for (const auto& node : net.intersections) {
        for (Compass side : kCompassOrder) {
            const auto source = node.approach_roads[static_cast<std::size_t>(side)];
            if (!source || !net.road(*source).is_source()) continue;
            for (Turn turn : kTurnOrder) {
                if (node.movement_index(side, turn) < 0) continue;
                auto route = straight_route(net, *source, node, side, turn);
                if (route.empty()) continue;
                for (const RateWindow& w : windows(side)) {
                    if (!(w.rate > 0.0)) throw ConfigError("demand rates must be positive");
                    if (w.end <= w.start) continue;
                    const double headway = 1.0 / w.rate;
                    FlowSpec f;
                    f.route = route;
                    f.headway_s = headway;
                    f.start_s = w.start + unit(rng) * headway;
                    f.end_s = w.end >= options.end_s ? options.end_s : w.end - 1e-6;
                    if (f.start_s > f.end_s) continue;
                    flows.push_back(std::move(f));
                }
            }
        }
    }

    // Feasibility: the summed rate entering through any lane must not exceed its discharge rate.
    const double lane_limit = 1.0 / options.saturation_headway;
    std::map<std::pair<LaneId, int>, double> load;  // (lane, window index) -> rate
    for (const auto& node : net.intersections) {
        for (Compass side : kCompassOrder) {
            const auto source = node.approach_roads[static_cast<std::size_t>(side)];
            if (!source || !net.road(*source).is_source()) continue;
            const auto ws = windows(side);
            for (Turn turn : kTurnOrder) {
                if (node.movement_index(side, turn) < 0) continue;
                std::vector<LaneId> entry_lanes;
                for (LaneId l : net.road(*source).lanes)
                    if (net.lane(l).designation.contains(turn)) entry_lanes.push_back(l);
                for (std::size_t w = 0; w < ws.size(); ++w)
                    for (LaneId l : entry_lanes)
                        load[{l, static_cast<int>(w)}] += ws[w].rate / static_cast<double>(entry_lanes.size());
            }
        }
    }
    for (const auto& [key, rate] : load)
        if (rate > lane_limit + 1e-12)
            throw ConfigError("entry rate " + std::to_string(rate) + " veh/s on lane " + std::to_string(key.first.value) +
                              " exceeds the lane discharge rate " + std::to_string(lane_limit));
    return flows;
}

// ---------------------------------------------------------------------------
// Controllers

std::string_view to_string(ControllerKind k) {
    switch (k) {
        case ControllerKind::FixedTime: return "fixedtime";
        case ControllerKind::MaxPressure: return "mp";
        case ControllerKind::EfficientMaxPressure: return "efficient-mp";
        case ControllerKind::QLearning: return "rl";
    }
    return "?";
}

ControllerKind controller_kind_from_string(std::string_view s) {
    for (ControllerKind k : {ControllerKind::FixedTime, ControllerKind::MaxPressure,
                             ControllerKind::EfficientMaxPressure, ControllerKind::QLearning})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown controller '" + std::string(s) + "' (expected fixedtime|mp|efficient-mp|rl)");
}

std::unique_ptr<Controller> make_controller(const ControllerSpec& spec, const RoadNetwork& net) {
    switch (spec.kind) {
        case ControllerKind::FixedTime: return std::make_unique<FixedTimeController>(spec.control);
        case ControllerKind::MaxPressure: return std::make_unique<MaxPressureController>(spec.control);
        case ControllerKind::EfficientMaxPressure: return std::make_unique<EfficientMaxPressureController>(spec.control);
        case ControllerKind::QLearning: return std::make_unique<QLearningAgent>(net, spec.rl, spec.control);
    }
    throw ConfigError("unknown controller kind");
}

ControllerSpec apply_sweep(const ControllerSpec& spec, const SweepSpec& sweep, std::size_t point) {
    ControllerSpec out = spec;
    const std::string& value = sweep.values.at(point);
    if (sweep.parameter == "t_duration") {
        try {
            out.control.t_duration = std::stod(value);
        } catch (const std::exception&) {
            throw ConfigError("bad t_duration value '" + value + "'");
        }
        out.control.check();
    } else if (sweep.parameter == "phases") {
        out.control.scheme = phase_scheme_from_string(value);
    } else if (sweep.parameter == "state") {
        out.rl.state_kind = state_kind_from_string(value);
    } else if (sweep.parameter == "reward") {
        out.rl.reward_kind = reward_kind_from_string(value);
    } else {
        throw ConfigError("unknown sweep parameter '" + sweep.parameter + "' (expected t_duration|phases|state|reward)");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Cells

bool ExperimentResult::ok() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return !c.error; });
}

std::vector<Cell> enumerate_cells(const ExperimentPlan& plan) {
    std::vector<Cell> cells;
    const std::size_t points = plan.sweep ? plan.sweep->values.size() : 0;
    for (std::size_t s = 0; s < plan.scenarios.size(); ++s)
        for (std::size_t c = 0; c < plan.controllers.size(); ++c) {
            if (points == 0) {
                for (auto seed : plan.seeds) cells.push_back({s, c, std::nullopt, seed});
            } else {
                for (std::size_t p = 0; p < points; ++p)
                    for (auto seed : plan.seeds) cells.push_back({s, c, p, seed});
            }
        }
    return cells;
}

namespace {

std::string sweep_label(const ExperimentPlan& plan, const Cell& cell) {
    if (!plan.sweep || !cell.sweep_point) return {};
    return plan.sweep->parameter + "=" + plan.sweep->values.at(*cell.sweep_point);
}

// Unlabelled controllers are reported under their kind name.
std::string controller_label(const ControllerSpec& spec) {
    return spec.label.empty() ? std::string(to_string(spec.kind)) : spec.label;
}

std::string row_label(const ExperimentPlan& plan, const Cell& cell) {
    const std::string sweep = sweep_label(plan, cell);
    const std::string label = controller_label(plan.controllers.at(cell.controller));
    return sweep.empty() ? label : label + "[" + sweep + "]";
}

}  // namespace

CellResult run_cell(const ExperimentPlan& plan, const Cell& cell) {
    CellResult result;
    result.cell = cell;
    const auto started = std::chrono::steady_clock::now();
    const Scenario& scenario = plan.scenarios.at(cell.scenario);
    RunReport& report = result.report;
    try {
        ControllerSpec spec = plan.controllers.at(cell.controller);
        if (cell.sweep_point) spec = apply_sweep(spec, *plan.sweep, *cell.sweep_point);
        if (!scenario.network) throw ConfigError("scenario " + scenario.id + " has no network");

        std::shared_ptr<const RoadNetwork> net = scenario.network;
        if (spec.control.scheme && *spec.control.scheme != net->phase_scheme)
            net = std::make_shared<const RoadNetwork>(with_phase_scheme(*net, *spec.control.scheme));

        SimConfig sim = scenario.sim;
        sim.seed = cell.seed;
        std::vector<FlowSpec> flows = scenario.flows;
        if (scenario.profile) {
            DemandOptions options;
            options.end_s = sim.episode_length;
            options.saturation_headway = sim.saturation_headway;
            flows = generate_synthetic_demand(*net, *scenario.profile, cell.seed, options);
        }

        if (spec.kind == ControllerKind::QLearning && spec.pretrained) {
            QLearnerConfig rl = spec.rl;
            rl.seed = cell.seed;
            QLearningAgent agent(*net, rl, spec.control);
            for (std::size_t m = 0; m < agent.model_count(); ++m) {
                QFunction& q = agent.q_function(m);
                if (q.input_size() != spec.pretrained->input_size() ||
                    q.output_size() != spec.pretrained->output_size())
                    throw ConfigError("pretrained model shape does not match the scenario and state kind");
                q = *spec.pretrained;
            }
            agent.set_epsilon(0.0);
            agent.set_learning(false);
            Simulation simulation(net, std::move(flows), sim);
            agent.begin_episode(*net);
            simulation.run(&agent);
            agent.end_episode();
            report = summarize(simulation);
        } else if (spec.kind == ControllerKind::QLearning) {
            QLearnerConfig rl = spec.rl;
            rl.seed = cell.seed;
            TrainResult trained = train(net, flows, sim, spec.control, rl);
            report = trained.evaluation;
            result.episodes = std::move(trained.episodes);
            result.models = std::move(trained.models);
            result.error = std::move(trained.error);
        } else {
            auto controller = make_controller(spec, *net);
            Simulation simulation(net, std::move(flows), sim);
            controller->begin_episode(*net);
            simulation.run(controller.get());
            controller->end_episode();
            report = summarize(simulation);
        }
    } catch (const std::exception& e) {
        result.error = e.what();
    }
    report.scenario = scenario.id;
    report.controller = controller_label(plan.controllers.at(cell.controller));
    report.sweep = sweep_label(plan, cell);
    report.seed = cell.seed;
    report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    for (auto& e : result.episodes) {
        e.scenario = report.scenario;
        e.controller = report.controller;
        e.sweep = report.sweep;
        e.seed = report.seed;
    }
    return result;
}

ExperimentResult run_experiment(const ExperimentPlan& plan) {
    const auto cells = enumerate_cells(plan);
    if (cells.empty()) throw ConfigError("experiment plan has no cells");
    ExperimentResult result;
    result.cells.resize(cells.size());

    const auto workers = static_cast<std::size_t>(std::clamp<int>(plan.parallelism, 1, static_cast<int>(cells.size())));
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t k = next++; k < cells.size(); k = next++) result.cells[k] = run_cell(plan, cells[k]);
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }

    if (!plan.output_dir.empty()) {
        std::filesystem::create_directories(plan.output_dir);
        auto open = [&](const char* name) {
            std::ofstream os(plan.output_dir / name);
            if (!os) throw ConfigError("cannot write " + (plan.output_dir / name).string());
            return os;
        };
        {
            auto os = open("cells.csv");
            write_cells_csv(os, result.cells);
        }
        {
            auto os = open("timing.csv");
            write_timing_csv(os, result.cells);
        }
        {
            auto os = open("summary.csv");
            write_summary_csv(os, summarize_experiment(plan, result.cells));
        }
        const bool has_rl = std::any_of(result.cells.begin(), result.cells.end(),
                                        [](const CellResult& c) { return !c.episodes.empty(); });
        if (has_rl) {
            auto os = open("episodes.csv");
            write_episodes_csv(os, result.cells);
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string exact(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

void write_report_fields(std::ostream& os, const RunReport& r) {
    os << exact(r.average_travel_time) << ',' << exact(r.demand) << ',' << exact(r.spawned) << ','
       << exact(r.throughput) << ',' << exact(r.unfinished) << ',' << exact(r.blocked_spawns) << ','
       << exact(r.max_total_queue) << ',' << exact(r.decisions);
}

}  // namespace

void write_cells_csv(std::ostream& os, const std::vector<CellResult>& cells) {
    os << "scenario,controller,sweep,seed,status,average_travel_time,demand,spawned,throughput,unfinished,"
          "blocked_spawns,max_total_queue,decisions,episodes_averaged,travel_time_warning,error\n";
    for (const auto& c : cells) {
        const RunReport& r = c.report;
        os << csv_escape(r.scenario) << ',' << csv_escape(r.controller) << ',' << csv_escape(r.sweep) << ',' << r.seed
           << ',' << (c.error ? "failed" : "ok") << ',';
        write_report_fields(os, r);
        os << ',' << r.episodes_averaged << ',' << (r.travel_time_warning ? 1 : 0) << ','
           << csv_escape(c.error.value_or("")) << '\n';
    }
}

void write_timing_csv(std::ostream& os, const std::vector<CellResult>& cells) {
    os << "scenario,controller,sweep,seed,wall_time_s\n";
    for (const auto& c : cells) {
        const RunReport& r = c.report;
        os << csv_escape(r.scenario) << ',' << csv_escape(r.controller) << ',' << csv_escape(r.sweep) << ',' << r.seed
           << ',' << std::fixed << std::setprecision(3) << r.wall_time << std::defaultfloat << '\n';
    }
}

void write_episodes_csv(std::ostream& os, const std::vector<CellResult>& cells) {
    os << "scenario,controller,sweep,seed,episode,average_travel_time,demand,spawned,throughput,unfinished,"
          "blocked_spawns,max_total_queue,decisions\n";
    for (const auto& c : cells) {
        for (std::size_t e = 0; e < c.episodes.size(); ++e) {
            const RunReport& r = c.episodes[e];
            os << csv_escape(r.scenario) << ',' << csv_escape(r.controller) << ',' << csv_escape(r.sweep) << ','
               << r.seed << ',' << e << ',';
            write_report_fields(os, r);
            os << '\n';
        }
    }
}

SummaryTable summarize_experiment(const ExperimentPlan& plan, const std::vector<CellResult>& cells) {
    SummaryTable table;
    for (const auto& s : plan.scenarios) table.columns.push_back(s.id);

    std::map<std::string, std::size_t> row_index;
    std::vector<std::pair<std::size_t, std::optional<std::size_t>>> row_source;  // (controller, sweep point)
    for (const auto& cell : enumerate_cells(plan)) {
        const std::string label = row_label(plan, cell);
        if (row_index.emplace(label, table.rows.size()).second) {
            table.rows.push_back(label);
            row_source.emplace_back(cell.controller, cell.sweep_point);
        }
    }

    std::vector<std::vector<std::pair<double, int>>> acc(table.rows.size(),
                                                         std::vector<std::pair<double, int>>(table.columns.size()));
    for (const auto& c : cells) {
        if (c.error) continue;
        auto& slot = acc[row_index.at(row_label(plan, c.cell))][c.cell.scenario];
        slot.first += c.report.average_travel_time;
        slot.second += 1;
    }
    table.mean.assign(table.rows.size(), std::vector<std::optional<double>>(table.columns.size()));
    table.delta = table.mean;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        for (std::size_t s = 0; s < table.columns.size(); ++s)
            if (acc[r][s].second > 0) table.mean[r][s] = acc[r][s].first / acc[r][s].second;

    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        // Baseline: the first max-pressure row at the same sweep point.
        std::optional<std::size_t> base;
        for (std::size_t b = 0; b < table.rows.size() && !base; ++b)
            if (plan.controllers[row_source[b].first].kind == ControllerKind::MaxPressure &&
                row_source[b].second == row_source[r].second)
                base = b;
        if (!base || *base == r) continue;
        for (std::size_t s = 0; s < table.columns.size(); ++s) {
            const auto& m = table.mean[r][s];
            const auto& b = table.mean[*base][s];
            if (m && b && *b != 0.0) table.delta[r][s] = (*m - *b) / *b * 100.0;
        }
    }
    return table;
}

std::string format_summary_value(double mean, std::optional<double> delta) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << mean;
    if (delta) os << " (" << (*delta >= 0.0 ? "+" : "") << std::fixed << std::setprecision(2) << *delta << "%)";
    return os.str();
}

void write_summary_csv(std::ostream& os, const SummaryTable& table) {
    os << "controller";
    for (const auto& c : table.columns) os << ',' << csv_escape(c);
    os << '\n';
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        os << csv_escape(table.rows[r]);
        for (std::size_t s = 0; s < table.columns.size(); ++s) {
            os << ',';
            if (table.mean[r][s]) os << csv_escape(format_summary_value(*table.mean[r][s], table.delta[r][s]));
        }
        os << '\n';
    }
}

void print_summary(std::ostream& os, const SummaryTable& table) {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"controller"});
    for (const auto& c : table.columns) grid.back().push_back(c);
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        grid.push_back({table.rows[r]});
        for (std::size_t s = 0; s < table.columns.size(); ++s)
            grid.back().push_back(table.mean[r][s] ? format_summary_value(*table.mean[r][s], table.delta[r][s]) : "-");
    }
    std::vector<std::size_t> width(grid.front().size(), 0);
    for (const auto& row : grid)
        for (std::size_t k = 0; k < row.size(); ++k) width[k] = std::max(width[k], row[k].size());
    for (const auto& row : grid) {
        for (std::size_t k = 0; k < row.size(); ++k)
            os << (k ? "  " : "") << std::left << std::setw(static_cast<int>(width[k])) << row[k];
        os << '\n';
    }
    os << std::right;
}

}  // namespace epsim
