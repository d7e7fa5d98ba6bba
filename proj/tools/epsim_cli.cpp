#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>

#include "epsim/bench.hpp"
#include "epsim/io.hpp"

using namespace epsim;

namespace {

constexpr int kExitCellFailure = 1;
constexpr int kExitConfig = 2;

std::string env_name(const std::string& flag) {
    std::string out = "EPSIM_";
    for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return out;
}

template <class T>
CLI::Option* flag_opt(CLI::App* app, const std::string& name, T& value, const std::string& help) {
    return app->add_option("--" + name, value, help)->envname(env_name(name))->capture_default_str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct DemandArgs {
    std::string profile;
    double rate = 0.1;
    double major = 0.2;
    double minor = 0.05;
    double base = 0.05;
    double peak = 0.2;
    double window_start = 1200.0;
    double window_end = 2400.0;

    void add(CLI::App* app) {
        flag_opt(app, "profile", profile, "Synthetic demand profile")
            ->check(CLI::IsMember({"uniform", "asymmetric", "peaked"}));
        flag_opt(app, "rate", rate, "Uniform: vehicles/s per route");
        flag_opt(app, "major", major, "Asymmetric: east-west vehicles/s per route");
        flag_opt(app, "minor", minor, "Asymmetric: north-south vehicles/s per route");
        flag_opt(app, "base", base, "Peaked: off-peak vehicles/s per route");
        flag_opt(app, "peak", peak, "Peaked: peak vehicles/s per route");
        flag_opt(app, "window-start", window_start, "Peaked: window start (s)");
        flag_opt(app, "window-end", window_end, "Peaked: window end (s)");
    }

    std::optional<DemandProfile> profile_value() const {
        if (profile.empty()) return std::nullopt;
        if (profile == "uniform") return UniformDemand{rate};
        if (profile == "asymmetric") return AsymmetricDemand{major, minor};
        return PeakedDemand{base, peak, window_start, window_end};
    }
};

struct SimArgs {
    std::string config_file;
    std::optional<double> tick, yellow, all_red, saturation_headway, episode_length;
    std::optional<int> lane_capacity;

    void add(CLI::App* app) {
        flag_opt(app, "sim-config", config_file, "JSON file of simulator overrides");
        flag_opt(app, "tick", tick, "Tick length (s)");
        flag_opt(app, "yellow", yellow, "Yellow interval (s)");
        flag_opt(app, "all-red", all_red, "All-red interval (s)");
        flag_opt(app, "saturation-headway", saturation_headway, "Seconds per discharged vehicle per lane");
        flag_opt(app, "lane-capacity", lane_capacity, "Max vehicles per lane (0 = from road length)");
        flag_opt(app, "episode-length", episode_length, "Episode length (s)");
    }

    SimConfig value() const {
        SimConfig c;
        if (!config_file.empty()) c = sim_config_from_json(read_json_file(config_file), c);
        if (tick) c.tick = *tick;
        if (yellow) c.yellow = *yellow;
        if (all_red) c.all_red = *all_red;
        if (saturation_headway) c.saturation_headway = *saturation_headway;
        if (lane_capacity) c.lane_capacity = *lane_capacity;
        if (episode_length) c.episode_length = *episode_length;
        c.check();
        return c;
    }
};

struct RunArgs {
    std::string network;
    std::string flows;
    std::string controllers = "mp";
    std::string state = "ep";
    std::string reward = "pressure";
    double t_duration = 15.0;
    std::string phases;
    int episodes = 200;
    int eval_episodes = 10;
    bool greedy_eval = false;
    bool per_intersection = false;
    std::string seeds = "0,1,2";
    std::string out;
    int parallel = 1;
    std::string load_model;
    bool quiet = false;
    DemandArgs demand;
    SimArgs sim;

    void add(CLI::App* app) {
        flag_opt(app, "network", network, "Network file")->required();
        flag_opt(app, "flows", flows, "Flow file (or use --profile)");
        flag_opt(app, "controller", controllers, "Comma list of fixedtime|mp|efficient-mp|rl");
        flag_opt(app, "state", state, "RL state: nv|pressure-nv|pressure-queue|ep");
        flag_opt(app, "reward", reward, "RL reward: pressure|queue");
        flag_opt(app, "t-duration", t_duration, "Phase duration (s)");
        flag_opt(app, "phases", phases, "Phase scheme override: 4|8");
        flag_opt(app, "episodes", episodes, "RL training episodes");
        flag_opt(app, "eval-episodes", eval_episodes, "RL episodes averaged for the report");
        app->add_flag("--greedy-eval", greedy_eval, "Evaluate RL on extra epsilon=0 episodes")
            ->envname(env_name("greedy-eval"));
        app->add_flag("--per-intersection", per_intersection, "One RL model per intersection")
            ->envname(env_name("per-intersection"));
        flag_opt(app, "seeds", seeds, "Comma list of seeds");
        flag_opt(app, "out", out, "Output directory for CSV reports");
        flag_opt(app, "parallel", parallel, "Concurrent cells")->check(CLI::PositiveNumber);
        flag_opt(app, "load-model", load_model, "RL: evaluate a saved model instead of training");
        app->add_flag("--quiet", quiet, "Do not print the summary table")->envname(env_name("quiet"));
        demand.add(app);
        sim.add(app);
    }

    ExperimentPlan plan() const {
        ExperimentPlan plan;
        Scenario scenario;
        scenario.id = std::filesystem::path(network).stem().string();
        scenario.network = std::make_shared<const RoadNetwork>(load_network(network));
        scenario.sim = sim.value();
        scenario.profile = demand.profile_value();
        if (!scenario.profile) {
            if (flows.empty()) throw ConfigError("either --flows or --profile is required");
            scenario.flows = load_flows(flows, *scenario.network);
        }
        plan.scenarios.push_back(std::move(scenario));

        std::shared_ptr<const QFunction> pretrained;
        if (!load_model.empty()) {
            std::ifstream is(load_model);
            if (!is) throw ConfigError("cannot read " + load_model);
            pretrained = std::make_shared<const QFunction>(QFunction::load(is));
        }
        for (const auto& name : split_list(controllers)) {
            ControllerSpec spec;
            spec.label = name;
            spec.kind = controller_kind_from_string(name);
            spec.control.t_duration = t_duration;
            if (!phases.empty()) spec.control.scheme = phase_scheme_from_string(phases);
            spec.control.check();
            spec.rl.state_kind = state_kind_from_string(state);
            spec.rl.reward_kind = reward_kind_from_string(reward);
            spec.rl.episodes = episodes;
            spec.rl.eval_episodes = eval_episodes;
            spec.rl.greedy_eval = greedy_eval;
            spec.rl.shared_parameters = !per_intersection;
            spec.rl.check();
            if (spec.kind == ControllerKind::QLearning) spec.pretrained = pretrained;
            plan.controllers.push_back(std::move(spec));
        }
        if (plan.controllers.empty()) throw ConfigError("no controllers given");

        plan.seeds.clear();
        for (const auto& s : split_list(seeds)) {
            try {
                plan.seeds.push_back(std::stoull(s));
            } catch (const std::exception&) {
                throw ConfigError("bad seed '" + s + "'");
            }
        }
        if (plan.seeds.empty()) throw ConfigError("no seeds given");
        plan.output_dir = out;
        plan.parallelism = parallel;
        return plan;
    }
};

int execute(const ExperimentPlan& plan, bool quiet) {
    const ExperimentResult result = run_experiment(plan);
    if (!plan.output_dir.empty()) {
        for (const auto& c : result.cells) {
            for (std::size_t m = 0; m < c.models.size(); ++m) {
                const auto dir = plan.output_dir / "models";
                std::filesystem::create_directories(dir);
                std::string name = c.report.scenario + "_" + c.report.controller + "_seed" +
                                   std::to_string(c.report.seed) + (c.report.sweep.empty() ? "" : "_" + c.report.sweep) +
                                   "_m" + std::to_string(m) + ".qf";
                std::replace(name.begin(), name.end(), '=', '-');
                std::ofstream os(dir / name);
                c.models[m].save(os);
            }
        }
    }
    if (!quiet) print_summary(std::cout, summarize_experiment(plan, result.cells));
    for (const auto& c : result.cells)
        if (c.error)
            std::cerr << "cell " << c.report.scenario << '/' << c.report.controller << '/' << c.report.sweep << "/seed "
                      << c.report.seed << " failed: " << *c.error << '\n';
    return result.ok() ? 0 : kExitCellFailure;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Queue-based traffic network simulator and signal-control benchmark"};
    app.require_subcommand(1);

    // gen-grid
    auto* grid = app.add_subcommand("gen-grid", "Write a grid network file");
    int rows = 1, cols = 1;
    double ew = 400.0, sn = 400.0, speed = 10.0;
    std::string grid_phases = "4", layout = "exclusive", grid_out;
    flag_opt(grid, "rows", rows, "Rows")->required();
    flag_opt(grid, "cols", cols, "Columns")->required();
    flag_opt(grid, "ew-m", ew, "East-west road length (m)");
    flag_opt(grid, "sn-m", sn, "South-north road length (m)");
    flag_opt(grid, "speed", speed, "Free-flow speed (m/s)");
    flag_opt(grid, "phases", grid_phases, "Phase scheme: 4|8");
    flag_opt(grid, "layout", layout, "Lane layout: exclusive|shared")->check(CLI::IsMember({"exclusive", "shared"}));
    flag_opt(grid, "out", grid_out, "Output file (stdout when omitted)");

    // gen-demand
    auto* demand = app.add_subcommand("gen-demand", "Write a synthetic flow file for a network");
    std::string demand_network, demand_out;
    std::uint64_t demand_seed = 0;
    double demand_end = 3600.0, demand_sat = 2.0;
    DemandArgs demand_args;
    flag_opt(demand, "network", demand_network, "Network file")->required();
    demand_args.add(demand);
    flag_opt(demand, "seed", demand_seed, "Seed for start-time jitter");
    flag_opt(demand, "end-s", demand_end, "Last spawn instant (s)");
    flag_opt(demand, "saturation-headway", demand_sat, "Lane discharge headway used for the feasibility check");
    flag_opt(demand, "out", demand_out, "Output file (stdout when omitted)");

    // run
    auto* run = app.add_subcommand("run", "Run a controller x seed matrix on one scenario");
    RunArgs run_args;
    run_args.add(run);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a matrix swept over one controller parameter");
    RunArgs sweep_args;
    std::string sweep_param, sweep_values;
    sweep_args.add(sweep);
    flag_opt(sweep, "param", sweep_param, "t_duration|phases|state|reward")->required();
    flag_opt(sweep, "values", sweep_values, "Comma list of values")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*grid) {
            GridOptions options;
            options.speed_mps = speed;
            options.layout = layout == "shared" ? LaneLayout::Shared : LaneLayout::Exclusive;
            const RoadNetwork net = build_grid(rows, cols, ew, sn, phase_scheme_from_string(grid_phases), options);
            if (grid_out.empty())
                std::cout << network_to_json(net).dump(2) << '\n';
            else
                save_network(grid_out, net);
            return 0;
        }
        if (*demand) {
            const RoadNetwork net = load_network(demand_network);
            const auto profile = demand_args.profile_value();
            if (!profile) throw ConfigError("--profile is required");
            DemandOptions options;
            options.end_s = demand_end;
            options.saturation_headway = demand_sat;
            const auto flows = generate_synthetic_demand(net, *profile, demand_seed, options);
            if (demand_out.empty())
                std::cout << flows_to_json(net, flows).dump(2) << '\n';
            else
                save_flows(demand_out, net, flows);
            return 0;
        }
        if (*run) return execute(run_args.plan(), run_args.quiet);
        if (*sweep) {
            ExperimentPlan plan = sweep_args.plan();
            plan.sweep = SweepSpec{sweep_param, split_list(sweep_values)};
            if (plan.sweep->values.empty()) throw ConfigError("--values is empty");
            for (const auto& spec : plan.controllers)
                for (std::size_t p = 0; p < plan.sweep->values.size(); ++p) apply_sweep(spec, *plan.sweep, p);
            return execute(plan, sweep_args.quiet);
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitCellFailure;
    }
    return 0;
}
