// Acceptance suite: one PASS/FAIL line per criterion. Exit status is non-zero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "epsim/bench.hpp"
#include "epsim/pressure.hpp"
#include "support/scenarios.hpp"

using namespace epsim;
using namespace epsim::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("epsim_acceptance_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

// Fills every lane queue with a random number of placeholder vehicles.
void randomize_queues(SimState& state, std::mt19937_64& rng, int max_queue) {
    std::uniform_int_distribution<int> q(0, max_queue);
    for (auto& lane : state.lane_queues) {
        lane.assign(static_cast<std::size_t>(q(rng)), 0);
    }
}

int oracle_argmax(const std::vector<double>& v) {
    for (std::size_t p = 0; p < v.size(); ++p) {
        bool dominates = true;
        for (std::size_t k = 0; k < v.size(); ++k) dominates = dominates && v[p] >= v[k];
        if (dominates) return static_cast<int>(p);
    }
    return -1;
}

Outcome worked_example() {
    const auto t0 = Clock::now();
    const std::vector<int> in{4}, out{1, 2, 0};
    const double ep = efficient_pressure(in, out);
    const int p1 = movement_pressure(4, 1), p2 = movement_pressure(3, 5);
    const int ps = phase_pressure(p1, p2);
    const int direct = phase_pressure(3, -2);
    const double elapsed = seconds_since(t0);
    const bool ok = ep == 3.0 && p1 == 3 && p2 == -2 && ps == 1 && direct == 1 && elapsed < 1e-3;
    return {ok, fmt("EP([4],[1,2,0])=%.17g phase_pressure(3,-2)=%d (4-1)+(3-5)=%d in %.1f us", ep, direct, ps,
                    elapsed * 1e6)};
}

Outcome singleton_reduction() {
    const auto t0 = Clock::now();
    GridOptions shared;
    shared.layout = LaneLayout::Shared;
    const RoadNetwork net = build_grid(2, 2, 300, 300, PhaseScheme::FourPhase, shared);
    bool singleton = true;
    for (const auto& node : net.intersections)
        for (const auto& m : node.movements) singleton = singleton && m.entering.size() == 1 && m.exiting.size() == 1;
    std::mt19937_64 rng(7);
    int decisions = 0, agree = 0;
    for (int trial = 0; trial < 200; ++trial) {
        SimState state = SimState::empty(net);
        randomize_queues(state, rng, 12);
        for (const auto& node : net.intersections) {
            const auto report = pressure_report(state, net, node.id);
            ++decisions;
            agree += mp_decide(report) == efficient_mp_decide(report);
        }
    }
    const double elapsed = seconds_since(t0);
    return {singleton && agree == decisions && elapsed < 1.0,
            fmt("%d/%d identical decisions on %d random states, all ETMs singleton=%s, %.3f s", agree, decisions, 200,
                singleton ? "yes" : "no", elapsed)};
}

Outcome argmax_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> small(-4, 4);
    std::uniform_int_distribution<int> size_pick(0, 1);
    int mismatches = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = size_pick(rng) ? 8 : 4;
        PressureReport r;
        std::vector<double> p, ep;
        for (std::size_t k = 0; k < n; ++k) {
            r.phase_pressure.push_back(small(rng));
            r.phase_ep.push_back(small(rng) / 3.0);
            p.push_back(r.phase_pressure.back());
            ep.push_back(r.phase_ep.back());
        }
        mismatches += mp_decide(r) != oracle_argmax(p);
        mismatches += efficient_mp_decide(r) != oracle_argmax(ep);
    }
    const double elapsed = seconds_since(t0);
    return {mismatches == 0 && elapsed < 1.0, fmt("%d mismatches over 1000 reports x 2 deciders, %.3f s", mismatches, elapsed)};
}

Outcome conservation() {
    const auto net = std::make_shared<const RoadNetwork>(build_grid(2, 2, 300, 300, PhaseScheme::FourPhase));
    const auto flows = generate_synthetic_demand(*net, UniformDemand{0.05}, 0);
    std::vector<ControllerSpec> specs = {spec(ControllerKind::FixedTime), spec(ControllerKind::MaxPressure),
                                         spec(ControllerKind::EfficientMaxPressure), spec(ControllerKind::QLearning)};
    long violations = 0, ticks = 0;
    double slowest = 0.0;
    std::string summary;
    for (const auto& s : specs) {
        const auto t0 = Clock::now();
        auto controller = make_controller(s, *net);
        Simulation sim(net, flows, SimConfig{});
        controller->begin_episode(*net);
        while (!sim.done()) {
            sim.step(controller.get());
            ++ticks;
            const auto& c = sim.state().counters;
            const std::int64_t in_network = sim.state().total_queue() + sim.state().total_in_transit();
            if (c.demanded != c.finished + in_network + c.blocked) ++violations;
            violations += static_cast<long>(sim.check_invariants().size());
        }
        controller->end_episode();
        slowest = std::max(slowest, seconds_since(t0));
        summary += fmt(" %s:%lld", s.label.c_str(), static_cast<long long>(sim.state().counters.finished));
    }
    return {violations == 0 && slowest < 10.0,
            fmt("%ld violations over %ld ticks; finished per controller%s; slowest run %.2f s", violations, ticks,
                summary.c_str(), slowest)};
}

Outcome stability() {
    const auto t0 = Clock::now();
    const Scenario scenario = single_intersection(7200.0);
    const auto flows = flows_for(scenario, 0);

    Simulation reference(scenario.network, flows, scenario.sim);
    LookaheadController lookahead(reference, 15.0, 40);
    reference.run(&lookahead);
    const double reference_max = static_cast<double>(reference.state().counters.max_total_queue);
    const double cap = 2.0 * reference_max;

    auto max_queue = [&](ControllerKind kind) {
        auto controller = make_controller(spec(kind), *scenario.network);
        Simulation sim(scenario.network, flows, scenario.sim);
        sim.run(controller.get());
        return static_cast<double>(sim.state().counters.max_total_queue);
    };
    const double mp = max_queue(ControllerKind::MaxPressure);
    const double emp = max_queue(ControllerKind::EfficientMaxPressure);
    const double ft = max_queue(ControllerKind::FixedTime);
    const double elapsed = seconds_since(t0);
    return {mp < cap && emp < cap && ft > cap && elapsed < 30.0,
            fmt("cap %.0f (2x lookahead reference %.0f): MP %.0f, Efficient-MP %.0f, FixedTime %.0f; %.2f s", cap,
                reference_max, mp, emp, ft, elapsed)};
}

Outcome ordering() {
    const auto t0 = Clock::now();
    ExperimentPlan plan;
    plan.scenarios = {arterial_grid()};
    plan.controllers = {spec(ControllerKind::FixedTime), spec(ControllerKind::MaxPressure),
                        spec(ControllerKind::EfficientMaxPressure)};
    const auto result = run_experiment(plan);
    const auto table = summarize_experiment(plan, result.cells);
    const double ft = table.mean[0][0].value_or(NAN);
    const double mp = table.mean[1][0].value_or(NAN);
    const double emp = table.mean[2][0].value_or(NAN);
    const double elapsed = seconds_since(t0);
    const bool ok = result.ok() && emp <= mp && mp <= ft && ft >= 1.15 * mp && elapsed < 300.0;
    return {ok, fmt("seed-mean travel time: Efficient-MP %.2f <= MP %.2f <= FixedTime %.2f (FixedTime %+.1f%% vs MP); "
                    "%.2f s",
                    emp, mp, ft, (ft / mp - 1.0) * 100.0, elapsed)};
}

Outcome duration_sweep() {
    const auto t0 = Clock::now();
    ExperimentPlan plan;
    plan.scenarios = {arterial_grid()};
    plan.controllers = {spec(ControllerKind::MaxPressure)};
    plan.sweep = SweepSpec{"t_duration", {"10", "15", "20"}};
    const auto dir_a = scratch("sweep_a"), dir_b = scratch("sweep_b");
    plan.output_dir = dir_a;
    const auto first = run_experiment(plan);
    plan.output_dir = dir_b;
    const auto second = run_experiment(plan);
    const auto table = summarize_experiment(plan, first.cells);
    int populated = 0;
    std::string values;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.mean[r][0] && *table.mean[r][0] > 0.0) ++populated;
        values += fmt(" %s=%.2f", table.rows[r].c_str(), table.mean[r][0].value_or(NAN));
    }
    const bool identical = slurp(dir_a / "cells.csv") == slurp(dir_b / "cells.csv") &&
                           slurp(dir_a / "summary.csv") == slurp(dir_b / "summary.csv");
    const double elapsed = seconds_since(t0);
    const bool ok = first.ok() && second.ok() && first.cells.size() == 9 && populated == 3 && identical &&
                    elapsed < 600.0;
    return {ok, fmt("%zu cells, %d/3 rows populated, repeat byte-identical=%s;%s; %.2f s", first.cells.size(), populated,
                    identical ? "yes" : "no", values.c_str(), elapsed)};
}

Outcome rl_convergence() {
    const auto t0 = Clock::now();
    const Scenario scenario = single_intersection();
    const auto flows = flows_for(scenario, 0);

    auto emp = make_controller(spec(ControllerKind::EfficientMaxPressure), *scenario.network);
    Simulation sim(scenario.network, flows, scenario.sim);
    sim.run(emp.get());
    const double oracle = summarize(sim).average_travel_time;

    QLearnerConfig rl;
    rl.episodes = 200;
    rl.state_kind = StateKind::EfficientPressure;
    rl.reward_kind = RewardKind::NegIntersectionPressure;
    const TrainResult trained = train(scenario.network, flows, scenario.sim, ControllerConfig{}, rl);
    const double learned = trained.evaluation.average_travel_time;
    const double elapsed = seconds_since(t0);
    const bool ok = !trained.error && trained.episodes.size() == 200 && learned <= 1.15 * oracle && elapsed < 600.0;
    return {ok, fmt("last-10 mean %.2f s vs Efficient-MP %.2f s (%+.1f%%), first episode %.2f s; %.2f s", learned, oracle,
                    (learned / oracle - 1.0) * 100.0,
                    trained.episodes.empty() ? NAN : trained.episodes.front().average_travel_time, elapsed)};
}

Outcome gradient() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int draw = 0; draw < 100; ++draw) {
        const std::vector<std::size_t> hidden{32, 32};
        const QFunction q(12, hidden, 4, static_cast<std::uint64_t>(draw) + 1000);
        std::vector<double> s(12);
        for (double& x : s) x = normal(rng);
        const int a = static_cast<int>(rng() % 4);
        worst = std::max(worst, gradient_check(q, s, a, normal(rng)));
    }
    const double elapsed = seconds_since(t0);
    return {worst < 1e-4 && elapsed < 5.0, fmt("max relative error %.3g over 100 draws; %.2f s", worst, elapsed)};
}

Outcome state_ablation() {
    const auto t0 = Clock::now();
    ExperimentPlan plan;
    plan.scenarios = {single_intersection()};
    plan.controllers = {spec(ControllerKind::QLearning, "rl")};
    plan.sweep = SweepSpec{"state", {"nv", "pressure-nv", "pressure-queue", "ep"}};
    plan.seeds = {0};
    plan.output_dir = scratch("ablation");
    const auto result = run_experiment(plan);
    const auto table = summarize_experiment(plan, result.cells);

    std::ifstream is(plan.output_dir / "summary.csv");
    int lines = 0;
    for (std::string line; std::getline(is, line);) ++lines;
    const double nv = table.mean[0][0].value_or(NAN);
    const double ep = table.mean[3][0].value_or(NAN);
    std::string values;
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        values += fmt(" %s=%.2f", table.rows[r].c_str(), table.mean[r][0].value_or(NAN));
    const double elapsed = seconds_since(t0);
    const bool ok = result.ok() && lines == 5 && ep <= nv && elapsed < 2700.0;
    return {ok, fmt("diverged=%s, summary rows %d;%s; %.2f s", result.ok() ? "none" : "some", lines - 1, values.c_str(),
                    elapsed)};
}

Outcome determinism() {
    auto plan_for = [](ControllerSpec s, Scenario scenario) {
        ExperimentPlan plan;
        plan.scenarios = {std::move(scenario)};
        plan.controllers = {std::move(s)};
        plan.seeds = {1};
        return plan;
    };
    ControllerSpec rl = spec(ControllerKind::QLearning);
    rl.rl.episodes = 20;
    const std::vector<ExperimentPlan> plans = {plan_for(spec(ControllerKind::MaxPressure), arterial_grid()),
                                               plan_for(rl, single_intersection())};
    bool identical = true;
    double first = 0.0, repeat = 0.0;
    for (std::size_t k = 0; k < plans.size(); ++k) {
        std::string files[2];
        for (int rep = 0; rep < 2; ++rep) {
            ExperimentPlan plan = plans[k];
            plan.output_dir = scratch("det_" + std::to_string(k) + "_" + std::to_string(rep));
            const auto t0 = Clock::now();
            run_experiment(plan);
            const double dt = seconds_since(t0);
            (rep == 0 ? first : repeat) += dt;
            files[rep] = slurp(plan.output_dir / "cells.csv");
            if (std::filesystem::exists(plan.output_dir / "episodes.csv"))
                files[rep] += slurp(plan.output_dir / "episodes.csv");
        }
        identical = identical && !files[0].empty() && files[0] == files[1];
    }
    return {identical && repeat < 2.0 * first,
            fmt("MP 3x4 cell and RL cell byte-identical=%s; repeat run %.2f s vs first run %.2f s", identical ? "yes" : "no",
                repeat, first)};
}

}  // namespace

int main(int argc, char** argv) {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "worked-example exactness", worked_example},
        {2, "singleton reduction", singleton_reduction},
        {3, "argmax oracle", argmax_oracle},
        {4, "conservation", conservation},
        {5, "stability", stability},
        {6, "controller ordering", ordering},
        {7, "duration sweep", duration_sweep},
        {8, "rl convergence", rl_convergence},
        {9, "gradient check", gradient},
        {10, "state-representation ablation", state_ablation},
        {11, "determinism", determinism},
    };
    std::vector<int> only;
    for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << "  " << c.name << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
