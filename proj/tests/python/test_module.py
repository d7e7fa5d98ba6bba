import math

import pytest

import epsim


@pytest.fixture
def single():
    return epsim.build_grid(1, 1, 400, 400)


def test_grid_shape():
    net = epsim.build_grid(3, 4, 400, 800)
    assert net.num_intersections == 12
    assert net.validate() == []
    assert net.phase_labels(0) == ["A", "B", "C", "D"]
    eight = net.with_phase_scheme(epsim.PhaseScheme.EightPhase)
    assert len(eight.phase_labels(0)) == 8
    assert net.find_road("I_0_0->I_0_1") is not None
    assert net.find_road("nowhere") is None


def test_network_json_round_trip(single, tmp_path):
    path = tmp_path / "net.json"
    single.save(path)
    loaded = epsim.load_network(path)
    assert loaded.road_names == single.road_names
    assert epsim.RoadNetwork.from_json(single.to_json()).num_lanes == single.num_lanes


def test_bad_input_raises_config_error():
    with pytest.raises(epsim.ConfigError):
        epsim.build_grid(0, 2)
    with pytest.raises(ValueError):
        epsim.RoadNetwork.from_json('{"roads": 3}')
    with pytest.raises(epsim.ConfigError):
        epsim.MaxPressureController(t_duration=0)


def test_pressure_functions():
    assert epsim.movement_pressure(5, 2) == 3
    assert epsim.phase_pressure(3, -1) == 2
    assert epsim.efficient_pressure([4, 2], [1, 1, 1]) == pytest.approx(2.0)


def test_demand_and_flow_files(single, tmp_path):
    flows = epsim.generate_demand(single, epsim.UniformDemand(0.1), seed=3)
    assert len(flows) == 12
    assert all(f.headway_s == pytest.approx(10.0) for f in flows)
    path = tmp_path / "flows.json"
    epsim.save_flows(path, single, flows)
    back = epsim.load_flows(path, single)
    assert [f.route for f in back] == [f.route for f in flows]
    with pytest.raises(epsim.ConfigError):
        epsim.generate_demand(single, epsim.UniformDemand(0.9))


def test_simulation_conserves_vehicles(single):
    flows = epsim.generate_demand(single, epsim.AsymmetricDemand(0.14, 0.035), seed=0)
    config = epsim.SimConfig()
    config.episode_length = 1200
    sim = epsim.Simulation(single, flows, config)
    controller = epsim.EfficientMaxPressureController()
    while not sim.done():
        sim.step(controller)
        assert sim.check_invariants() == []
    report = sim.report()
    assert report.throughput + report.unfinished + report.blocked_spawns == report.demand
    assert report.average_travel_time > 0
    assert sim.counters()["decisions"] == report.decisions


def test_runs_are_deterministic(single):
    flows = epsim.generate_demand(single, epsim.UniformDemand(0.05), seed=9)
    digests = []
    for _ in range(2):
        sim = epsim.Simulation(single, flows)
        sim.run(epsim.MaxPressureController())
        digests.append(sim.digest())
    assert digests[0] == digests[1]


def test_python_controller_matches_builtin(single):
    class ArgmaxEP(epsim.Controller):
        def name(self):
            return "py-emp"

        def t_duration(self):
            return 15.0

        def decide(self, obs):
            ep = obs.pressure().phase_ep
            return ep.index(max(ep))

    flows = epsim.generate_demand(single, epsim.AsymmetricDemand(0.1, 0.05), seed=2)
    a = epsim.Simulation(single, flows)
    a.run(ArgmaxEP())
    b = epsim.Simulation(single, flows)
    b.run(epsim.EfficientMaxPressureController())
    assert a.digest() == b.digest()


def test_pressure_report_and_state(single):
    flows = epsim.generate_demand(single, epsim.UniformDemand(0.1), seed=0)
    sim = epsim.Simulation(single, flows)
    for _ in range(120):
        sim.step()
    report = sim.pressure_report(0)
    assert len(report.phase_ep) == 4
    assert report.intersection_pressure == sim.intersection_pressure(0)
    assert epsim.efficient_mp_decide(report) == report.phase_ep.index(max(report.phase_ep))
    features = sim.state_vector(0, epsim.StateKind.NV)
    assert len(features) == 8 + 4
    assert sum(features[8:]) == 1


def test_training_and_model_files(single, tmp_path):
    flows = epsim.generate_demand(single, epsim.UniformDemand(0.05), seed=0)
    sim = epsim.SimConfig()
    sim.episode_length = 600
    config = epsim.QLearnerConfig()
    config.episodes = 3
    config.eval_episodes = 1
    result = epsim.train(single, flows, sim, config)
    assert result.error is None
    assert len(result.episodes) == 3
    assert len(result.models) == 1
    model = result.models[0]
    path = tmp_path / "model.qf"
    model.save(path)
    loaded = epsim.QFunction.load(path)
    assert loaded.parameters() == model.parameters()

    agent = epsim.QLearningAgent(single, config)
    agent.set_model(0, loaded)
    agent.epsilon = 0.0
    agent.set_learning(False)
    run = epsim.Simulation(single, flows, sim)
    run.run(agent)
    assert run.report().throughput > 0


def test_experiment_summary(single, tmp_path):
    plan = epsim.ExperimentPlan()
    sim = epsim.SimConfig()
    sim.episode_length = 900
    plan.scenarios = [epsim.Scenario("single", single, sim, profile=epsim.UniformDemand(0.05))]
    plan.controllers = [
        epsim.ControllerSpec(epsim.ControllerKind.MaxPressure),
        epsim.ControllerSpec(epsim.ControllerKind.FixedTime),
    ]
    plan.seeds = [0, 1]
    plan.output_dir = tmp_path
    result = epsim.run_experiment(plan)
    assert result.ok()
    assert len(result.cells) == 4
    table = epsim.summarize_experiment(plan, result.cells)
    assert table.rows == ["mp", "fixedtime"]
    assert table.delta[0][0] is None
    mp = sum(c.report.average_travel_time for c in result.cells if c.controller == 0) / 2
    ft = sum(c.report.average_travel_time for c in result.cells if c.controller == 1) / 2
    assert math.isclose(table.delta[1][0], (ft - mp) / mp * 100.0, rel_tol=1e-9)
    assert (tmp_path / "summary.csv").exists()
    assert epsim.format_summary_value(250.0, -1.004) == "250.00 (-1.00%)"
