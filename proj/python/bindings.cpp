#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "epsim/bench.hpp"
#include "epsim/control.hpp"
#include "epsim/io.hpp"
#include "epsim/metrics.hpp"
#include "epsim/network.hpp"
#include "epsim/pressure.hpp"
#include "epsim/rl.hpp"
#include "epsim/sim.hpp"

namespace py = pybind11;
using namespace epsim;

namespace {

using NetworkPtr = std::shared_ptr<RoadNetwork>;

NetworkPtr mutable_ptr(const std::shared_ptr<const RoadNetwork>& p) { return std::const_pointer_cast<RoadNetwork>(p); }

IntersectionId checked_intersection(const RoadNetwork& net, int i) {
    if (i < 0 || static_cast<std::size_t>(i) >= net.intersections.size())
        throw py::index_error("intersection index out of range");
    return IntersectionId{i};
}

LaneId checked_lane(const RoadNetwork& net, int l) {
    if (l < 0 || static_cast<std::size_t>(l) >= net.lanes.size()) throw py::index_error("lane index out of range");
    return LaneId{l};
}

std::string designation_string(TurnSet s) {
    std::string out;
    for (Turn t : kTurnOrder)
        if (s.contains(t)) out += to_string(t);
    return out;
}

std::vector<int> ids(const std::vector<LaneId>& lanes) {
    std::vector<int> out;
    out.reserve(lanes.size());
    for (LaneId l : lanes) out.push_back(l.value);
    return out;
}

class PyController : public Controller {
public:
    using Controller::Controller;
    std::string name() const override { PYBIND11_OVERRIDE_PURE(std::string, Controller, name); }
    double t_duration() const override { PYBIND11_OVERRIDE_PURE(double, Controller, t_duration); }
    int decide(const Observation& obs) override { PYBIND11_OVERRIDE_PURE(int, Controller, decide, obs); }
    void begin_episode(const RoadNetwork& net) override { PYBIND11_OVERRIDE(void, Controller, begin_episode, net); }
    void end_episode() override { PYBIND11_OVERRIDE(void, Controller, end_episode); }
};

ControllerConfig control_config(double t_duration, std::optional<PhaseScheme> scheme) {
    ControllerConfig c;
    c.t_duration = t_duration;
    c.scheme = scheme;
    c.check();
    return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Point-queue traffic signal simulator with pressure-based and Q-learning controllers";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_RuntimeError);
    py::register_exception<TrainingDivergence>(m, "TrainingDivergence", PyExc_ArithmeticError);

    py::enum_<Compass>(m, "Compass")
        .value("North", Compass::North)
        .value("East", Compass::East)
        .value("South", Compass::South)
        .value("West", Compass::West);
    py::enum_<Turn>(m, "Turn").value("Left", Turn::Left).value("Through", Turn::Through).value("Right", Turn::Right);
    py::enum_<PhaseScheme>(m, "PhaseScheme")
        .value("FourPhase", PhaseScheme::FourPhase)
        .value("EightPhase", PhaseScheme::EightPhase);
    py::enum_<LaneLayout>(m, "LaneLayout")
        .value("Exclusive", LaneLayout::Exclusive)
        .value("Shared", LaneLayout::Shared);
    py::enum_<StateKind>(m, "StateKind")
        .value("NV", StateKind::NV)
        .value("PressureNV", StateKind::PressureNV)
        .value("PressureQueue", StateKind::PressureQueue)
        .value("EfficientPressure", StateKind::EfficientPressure);
    py::enum_<RewardKind>(m, "RewardKind")
        .value("NegIntersectionPressure", RewardKind::NegIntersectionPressure)
        .value("NegQueueLength", RewardKind::NegQueueLength);
    py::enum_<ControllerKind>(m, "ControllerKind")
        .value("FixedTime", ControllerKind::FixedTime)
        .value("MaxPressure", ControllerKind::MaxPressure)
        .value("EfficientMaxPressure", ControllerKind::EfficientMaxPressure)
        .value("QLearning", ControllerKind::QLearning);

    // Network

    py::class_<RoadNetwork, NetworkPtr>(m, "RoadNetwork")
        .def_property_readonly("phase_scheme", [](const RoadNetwork& n) { return n.phase_scheme; })
        .def_property_readonly("num_intersections", [](const RoadNetwork& n) { return n.intersections.size(); })
        .def_property_readonly("num_roads", [](const RoadNetwork& n) { return n.roads.size(); })
        .def_property_readonly("num_lanes", [](const RoadNetwork& n) { return n.lanes.size(); })
        .def_property_readonly("intersection_names",
                               [](const RoadNetwork& n) {
                                   std::vector<std::string> out;
                                   for (const auto& i : n.intersections) out.push_back(i.name);
                                   return out;
                               })
        .def_property_readonly("road_names",
                               [](const RoadNetwork& n) {
                                   std::vector<std::string> out;
                                   for (const auto& r : n.roads) out.push_back(r.name);
                                   return out;
                               })
        .def(
            "find_road",
            [](const RoadNetwork& n, const std::string& name) -> std::optional<int> {
                if (auto r = n.find_road(name)) return r->value;
                return std::nullopt;
            },
            py::arg("name"))
        .def(
            "find_intersection",
            [](const RoadNetwork& n, const std::string& name) -> std::optional<int> {
                if (auto i = n.find_intersection(name)) return i->value;
                return std::nullopt;
            },
            py::arg("name"))
        .def(
            "road_lanes",
            [](const RoadNetwork& n, int road) {
                if (road < 0 || static_cast<std::size_t>(road) >= n.roads.size())
                    throw py::index_error("road index out of range");
                return ids(n.road(RoadId{road}).lanes);
            },
            py::arg("road"))
        .def(
            "lane_designation",
            [](const RoadNetwork& n, int lane) { return designation_string(n.lane(checked_lane(n, lane)).designation); },
            py::arg("lane"), "Permitted turns as a string over L, T, R.")
        .def(
            "phase_labels",
            [](const RoadNetwork& n, int i) {
                std::vector<std::string> out;
                for (const auto& p : n.intersection(checked_intersection(n, i)).phases) out.push_back(p.label);
                return out;
            },
            py::arg("intersection"))
        .def(
            "movements",
            [](const RoadNetwork& n, int i) {
                py::list out;
                for (const auto& mv : n.intersection(checked_intersection(n, i)).movements) {
                    py::dict d;
                    d["id"] = mv.id;
                    d["approach"] = mv.approach;
                    d["turn"] = mv.turn;
                    d["in_road"] = n.road(mv.in_road).name;
                    d["out_road"] = n.road(mv.out_road).name;
                    d["entering"] = ids(mv.entering);
                    d["exiting"] = ids(mv.exiting);
                    out.append(d);
                }
                return out;
            },
            py::arg("intersection"))
        .def(
            "validate",
            [](const RoadNetwork& n) {
                std::vector<std::string> out;
                for (const auto& v : validate(n)) out.push_back(v.entity + ": " + v.message);
                return out;
            },
            "Broken structural invariants; empty for a well-formed network.")
        .def("with_phase_scheme",
             [](const RoadNetwork& n, PhaseScheme s) { return std::make_shared<RoadNetwork>(with_phase_scheme(n, s)); })
        .def("to_json", [](const RoadNetwork& n) { return network_to_json(n).dump(2); })
        .def_static(
            "from_json",
            [](const std::string& text) {
                return std::make_shared<RoadNetwork>(network_from_json(nlohmann::json::parse(text)));
            },
            py::arg("text"))
        .def("save", [](const RoadNetwork& n, const std::filesystem::path& p) { save_network(p, n); }, py::arg("path"));

    m.def(
        "build_grid",
        [](int rows, int cols, double ew_length_m, double sn_length_m, PhaseScheme scheme, LaneLayout layout,
           double speed_mps) {
            GridOptions o;
            o.layout = layout;
            o.speed_mps = speed_mps;
            return std::make_shared<RoadNetwork>(build_grid(rows, cols, ew_length_m, sn_length_m, scheme, o));
        },
        py::arg("rows"), py::arg("cols"), py::arg("ew_length_m") = 300.0, py::arg("sn_length_m") = 300.0,
        py::arg("scheme") = PhaseScheme::FourPhase, py::arg("layout") = LaneLayout::Exclusive,
        py::arg("speed_mps") = 10.0);
    m.def("load_network", [](const std::filesystem::path& p) { return std::make_shared<RoadNetwork>(load_network(p)); },
          py::arg("path"));

    // Demand

    py::class_<FlowSpec>(m, "FlowSpec")
        .def(py::init<>())
        .def(py::init([](const RoadNetwork& net, const std::vector<std::string>& roads, double start_s, double end_s,
                         double headway_s) {
                 FlowSpec f;
                 for (const auto& name : roads) {
                     auto r = net.find_road(name);
                     if (!r) throw ConfigError("unknown road '" + name + "'");
                     f.route.push_back(*r);
                 }
                 f.start_s = start_s;
                 f.end_s = end_s;
                 f.headway_s = headway_s;
                 compile_route(net, f);
                 return f;
             }),
             py::arg("network"), py::arg("roads"), py::arg("start_s"), py::arg("end_s"), py::arg("headway_s"))
        .def_property(
            "route",
            [](const FlowSpec& f) {
                std::vector<int> out;
                for (RoadId r : f.route) out.push_back(r.value);
                return out;
            },
            [](FlowSpec& f, const std::vector<int>& roads) {
                f.route.clear();
                for (int r : roads) f.route.emplace_back(r);
            })
        .def_readwrite("start_s", &FlowSpec::start_s)
        .def_readwrite("end_s", &FlowSpec::end_s)
        .def_readwrite("headway_s", &FlowSpec::headway_s);

    py::class_<UniformDemand>(m, "UniformDemand")
        .def(py::init([](double rate) { return UniformDemand{rate}; }), py::arg("rate") = 0.1)
        .def_readwrite("rate", &UniformDemand::rate);
    py::class_<AsymmetricDemand>(m, "AsymmetricDemand")
        .def(py::init([](double major, double minor) { return AsymmetricDemand{major, minor}; }),
             py::arg("major_rate") = 0.2, py::arg("minor_rate") = 0.05)
        .def_readwrite("major_rate", &AsymmetricDemand::major_rate)
        .def_readwrite("minor_rate", &AsymmetricDemand::minor_rate);
    py::class_<PeakedDemand>(m, "PeakedDemand")
        .def(py::init([](double base, double peak, double ws, double we) { return PeakedDemand{base, peak, ws, we}; }),
             py::arg("base") = 0.05, py::arg("peak") = 0.2, py::arg("window_start") = 1200.0,
             py::arg("window_end") = 2400.0)
        .def_readwrite("base", &PeakedDemand::base)
        .def_readwrite("peak", &PeakedDemand::peak)
        .def_readwrite("window_start", &PeakedDemand::window_start)
        .def_readwrite("window_end", &PeakedDemand::window_end);

    m.def(
        "generate_demand",
        [](const RoadNetwork& net, const DemandProfile& profile, std::uint64_t seed, double end_s,
           double saturation_headway) {
            DemandOptions o;
            o.end_s = end_s;
            o.saturation_headway = saturation_headway;
            return generate_synthetic_demand(net, profile, seed, o);
        },
        py::arg("network"), py::arg("profile"), py::arg("seed") = 0, py::arg("end_s") = 3600.0,
        py::arg("saturation_headway") = 2.0);
    m.def("load_flows", &load_flows, py::arg("path"), py::arg("network"));
    m.def("save_flows", &save_flows, py::arg("path"), py::arg("network"), py::arg("flows"));
    m.def(
        "flows_to_json",
        [](const RoadNetwork& net, const std::vector<FlowSpec>& flows) { return flows_to_json(net, flows).dump(2); },
        py::arg("network"), py::arg("flows"));
    m.def(
        "flows_from_json",
        [](const RoadNetwork& net, const std::string& text) {
            return flows_from_json(net, nlohmann::json::parse(text));
        },
        py::arg("network"), py::arg("text"));

    // Simulation

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("tick", &SimConfig::tick)
        .def_readwrite("yellow", &SimConfig::yellow)
        .def_readwrite("all_red", &SimConfig::all_red)
        .def_readwrite("saturation_headway", &SimConfig::saturation_headway)
        .def_readwrite("lane_capacity", &SimConfig::lane_capacity)
        .def_readwrite("episode_length", &SimConfig::episode_length)
        .def_readwrite("seed", &SimConfig::seed)
        .def("check", &SimConfig::check)
        .def_static(
            "from_json", [](const std::string& text) { return sim_config_from_json(nlohmann::json::parse(text)); },
            py::arg("text"))
        .def("to_json", [](const SimConfig& c) { return sim_config_to_json(c).dump(2); });

    py::class_<PressureReport>(m, "PressureReport")
        .def_property_readonly("intersection", [](const PressureReport& r) { return r.intersection.value; })
        .def_readonly("movement_pressure", &PressureReport::movement_pressure)
        .def_readonly("movement_ep", &PressureReport::movement_ep)
        .def_readonly("phase_pressure", &PressureReport::phase_pressure)
        .def_readonly("phase_ep", &PressureReport::phase_ep)
        .def_readonly("intersection_pressure", &PressureReport::intersection_pressure);

    m.def("movement_pressure", &movement_pressure, py::arg("x_l"), py::arg("x_m"));
    m.def("phase_pressure", &phase_pressure, py::arg("p1"), py::arg("p2"));
    m.def(
        "efficient_pressure",
        [](const std::vector<int>& entering, const std::vector<int>& exiting) {
            return efficient_pressure(entering, exiting);
        },
        py::arg("entering"), py::arg("exiting"));
    m.def("mp_decide", &mp_decide, py::arg("report"));
    m.def("efficient_mp_decide", &efficient_mp_decide, py::arg("report"));

    py::class_<RunReport>(m, "RunReport")
        .def_readonly("scenario", &RunReport::scenario)
        .def_readonly("controller", &RunReport::controller)
        .def_readonly("sweep", &RunReport::sweep)
        .def_readonly("seed", &RunReport::seed)
        .def_readonly("average_travel_time", &RunReport::average_travel_time)
        .def_readonly("travel_time_warning", &RunReport::travel_time_warning)
        .def_readonly("demand", &RunReport::demand)
        .def_readonly("spawned", &RunReport::spawned)
        .def_readonly("throughput", &RunReport::throughput)
        .def_readonly("unfinished", &RunReport::unfinished)
        .def_readonly("blocked_spawns", &RunReport::blocked_spawns)
        .def_readonly("max_total_queue", &RunReport::max_total_queue)
        .def_readonly("decisions", &RunReport::decisions)
        .def_readonly("episodes_averaged", &RunReport::episodes_averaged)
        .def_readonly("wall_time", &RunReport::wall_time)
        .def("__repr__", [](const RunReport& r) {
            std::ostringstream os;
            os << "RunReport(controller='" << r.controller << "', average_travel_time=" << r.average_travel_time
               << ", throughput=" << r.throughput << ")";
            return os.str();
        });

    // Only valid inside Controller.decide.
    py::class_<Observation>(m, "Observation")
        .def_property_readonly("intersection", [](const Observation& o) { return o.intersection.value; })
        .def_readonly("current_phase", &Observation::current_phase)
        .def_property_readonly("clock", [](const Observation& o) { return o.state.clock; })
        .def_property_readonly("num_phases",
                               [](const Observation& o) { return o.network.intersection(o.intersection).phases.size(); })
        .def("queue", [](const Observation& o, int lane) { return o.state.queue(checked_lane(o.network, lane)); })
        .def("pressure", [](const Observation& o) { return pressure_report(o.state, o.network, o.intersection); })
        .def(
            "state_vector",
            [](const Observation& o, StateKind kind) {
                return extract_state(o.state, o.network, o.intersection, kind).flatten();
            },
            py::arg("kind") = StateKind::EfficientPressure);

    py::class_<Controller, PyController>(m, "Controller", "Subclass and implement name, t_duration and decide.")
        .def(py::init<>())
        .def("name", &Controller::name)
        .def("t_duration", &Controller::t_duration)
        .def("decide", &Controller::decide, py::arg("observation"))
        .def("begin_episode", &Controller::begin_episode)
        .def("end_episode", &Controller::end_episode);

    py::class_<FixedTimeController, Controller>(m, "FixedTimeController")
        .def(py::init([](double t, std::optional<PhaseScheme> s) { return FixedTimeController(control_config(t, s)); }),
             py::arg("t_duration") = 15.0, py::arg("scheme") = py::none());
    py::class_<MaxPressureController, Controller>(m, "MaxPressureController")
        .def(py::init([](double t, std::optional<PhaseScheme> s) { return MaxPressureController(control_config(t, s)); }),
             py::arg("t_duration") = 15.0, py::arg("scheme") = py::none());
    py::class_<EfficientMaxPressureController, Controller>(m, "EfficientMaxPressureController")
        .def(py::init([](double t, std::optional<PhaseScheme> s) {
                 return EfficientMaxPressureController(control_config(t, s));
             }),
             py::arg("t_duration") = 15.0, py::arg("scheme") = py::none());

    py::class_<Simulation>(m, "Simulation")
        .def(py::init([](NetworkPtr net, std::vector<FlowSpec> flows, SimConfig config) {
                 return Simulation(std::move(net), std::move(flows), config);
             }),
             py::arg("network"), py::arg("flows"), py::arg("config") = SimConfig{})
        .def_property_readonly("network", [](const Simulation& s) { return mutable_ptr(s.network_ptr()); })
        .def_property_readonly("config", &Simulation::config)
        .def_property_readonly("clock", [](const Simulation& s) { return s.state().clock; })
        .def("done", &Simulation::done)
        .def("reset", &Simulation::reset)
        .def("step", &Simulation::step, py::arg("controller").none(true) = nullptr)
        .def("run", &Simulation::run, py::arg("controller").none(true) = nullptr)
        .def(
            "set_phase",
            [](Simulation& s, int i, int phase) { return s.set_phase(checked_intersection(s.network(), i), phase); },
            py::arg("intersection"), py::arg("phase"))
        .def(
            "active_phase",
            [](const Simulation& s, int i) {
                return s.state().signals[checked_intersection(s.network(), i).index()].active_phase;
            },
            py::arg("intersection"))
        .def(
            "in_transition",
            [](const Simulation& s, int i) {
                return s.state().signals[checked_intersection(s.network(), i).index()].in_transition();
            },
            py::arg("intersection"))
        .def(
            "queue", [](const Simulation& s, int lane) { return s.state().queue(checked_lane(s.network(), lane)); },
            py::arg("lane"))
        .def("queues",
             [](const Simulation& s) {
                 std::vector<int> out;
                 for (const auto& q : s.state().lane_queues) out.push_back(static_cast<int>(q.size()));
                 return out;
             })
        .def("total_queue", [](const Simulation& s) { return s.state().total_queue(); })
        .def("counters",
             [](const Simulation& s) {
                 const auto& c = s.state().counters;
                 py::dict d;
                 d["demanded"] = c.demanded;
                 d["spawned"] = c.spawned;
                 d["blocked"] = c.blocked;
                 d["finished"] = c.finished;
                 d["decisions"] = c.decisions;
                 d["max_total_queue"] = c.max_total_queue;
                 return d;
             })
        .def(
            "pressure_report",
            [](const Simulation& s, int i) {
                return pressure_report(s.state(), s.network(), checked_intersection(s.network(), i));
            },
            py::arg("intersection"))
        .def(
            "intersection_pressure",
            [](const Simulation& s, int i) {
                return intersection_pressure(s.state(), s.network(), checked_intersection(s.network(), i));
            },
            py::arg("intersection"))
        .def(
            "state_vector",
            [](const Simulation& s, int i, StateKind kind) {
                return extract_state(s.state(), s.network(), checked_intersection(s.network(), i), kind).flatten();
            },
            py::arg("intersection"), py::arg("kind") = StateKind::EfficientPressure)
        .def(
            "reward",
            [](const Simulation& s, int i, RewardKind kind) {
                return reward(s.state(), s.network(), checked_intersection(s.network(), i), kind);
            },
            py::arg("intersection"), py::arg("kind") = RewardKind::NegIntersectionPressure)
        .def("report", &summarize)
        .def("check_invariants", &Simulation::check_invariants)
        .def("digest", &Simulation::digest);

    // Learning

    py::class_<QLearnerConfig>(m, "QLearnerConfig")
        .def(py::init<>())
        .def_readwrite("gamma", &QLearnerConfig::gamma)
        .def_readwrite("learning_rate", &QLearnerConfig::learning_rate)
        .def_readwrite("epsilon_start", &QLearnerConfig::epsilon_start)
        .def_readwrite("epsilon_end", &QLearnerConfig::epsilon_end)
        .def_readwrite("epsilon_decay", &QLearnerConfig::epsilon_decay)
        .def_readwrite("buffer_capacity", &QLearnerConfig::buffer_capacity)
        .def_readwrite("batch_size", &QLearnerConfig::batch_size)
        .def_readwrite("hidden_sizes", &QLearnerConfig::hidden_sizes)
        .def_readwrite("target_sync_interval", &QLearnerConfig::target_sync_interval)
        .def_readwrite("episodes", &QLearnerConfig::episodes)
        .def_readwrite("eval_episodes", &QLearnerConfig::eval_episodes)
        .def_readwrite("state_kind", &QLearnerConfig::state_kind)
        .def_readwrite("reward_kind", &QLearnerConfig::reward_kind)
        .def_readwrite("shared_parameters", &QLearnerConfig::shared_parameters)
        .def_readwrite("greedy_eval", &QLearnerConfig::greedy_eval)
        .def_readwrite("feature_scale", &QLearnerConfig::feature_scale)
        .def_readwrite("reward_scale", &QLearnerConfig::reward_scale)
        .def_readwrite("seed", &QLearnerConfig::seed)
        .def("check", &QLearnerConfig::check);

    py::class_<QFunction>(m, "QFunction")
        .def(py::init([](std::size_t inputs, const std::vector<std::size_t>& hidden, std::size_t outputs,
                         std::uint64_t seed) { return QFunction(inputs, hidden, outputs, seed); }),
             py::arg("inputs"), py::arg("hidden"), py::arg("outputs"), py::arg("seed") = 0)
        .def_property_readonly("input_size", &QFunction::input_size)
        .def_property_readonly("output_size", &QFunction::output_size)
        .def_property_readonly("parameter_count", &QFunction::parameter_count)
        .def(
            "__call__",
            [](const QFunction& q, const std::vector<double>& s) {
                if (s.size() != q.input_size()) throw ConfigError("input has the wrong size");
                const Eigen::VectorXd out = q.forward(s);
                return std::vector<double>(out.data(), out.data() + out.size());
            },
            py::arg("state"))
        .def("parameters", &QFunction::parameters)
        .def("set_parameters", [](QFunction& q, const std::vector<double>& v) { q.set_parameters(v); })
        .def(
            "save",
            [](const QFunction& q, const std::filesystem::path& p) {
                std::ofstream os(p);
                if (!os) throw ConfigError("cannot write " + p.string());
                q.save(os);
            },
            py::arg("path"))
        .def_static(
            "load",
            [](const std::filesystem::path& p) {
                std::ifstream is(p);
                if (!is) throw ConfigError("cannot read " + p.string());
                return QFunction::load(is);
            },
            py::arg("path"));

    py::class_<QLearningAgent, Controller>(m, "QLearningAgent")
        .def(py::init([](const RoadNetwork& net, QLearnerConfig rl, double t_duration) {
                 return std::make_unique<QLearningAgent>(net, rl, control_config(t_duration, std::nullopt));
             }),
             py::arg("network"), py::arg("config") = QLearnerConfig{}, py::arg("t_duration") = 15.0)
        .def_property("epsilon", &QLearningAgent::epsilon, &QLearningAgent::set_epsilon)
        .def("set_learning", &QLearningAgent::set_learning, py::arg("learning"))
        .def_property_readonly("model_count", &QLearningAgent::model_count)
        .def(
            "model", [](const QLearningAgent& a, std::size_t k) { return a.q_function(k); }, py::arg("index"))
        .def(
            "set_model",
            [](QLearningAgent& a, std::size_t k, const QFunction& q) {
                auto& slot = a.q_function(k);
                if (slot.input_size() != q.input_size() || slot.output_size() != q.output_size() ||
                    slot.parameter_count() != q.parameter_count())
                    throw ConfigError("model shape does not match the agent");
                slot = q;
            },
            py::arg("index"), py::arg("model"))
        .def_property_readonly("episode_reward", &QLearningAgent::episode_reward);

    py::class_<TrainResult>(m, "TrainResult")
        .def_readonly("models", &TrainResult::models)
        .def_readonly("episodes", &TrainResult::episodes)
        .def_readonly("episode_rewards", &TrainResult::episode_rewards)
        .def_readonly("evaluation", &TrainResult::evaluation)
        .def_readonly("error", &TrainResult::error);

    m.def(
        "train",
        [](NetworkPtr net, const std::vector<FlowSpec>& flows, const SimConfig& sim, const QLearnerConfig& config,
           double t_duration) {
            const ControllerConfig control = control_config(t_duration, std::nullopt);
            py::gil_scoped_release release;
            return train(std::move(net), flows, sim, control, config);
        },
        py::arg("network"), py::arg("flows"), py::arg("sim") = SimConfig{}, py::arg("config") = QLearnerConfig{},
        py::arg("t_duration") = 15.0);
    m.def("epsilon_for_episode", &epsilon_for_episode, py::arg("config"), py::arg("episode"));

    // Experiments

    py::class_<ControllerSpec>(m, "ControllerSpec")
        .def(py::init([](ControllerKind kind, std::string label, double t_duration, std::optional<PhaseScheme> scheme,
                         QLearnerConfig rl) {
                 ControllerSpec s;
                 s.kind = kind;
                 s.label = std::move(label);
                 s.control = control_config(t_duration, scheme);
                 s.rl = std::move(rl);
                 return s;
             }),
             py::arg("kind"), py::arg("label") = "", py::arg("t_duration") = 15.0, py::arg("scheme") = py::none(),
             py::arg("rl") = QLearnerConfig{})
        .def_readwrite("label", &ControllerSpec::label)
        .def_readwrite("kind", &ControllerSpec::kind)
        .def_readwrite("rl", &ControllerSpec::rl)
        .def_property(
            "pretrained", [](const ControllerSpec& s) -> std::optional<QFunction> {
                if (s.pretrained) return *s.pretrained;
                return std::nullopt;
            },
            [](ControllerSpec& s, const std::optional<QFunction>& q) {
                s.pretrained = q ? std::make_shared<const QFunction>(*q) : nullptr;
            });

    py::class_<Scenario>(m, "Scenario")
        .def(py::init([](std::string id, NetworkPtr net, SimConfig sim, std::vector<FlowSpec> flows,
                         std::optional<DemandProfile> profile) {
                 Scenario s;
                 s.id = std::move(id);
                 s.network = std::move(net);
                 s.sim = sim;
                 s.flows = std::move(flows);
                 s.profile = std::move(profile);
                 return s;
             }),
             py::arg("id"), py::arg("network"), py::arg("sim") = SimConfig{},
             py::arg("flows") = std::vector<FlowSpec>{}, py::arg("profile") = py::none())
        .def_readwrite("id", &Scenario::id)
        .def_property(
            "network", [](const Scenario& s) { return mutable_ptr(s.network); },
            [](Scenario& s, NetworkPtr n) { s.network = std::move(n); })
        .def_readwrite("sim", &Scenario::sim)
        .def_readwrite("flows", &Scenario::flows)
        .def_readwrite("profile", &Scenario::profile);

    py::class_<SweepSpec>(m, "SweepSpec")
        .def(py::init([](std::string p, std::vector<std::string> v) { return SweepSpec{std::move(p), std::move(v)}; }),
             py::arg("parameter"), py::arg("values"))
        .def_readwrite("parameter", &SweepSpec::parameter)
        .def_readwrite("values", &SweepSpec::values);

    py::class_<ExperimentPlan>(m, "ExperimentPlan")
        .def(py::init<>())
        .def_readwrite("scenarios", &ExperimentPlan::scenarios)
        .def_readwrite("controllers", &ExperimentPlan::controllers)
        .def_readwrite("seeds", &ExperimentPlan::seeds)
        .def_readwrite("sweep", &ExperimentPlan::sweep)
        .def_readwrite("output_dir", &ExperimentPlan::output_dir)
        .def_readwrite("parallelism", &ExperimentPlan::parallelism);

    py::class_<CellResult>(m, "CellResult")
        .def_property_readonly("scenario", [](const CellResult& c) { return c.cell.scenario; })
        .def_property_readonly("controller", [](const CellResult& c) { return c.cell.controller; })
        .def_property_readonly("sweep_point", [](const CellResult& c) { return c.cell.sweep_point; })
        .def_property_readonly("seed", [](const CellResult& c) { return c.cell.seed; })
        .def_readonly("report", &CellResult::report)
        .def_readonly("episodes", &CellResult::episodes)
        .def_readonly("models", &CellResult::models)
        .def_readonly("error", &CellResult::error);

    py::class_<ExperimentResult>(m, "ExperimentResult")
        .def_readonly("cells", &ExperimentResult::cells)
        .def("ok", &ExperimentResult::ok);

    py::class_<SummaryTable>(m, "SummaryTable")
        .def_readonly("rows", &SummaryTable::rows)
        .def_readonly("columns", &SummaryTable::columns)
        .def_readonly("mean", &SummaryTable::mean)
        .def_readonly("delta", &SummaryTable::delta)
        .def("__str__", [](const SummaryTable& t) {
            std::ostringstream os;
            print_summary(os, t);
            return os.str();
        });

    m.def(
        "run_experiment",
        [](const ExperimentPlan& plan) {
            py::gil_scoped_release release;
            return run_experiment(plan);
        },
        py::arg("plan"));
    m.def("summarize_experiment", &summarize_experiment, py::arg("plan"), py::arg("cells"));
    m.def("format_summary_value", &format_summary_value, py::arg("mean"), py::arg("delta") = py::none());
}
