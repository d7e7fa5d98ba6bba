#include <doctest.h>

#include <array>
#include <cmath>
#include <set>
#include <sstream>

#include "epsim/rl.hpp"
#include "support/scenarios.hpp"

using namespace epsim;
using namespace epsim::testing;

namespace {

/// Linear model whose output is exactly `values` for the input [1].
QFunction constant_q(const std::vector<double>& values) {
    QFunction q(1, std::span<const std::size_t>{}, values.size(), 0);
    auto& layer = q.layers()[0];
    layer.weights.setZero();
    for (std::size_t k = 0; k < values.size(); ++k) layer.bias[static_cast<Eigen::Index>(k)] = values[k];
    return q;
}

QLearnerConfig toy_config() {
    QLearnerConfig c;
    c.learning_rate = 1e-2;
    c.hidden_sizes = {16};
    c.batch_size = 4;
    c.buffer_capacity = 4;
    return c;
}

}  // namespace

TEST_CASE("act is greedy at epsilon zero with lowest-index ties") {
    std::mt19937_64 rng(0);
    const std::vector<double> s{1.0};
    CHECK(act(constant_q({1, 5, 2, 0}), s, 0.0, rng) == 1);
    CHECK(act(constant_q({2, 2, 1, 0}), s, 0.0, rng) == 0);
}

TEST_CASE("act is uniform at epsilon one") {
    std::mt19937_64 rng(17);
    const std::vector<double> s{1.0};
    const QFunction q = constant_q({9, 0, 0, 0});
    std::array<int, 4> counts{};
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) ++counts[static_cast<std::size_t>(act(q, s, 1.0, rng))];
    double chi2 = 0.0;
    const double expected = draws / 4.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 3 degrees of freedom; 14.16 is the 99.73% quantile (3 sigma).
    CHECK(chi2 < 14.16);
}

TEST_CASE("myopic target converges to the reward") {
    QLearnerConfig cfg = toy_config();
    cfg.gamma = 0.0;
    cfg.batch_size = 1;
    QFunction q(3, cfg.hidden_sizes, 2, 1);
    QFunction target = q;
    AdamOptimizer opt(q, cfg.learning_rate);
    const Experience t{{0.3, -0.2, 0.5}, 1, 7.0, {0.1, 0.1, 0.1}, false};
    for (int k = 0; k < 4000; ++k) learn_step(q, target, opt, std::span<const Experience>(&t, 1), cfg);
    CHECK(std::abs(q.forward(t.s)[1] - 7.0) < 1e-3);
}

TEST_CASE("terminal transitions do not bootstrap") {
    QLearnerConfig cfg = toy_config();
    cfg.gamma = 0.9;
    cfg.batch_size = 1;
    QFunction q(2, cfg.hidden_sizes, 2, 2);
    // Target network answering 100 everywhere: any bootstrap would dominate the reward.
    QFunction big(2, std::span<const std::size_t>{}, 2, 3);
    big.layers()[0].weights.setZero();
    big.layers()[0].bias.setConstant(100.0);
    AdamOptimizer opt(q, cfg.learning_rate);
    const Experience t{{1.0, 0.0}, 0, 2.0, {0.0, 1.0}, true};
    for (int k = 0; k < 4000; ++k) learn_step(q, big, opt, std::span<const Experience>(&t, 1), cfg);
    CHECK(std::abs(q.forward(t.s)[0] - 2.0) < 1e-3);

    // The same transition without the terminal flag chases r + gamma * 100.
    QFunction q2(2, cfg.hidden_sizes, 2, 2);
    AdamOptimizer opt2(q2, cfg.learning_rate);
    Experience open = t;
    open.terminal = false;
    for (int k = 0; k < 6000; ++k) learn_step(q2, big, opt2, std::span<const Experience>(&open, 1), cfg);
    CHECK(std::abs(q2.forward(t.s)[0] - 92.0) < 0.5);
}

TEST_CASE("two-state MDP matches value iteration") {
    // s0 --a0--> s0 (r=1), s0 --a1--> s1 (r=0), s1 --a0--> s0 (r=0), s1 --a1--> s1 (r=2).
    const double gamma = 0.9;
    const int next[2][2] = {{0, 1}, {0, 1}};
    const double rew[2][2] = {{1, 0}, {0, 2}};
    double qstar[2][2] = {};
    for (int it = 0; it < 2000; ++it) {
        double nq[2][2];
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a) {
                const int n = next[s][a];
                nq[s][a] = rew[s][a] + gamma * std::max(qstar[n][0], qstar[n][1]);
            }
        std::copy(&nq[0][0], &nq[0][0] + 4, &qstar[0][0]);
    }

    QLearnerConfig cfg = toy_config();
    cfg.gamma = gamma;
    const std::vector<double> one_hot[2] = {{1.0, 0.0}, {0.0, 1.0}};
    std::vector<Experience> batch;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) batch.push_back({one_hot[s], a, rew[s][a], one_hot[next[s][a]], false});
    QFunction q(2, cfg.hidden_sizes, 2, 5);
    QFunction target = q;
    AdamOptimizer opt(q, cfg.learning_rate);
    for (int k = 1; k <= 30000; ++k) {
        learn_step(q, target, opt, batch, cfg);
        if (k % 100 == 0) target = q;
    }
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) {
            const double learned = q.forward(one_hot[s])[a];
            CHECK(std::abs(learned - qstar[s][a]) <= 0.05 * std::abs(qstar[s][a]));
        }
}

TEST_CASE("analytic gradients match finite differences") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int draw = 0; draw < 20; ++draw) {
        const std::vector<std::size_t> hidden{32, 32};
        const QFunction q(10, hidden, 4, static_cast<std::uint64_t>(draw));
        std::vector<double> s(10);
        for (double& x : s) x = n(rng);
        CHECK(gradient_check(q, s, draw % 4, n(rng)) < 1e-4);
    }
    const QFunction linear(6, std::span<const std::size_t>{}, 3, 1);
    const std::vector<double> s{0.5, -1.0, 2.0, 0.0, 1.5, -0.5};
    CHECK(gradient_check(linear, s, 2, 1.0) < 1e-6);
}

TEST_CASE("loss gradient agrees with itself on a frozen seed") {
    const std::vector<std::size_t> hidden{8};
    const QFunction q(4, hidden, 2, 42);
    Eigen::MatrixXd x(4, 1);
    x << 0.1, 0.2, -0.3, 0.4;
    const std::vector<int> a{1};
    const std::vector<double> t{0.5};
    std::vector<QFunction::Layer> g1, g2;
    q.loss(x, a, t, &g1);
    q.loss(x, a, t, &g2);
    for (std::size_t k = 0; k < g1.size(); ++k) {
        CHECK((g1[k].weights - g2[k].weights).norm() == 0.0);
        CHECK((g1[k].bias - g2[k].bias).norm() == 0.0);
    }
}

TEST_CASE("replay buffer evicts the oldest and samples without replacement") {
    ReplayBuffer buf(5);
    for (int k = 0; k < 12; ++k) {
        buf.push(Experience{{static_cast<double>(k)}, 0, 0.0, {0.0}, false});
        CHECK(buf.size() <= 5);
    }
    CHECK(buf.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) CHECK(buf.at(k).s[0] == static_cast<double>(7 + k));
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 100; ++trial) {
        const auto batch = buf.sample(5, rng);
        std::set<const Experience*> unique(batch.begin(), batch.end());
        CHECK(unique.size() == 5);
    }
    CHECK_THROWS(buf.sample(6, rng));
}

TEST_CASE("epsilon schedule") {
    QLearnerConfig c;
    c.episodes = 100;
    double prev = 2.0;
    for (int e = 0; e < 100; ++e) {
        const double eps = epsilon_for_episode(c, e);
        CHECK(eps <= prev);
        prev = eps;
    }
    CHECK(epsilon_for_episode(c, 0) == c.epsilon_start);
    CHECK(epsilon_for_episode(c, 99) == doctest::Approx(c.epsilon_end));
    CHECK(epsilon_for_episode(c, 80) == doctest::Approx(c.epsilon_end));
}

TEST_CASE("config validation") {
    QLearnerConfig c;
    CHECK_NOTHROW(c.check());
    c.gamma = 1.0;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = QLearnerConfig{};
    c.batch_size = c.buffer_capacity + 1;
    CHECK_THROWS_AS(c.check(), ConfigError);
    c = QLearnerConfig{};
    c.epsilon_end = 0.5;
    c.epsilon_start = 0.2;
    CHECK_THROWS_AS(c.check(), ConfigError);
}

TEST_CASE("parameters save and load losslessly") {
    const std::vector<std::size_t> hidden{7, 5};
    const QFunction q(9, hidden, 4, 3);
    std::stringstream ss;
    q.save(ss);
    const QFunction back = QFunction::load(ss);
    CHECK(back.parameters() == q.parameters());
    CHECK(back.input_size() == 9);
    CHECK(back.output_size() == 4);
    std::stringstream bad("not a model");
    CHECK_THROWS(QFunction::load(bad));

    QFunction copy(9, hidden, 4, 99);
    copy.set_parameters(q.parameters());
    const std::vector<double> s(9, 0.25);
    CHECK(copy.forward(s) == q.forward(s));
}

TEST_CASE("non-finite loss raises a divergence error") {
    QLearnerConfig cfg = toy_config();
    cfg.batch_size = 1;
    QFunction q(2, cfg.hidden_sizes, 2, 0);
    QFunction target = q;
    AdamOptimizer opt(q, cfg.learning_rate);
    const Experience t{{1.0, 0.0}, 0, std::nan(""), {0.0, 1.0}, false};
    CHECK_THROWS_AS(learn_step(q, target, opt, std::span<const Experience>(&t, 1), cfg), TrainingDivergence);
}

TEST_CASE("one random episode fills the buffer and reports") {
    const Scenario s = single_intersection(600);
    QLearnerConfig cfg;
    cfg.episodes = 1;
    cfg.epsilon_start = 1.0;
    cfg.epsilon_end = 1.0;
    cfg.eval_episodes = 1;
    const auto flows = flows_for(s, 0);
    QLearningAgent agent(*s.network, cfg);
    Simulation sim(s.network, flows, s.sim);
    agent.begin_episode(*s.network);
    sim.run(&agent);
    agent.end_episode();
    CHECK(agent.buffer(0).size() > 0);
    CHECK(agent.buffer(0).size() == static_cast<std::size_t>(sim.state().counters.decisions - 1));

    const TrainResult r = train(s.network, flows, s.sim, ControllerConfig{}, cfg);
    CHECK_FALSE(r.error);
    CHECK(r.episodes.size() == 1);
    CHECK(r.evaluation.spawned > 0);
}

TEST_CASE("training is reproducible under a fixed seed") {
    const Scenario s = single_intersection(900);
    QLearnerConfig cfg;
    cfg.episodes = 4;
    cfg.eval_episodes = 2;
    const auto flows = flows_for(s, 1);
    const TrainResult a = train(s.network, flows, s.sim, ControllerConfig{}, cfg);
    const TrainResult b = train(s.network, flows, s.sim, ControllerConfig{}, cfg);
    CHECK(a.episode_rewards == b.episode_rewards);
    CHECK(a.models[0].parameters() == b.models[0].parameters());
    cfg.seed = 5;
    const TrainResult c = train(s.network, flows, s.sim, ControllerConfig{}, cfg);
    CHECK(c.models[0].parameters() != a.models[0].parameters());
}

TEST_CASE("frozen greedy agent is a deterministic controller") {
    const Scenario s = single_intersection(900);
    QLearnerConfig cfg;
    const auto flows = flows_for(s, 0);
    std::uint64_t digests[2];
    for (int rep = 0; rep < 2; ++rep) {
        QLearningAgent agent(*s.network, cfg);
        agent.set_epsilon(0.0);
        agent.set_learning(false);
        Simulation sim(s.network, flows, s.sim);
        sim.run(&agent);
        digests[rep] = sim.digest();
        CHECK(agent.buffer(0).size() == 0);
    }
    CHECK(digests[0] == digests[1]);
}

TEST_CASE("per-intersection models") {
    const auto net = std::make_shared<const RoadNetwork>(build_grid(2, 2, 300, 300, PhaseScheme::FourPhase));
    QLearnerConfig cfg;
    cfg.shared_parameters = false;
    QLearningAgent agent(*net, cfg);
    CHECK(agent.model_count() == 4);
    CHECK(agent.model_of(IntersectionId{3}) == 3);
    cfg.shared_parameters = true;
    CHECK(QLearningAgent(*net, cfg).model_count() == 1);
}
