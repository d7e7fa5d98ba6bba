#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "epsim/control.hpp"
#include "epsim/metrics.hpp"
#include "epsim/pressure.hpp"
#include "epsim/sim.hpp"

namespace epsim {

class TrainingDivergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct QLearnerConfig {
    double gamma = 0.9;
    double learning_rate = 1e-3;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_decay = 0.8;  // fraction of the episodes over which epsilon decays linearly
    std::size_t buffer_capacity = 10000;
    std::size_t batch_size = 64;
    std::vector<std::size_t> hidden_sizes = {32, 32};
    std::size_t target_sync_interval = 500;  // in learning decisions; 1 = plain Bellman update
    int episodes = 200;
    int eval_episodes = 10;
    StateKind state_kind = StateKind::EfficientPressure;
    RewardKind reward_kind = RewardKind::NegIntersectionPressure;
    bool shared_parameters = true;
    bool greedy_eval = false;  // evaluate on extra epsilon = 0 episodes instead of the last training ones
    double feature_scale = 0.1;
    double reward_scale = 0.05;
    std::uint64_t seed = 0;

    void check() const;
};

/// Fully connected ReLU network mapping a state to one value per phase.
class QFunction {
public:
    struct Layer {
        Eigen::MatrixXd weights;  // outputs x inputs
        Eigen::VectorXd bias;
    };

    QFunction() = default;
    QFunction(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t outputs, std::uint64_t seed);

    std::size_t input_size() const;
    std::size_t output_size() const;
    std::size_t parameter_count() const;

    Eigen::VectorXd forward(std::span<const double> input) const;
    /// Columns are samples.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;

    /// Mean over samples of (q(s)[a] - target)^2. Writes the parameter gradient
    /// into `gradient` (same shapes as layers()) when non-null.
    double loss(const Eigen::MatrixXd& inputs, std::span<const int> actions, std::span<const double> targets,
                std::vector<Layer>* gradient = nullptr) const;

    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }

    /// Flat parameter view: per layer, row-major weights then bias.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> values);

    void save(std::ostream& os) const;
    static QFunction load(std::istream& is);

private:
    std::vector<Layer> layers_;
};

class AdamOptimizer {
public:
    AdamOptimizer() = default;
    AdamOptimizer(const QFunction& q, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                  double epsilon = 1e-8);

    void step(QFunction& q, const std::vector<QFunction::Layer>& gradient);

private:
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<QFunction::Layer> m_;
    std::vector<QFunction::Layer> v_;
};

struct Experience {
    std::vector<double> s;
    int a = 0;
    double r = 0.0;
    std::vector<double> s_next;
    bool terminal = false;
};

/// Fixed-capacity ring buffer; the oldest transition is evicted first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(Experience t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    /// k-th oldest transition.
    const Experience& at(std::size_t k) const;
    /// `n` distinct transitions chosen uniformly.
    std::vector<const Experience*> sample(std::size_t n, std::mt19937_64& rng) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // index of the oldest element once full
    std::vector<Experience> data_;
};

/// Epsilon-greedy action; greedy ties resolve to the lowest phase index.
int act(const QFunction& q, std::span<const double> s, double epsilon, std::mt19937_64& rng);

/// One optimizer step on the squared TD error against r + gamma * max target_q(s').
/// Returns the batch loss after the step.
double learn_step(QFunction& q, const QFunction& target_q, AdamOptimizer& optimizer, std::span<const Experience> batch,
                  const QLearnerConfig& config);

/// Max relative error between analytic and central-difference gradients of
/// (q(s)[a] - target)^2.
double gradient_check(const QFunction& q, std::span<const double> s, int a, double target, double step = 1e-5);

/// Exploration rate for a 0-based training episode.
double epsilon_for_episode(const QLearnerConfig& config, int episode);

/// Q-learning signal controller. Observes a state representation at each
/// decision instant, is rewarded at the following one, and learns from replay.
class QLearningAgent final : public Controller {
public:
    QLearningAgent(const RoadNetwork& net, QLearnerConfig rl, ControllerConfig control = {});

    std::string name() const override { return "rl"; }
    double t_duration() const override { return control_.t_duration; }
    int decide(const Observation& obs) override;
    void begin_episode(const RoadNetwork& net) override;
    void end_episode() override;

    void set_epsilon(double epsilon) { epsilon_ = epsilon; }
    double epsilon() const { return epsilon_; }
    void set_learning(bool learning) { learning_ = learning; }

    std::vector<double> encode(const Observation& obs) const;
    double episode_reward() const { return episode_reward_; }
    double last_loss() const { return last_loss_; }

    std::size_t model_count() const { return models_.size(); }
    const QFunction& q_function(std::size_t model) const { return models_.at(model).q; }
    QFunction& q_function(std::size_t model) { return models_.at(model).q; }
    const ReplayBuffer& buffer(std::size_t model) const { return models_.at(model).buffer; }
    std::size_t model_of(IntersectionId i) const { return models_.size() == 1 ? 0 : i.index(); }

    const QLearnerConfig& config() const { return rl_; }

private:
    struct Model {
        QFunction q;
        QFunction target;
        AdamOptimizer optimizer;
        ReplayBuffer buffer;
        std::size_t since_sync = 0;
    };
    struct Pending {
        std::vector<double> s;
        int a = 0;
        bool valid = false;
    };

    QLearnerConfig rl_;
    ControllerConfig control_;
    std::vector<Model> models_;
    std::vector<Pending> pending_;
    std::mt19937_64 rng_;
    double epsilon_ = 1.0;
    bool learning_ = true;
    double episode_reward_ = 0.0;
    double last_loss_ = 0.0;
};

struct TrainResult {
    std::vector<QFunction> models;
    std::vector<RunReport> episodes;       // one per training episode
    std::vector<double> episode_rewards;   // summed scaled rewards per training episode
    RunReport evaluation;                  // mean of the evaluation episodes
    std::optional<std::string> error;      // set when training diverged; reports are partial
};

TrainResult train(std::shared_ptr<const RoadNetwork> net, const std::vector<FlowSpec>& flows, const SimConfig& sim,
                  const ControllerConfig& control, const QLearnerConfig& config);

}  // namespace epsim
