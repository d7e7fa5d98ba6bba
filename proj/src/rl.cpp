#include "epsim/rl.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace epsim {

void QLearnerConfig::check() const {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (epsilon_end > epsilon_start) throw ConfigError("epsilon_end must not exceed epsilon_start");
    if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0) throw ConfigError("epsilon outside [0, 1]");
    if (batch_size == 0 || buffer_capacity == 0) throw ConfigError("batch size and buffer capacity must be positive");
    if (batch_size > buffer_capacity) throw ConfigError("batch size exceeds buffer capacity");
    if (target_sync_interval == 0) throw ConfigError("target sync interval must be positive");
    if (episodes < 1) throw ConfigError("episodes must be at least 1");
    if (eval_episodes < 1) throw ConfigError("eval episodes must be at least 1");
    for (std::size_t w : hidden_sizes)
        if (w == 0) throw ConfigError("hidden layer widths must be positive");
}

// ---------------------------------------------------------------------------
// QFunction

QFunction::QFunction(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t outputs,
                     std::uint64_t seed) {
    if (inputs == 0 || outputs == 0) throw ContractViolation("q-function needs inputs and outputs");
    std::mt19937_64 rng(seed);
    std::size_t fan_in = inputs;
    auto make = [&](std::size_t fan_out, double gain) {
        const double limit = gain * std::sqrt(6.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Layer layer;
        layer.weights.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(r, c) = dist(rng);
        layer.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out));
        layers_.push_back(std::move(layer));
        fan_in = fan_out;
    };
    for (std::size_t width : hidden) make(width, 1.0);
    make(outputs, 0.5);
}

std::size_t QFunction::input_size() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.front().weights.cols());
}

std::size_t QFunction::output_size() const {
    return layers_.empty() ? 0 : static_cast<std::size_t>(layers_.back().weights.rows());
}

std::size_t QFunction::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
    return n;
}

Eigen::MatrixXd QFunction::forward_batch(const Eigen::MatrixXd& inputs) const {
    Eigen::MatrixXd h = inputs;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        Eigen::MatrixXd z = layers_[k].weights * h;
        z.colwise() += layers_[k].bias;
        h = (k + 1 < layers_.size()) ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    }
    return h;
}

Eigen::VectorXd QFunction::forward(std::span<const double> input) const {
    if (input.size() != input_size()) throw ContractViolation("state size does not match the q-function input");
    const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
    return forward_batch(x);
}

double QFunction::loss(const Eigen::MatrixXd& inputs, std::span<const int> actions, std::span<const double> targets,
                       std::vector<Layer>* gradient) const {
    const Eigen::Index batch = inputs.cols();
    if (batch == 0 || actions.size() != static_cast<std::size_t>(batch) || targets.size() != actions.size())
        throw ContractViolation("loss needs one action and target per sample");

    // activations[k] is the input of layer k; activations.back() the output.
    std::vector<Eigen::MatrixXd> activations;
    activations.reserve(layers_.size() + 1);
    activations.push_back(inputs);
    for (std::size_t k = 0; k < layers_.size(); ++k) {
        Eigen::MatrixXd z = layers_[k].weights * activations.back();
        z.colwise() += layers_[k].bias;
        if (k + 1 < layers_.size()) z = z.cwiseMax(0.0);
        activations.push_back(std::move(z));
    }
    const Eigen::MatrixXd& out = activations.back();

    const double inv = 1.0 / static_cast<double>(batch);
    double total = 0.0;
    Eigen::MatrixXd delta = Eigen::MatrixXd::Zero(out.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        const int a = actions[static_cast<std::size_t>(b)];
        if (a < 0 || a >= out.rows()) throw ContractViolation("action outside the q-function output");
        const double err = out(a, b) - targets[static_cast<std::size_t>(b)];
        total += err * err;
        delta(a, b) = 2.0 * err * inv;
    }
    if (gradient != nullptr) {
        gradient->resize(layers_.size());
        for (std::size_t k = layers_.size(); k-- > 0;) {
            const Eigen::MatrixXd& input = activations[k];
            (*gradient)[k].weights = delta * input.transpose();
            (*gradient)[k].bias = delta.rowwise().sum();
            if (k > 0) {
                Eigen::MatrixXd back = layers_[k].weights.transpose() * delta;
                // input is relu(z); its derivative is 1 where the activation is positive.
                delta = back.cwiseProduct((input.array() > 0.0).cast<double>().matrix());
            }
        }
    }
    return total * inv;
}

std::vector<double> QFunction::parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    for (const auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) out.push_back(l.weights(r, c));
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
    }
    return out;
}

void QFunction::set_parameters(std::span<const double> values) {
    if (values.size() != parameter_count()) throw ContractViolation("parameter count mismatch");
    std::size_t k = 0;
    for (auto& l : layers_) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = values[k++];
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = values[k++];
    }
}

void QFunction::save(std::ostream& os) const {
    const auto old_precision = os.precision(std::numeric_limits<double>::max_digits10);
    os << "epsim-qfunction 1\n" << layers_.size() << '\n';
    for (const auto& l : layers_) {
        os << l.weights.rows() << ' ' << l.weights.cols() << '\n';
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) os << (c ? " " : "") << l.weights(r, c);
            os << '\n';
        }
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) os << (r ? " " : "") << l.bias(r);
        os << '\n';
    }
    os.precision(old_precision);
}

QFunction QFunction::load(std::istream& is) {
    std::string magic;
    int version = 0;
    std::size_t count = 0;
    if (!(is >> magic >> version >> count) || magic != "epsim-qfunction" || version != 1)
        throw ConfigError("not a q-function parameter file");
    QFunction q;
    Eigen::Index expected_cols = -1;
    for (std::size_t k = 0; k < count; ++k) {
        Eigen::Index rows = 0;
        Eigen::Index cols = 0;
        if (!(is >> rows >> cols) || rows <= 0 || cols <= 0) throw ConfigError("bad layer shape in parameter file");
        if (expected_cols >= 0 && cols != expected_cols) throw ConfigError("layer shapes do not chain");
        Layer layer;
        layer.weights.resize(rows, cols);
        layer.bias.resize(rows);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c)
                if (!(is >> layer.weights(r, c))) throw ConfigError("truncated parameter file");
        for (Eigen::Index r = 0; r < rows; ++r)
            if (!(is >> layer.bias(r))) throw ConfigError("truncated parameter file");
        expected_cols = rows;
        q.layers_.push_back(std::move(layer));
    }
    if (q.layers_.empty()) throw ConfigError("parameter file has no layers");
    return q;
}

// ---------------------------------------------------------------------------
// Optimizer

AdamOptimizer::AdamOptimizer(const QFunction& q, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
    for (const auto& l : q.layers()) {
        m_.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()), Eigen::VectorXd::Zero(l.bias.size())});
    }
    v_ = m_;
}

void AdamOptimizer::step(QFunction& q, const std::vector<QFunction::Layer>& gradient) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = beta1_ * m + (1.0 - beta1_) * grad;
        v = beta2_ * v + (1.0 - beta2_) * grad.cwiseProduct(grad);
        param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    };
    auto& layers = q.layers();
    for (std::size_t k = 0; k < layers.size(); ++k) {
        update(layers[k].weights, gradient[k].weights, m_[k].weights, v_[k].weights);
        update(layers[k].bias, gradient[k].bias, m_[k].bias, v_[k].bias);
    }
}

// ---------------------------------------------------------------------------
// Replay

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ContractViolation("replay buffer capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 1 << 16));
}

void ReplayBuffer::push(Experience t) {
    if (data_.size() < capacity_) {
        data_.push_back(std::move(t));
        return;
    }
    data_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Experience& ReplayBuffer::at(std::size_t k) const { return data_.at((head_ + k) % data_.size()); }

std::vector<const Experience*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
    if (n > data_.size()) throw ContractViolation("sample larger than the buffer");
    // Floyd's algorithm: n distinct indices out of size().
    std::vector<std::size_t> chosen;
    chosen.reserve(n);
    for (std::size_t j = data_.size() - n; j < data_.size(); ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        if (std::find(chosen.begin(), chosen.end(), t) == chosen.end())
            chosen.push_back(t);
        else
            chosen.push_back(j);
    }
    std::vector<const Experience*> out;
    out.reserve(n);
    for (std::size_t idx : chosen) out.push_back(&data_[idx]);
    return out;
}

// ---------------------------------------------------------------------------
// Learning

int act(const QFunction& q, std::span<const double> s, double epsilon, std::mt19937_64& rng) {
    if (epsilon < 0.0 || epsilon > 1.0) throw ContractViolation("epsilon outside [0, 1]");
    const auto n = static_cast<int>(q.output_size());
    if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon)
        return std::uniform_int_distribution<int>(0, n - 1)(rng);
    const Eigen::VectorXd values = q.forward(s);
    return argmax_lowest(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

namespace {

Eigen::MatrixXd stack(std::span<const Experience> batch, bool next) {
    const auto dim = static_cast<Eigen::Index>(next ? batch.front().s_next.size() : batch.front().s.size());
    Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& v = next ? batch[b].s_next : batch[b].s;
        if (static_cast<Eigen::Index>(v.size()) != dim) throw ContractViolation("ragged state batch");
        out.col(static_cast<Eigen::Index>(b)) = Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
    }
    return out;
}

}  // namespace

double learn_step(QFunction& q, const QFunction& target_q, AdamOptimizer& optimizer, std::span<const Experience> batch,
                  const QLearnerConfig& config) {
    if (batch.empty()) throw ContractViolation("learn_step needs a non-empty batch");
    const Eigen::MatrixXd states = stack(batch, false);
    std::vector<double> targets(batch.size());
    std::vector<int> actions(batch.size());
    bool any_bootstrap = false;
    for (const auto& t : batch) any_bootstrap = any_bootstrap || !t.terminal;
    Eigen::MatrixXd next_values;
    if (any_bootstrap && config.gamma > 0.0) next_values = target_q.forward_batch(stack(batch, true));
    for (std::size_t b = 0; b < batch.size(); ++b) {
        actions[b] = batch[b].a;
        targets[b] = batch[b].r;
        if (!batch[b].terminal && next_values.size() > 0)
            targets[b] += config.gamma * next_values.col(static_cast<Eigen::Index>(b)).maxCoeff();
    }
    std::vector<QFunction::Layer> gradient;
    const double before = q.loss(states, actions, targets, &gradient);
    if (!std::isfinite(before)) throw TrainingDivergence("non-finite TD loss");
    optimizer.step(q, gradient);
    const double after = q.loss(states, actions, targets);
    if (!std::isfinite(after)) throw TrainingDivergence("non-finite TD loss after update");
    return after;
}

double gradient_check(const QFunction& q, std::span<const double> s, int a, double target, double step) {
    const Eigen::MatrixXd input = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    const std::vector<int> actions{a};
    const std::vector<double> targets{target};
    std::vector<QFunction::Layer> gradient;
    q.loss(input, actions, targets, &gradient);

    QFunction probe = q;
    std::vector<double> params = q.parameters();
    std::vector<double> analytic;
    for (const auto& l : gradient) {
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) analytic.push_back(l.weights(r, c));
        for (Eigen::Index r = 0; r < l.bias.size(); ++r) analytic.push_back(l.bias(r));
    }

    double worst = 0.0;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = params[k];
        params[k] = saved + step;
        probe.set_parameters(params);
        const double up = probe.loss(input, actions, targets);
        params[k] = saved - step;
        probe.set_parameters(params);
        const double down = probe.loss(input, actions, targets);
        params[k] = saved;
        const double numeric = (up - down) / (2.0 * step);
        const double scale = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic[k] - numeric) / scale);
    }
    return worst;
}

double epsilon_for_episode(const QLearnerConfig& config, int episode) {
    const double span = config.epsilon_decay * static_cast<double>(config.episodes);
    if (span <= 0.0) return config.epsilon_end;
    const double frac = std::clamp(static_cast<double>(episode) / span, 0.0, 1.0);
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac;
}

// ---------------------------------------------------------------------------
// Agent

QLearningAgent::QLearningAgent(const RoadNetwork& net, QLearnerConfig rl, ControllerConfig control)
    : rl_(std::move(rl)), control_(control), rng_(rl_.seed ^ 0x9e3779b97f4a7c15ull) {
    rl_.check();
    control_.check();
    if (net.intersections.empty()) throw ConfigError("network has no intersections");
    auto input_size = [](const Intersection& node) {
        return node.signalized_movements().size() + node.phases.size();
    };
    const std::size_t model_count = rl_.shared_parameters ? 1 : net.intersections.size();
    for (std::size_t k = 0; k < model_count; ++k) {
        const auto& node = net.intersections[k];
        if (rl_.shared_parameters) {
            for (const auto& other : net.intersections)
                if (input_size(other) != input_size(node) || other.phases.size() != node.phases.size())
                    throw ConfigError("parameter sharing needs homogeneous intersections");
        }
        QFunction q(input_size(node), rl_.hidden_sizes, node.phases.size(), rl_.seed * 1000003ull + k);
        Model m{q, q, AdamOptimizer(q, rl_.learning_rate), ReplayBuffer(rl_.buffer_capacity), 0};
        models_.push_back(std::move(m));
    }
    pending_.resize(net.intersections.size());
    epsilon_ = rl_.epsilon_start;
}

std::vector<double> QLearningAgent::encode(const Observation& obs) const {
    const StateVector sv = extract_state(obs.state, obs.network, obs.intersection, rl_.state_kind);
    std::vector<double> out;
    out.reserve(sv.features.size() + sv.current_phase.size());
    for (double f : sv.features) out.push_back(f * rl_.feature_scale);
    out.insert(out.end(), sv.current_phase.begin(), sv.current_phase.end());
    return out;
}

void QLearningAgent::begin_episode(const RoadNetwork& net) {
    pending_.assign(net.intersections.size(), Pending{});
    episode_reward_ = 0.0;
}

void QLearningAgent::end_episode() {
    // Episodes end on a time limit; the last action of each intersection has no successor state.
    for (auto& p : pending_) p.valid = false;
}

int QLearningAgent::decide(const Observation& obs) {
    Model& model = models_[model_of(obs.intersection)];
    Pending& pending = pending_.at(obs.intersection.index());
    std::vector<double> s = encode(obs);

    if (pending.valid) {
        const double r = reward(obs.state, obs.network, obs.intersection, rl_.reward_kind) * rl_.reward_scale;
        episode_reward_ += r;
        if (learning_) {
            model.buffer.push(Experience{std::move(pending.s), pending.a, r, s, false});
            if (model.buffer.size() >= rl_.batch_size) {
                std::vector<Experience> batch;
                batch.reserve(rl_.batch_size);
                for (const Experience* t : model.buffer.sample(rl_.batch_size, rng_)) batch.push_back(*t);
                last_loss_ = learn_step(model.q, model.target, model.optimizer, batch, rl_);
                if (++model.since_sync >= rl_.target_sync_interval) {
                    model.target = model.q;
                    model.since_sync = 0;
                }
            }
        }
    }

    const int a = act(model.q, s, epsilon_, rng_);
    pending.s = std::move(s);
    pending.a = a;
    pending.valid = true;
    return a;
}

TrainResult train(std::shared_ptr<const RoadNetwork> net, const std::vector<FlowSpec>& flows, const SimConfig& sim,
                  const ControllerConfig& control, const QLearnerConfig& config) {
    QLearningAgent agent(*net, config, control);
    Simulation simulation(net, flows, sim);
    TrainResult result;

    auto run_episode = [&](double epsilon, bool learning) {
        const auto started = std::chrono::steady_clock::now();
        simulation.reset();
        agent.set_epsilon(epsilon);
        agent.set_learning(learning);
        agent.begin_episode(*net);
        simulation.run(&agent);
        agent.end_episode();
        RunReport report = summarize(simulation);
        report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        return report;
    };

    try {
        for (int e = 0; e < config.episodes; ++e) {
            result.episodes.push_back(run_episode(epsilon_for_episode(config, e), true));
            result.episode_rewards.push_back(agent.episode_reward());
        }
        std::vector<RunReport> eval;
        if (config.greedy_eval) {
            for (int e = 0; e < config.eval_episodes; ++e) eval.push_back(run_episode(0.0, false));
        } else {
            const auto n = std::min<std::size_t>(static_cast<std::size_t>(config.eval_episodes), result.episodes.size());
            eval.assign(result.episodes.end() - static_cast<std::ptrdiff_t>(n), result.episodes.end());
        }
        result.evaluation = mean_report(eval);
    } catch (const TrainingDivergence& e) {
        result.error = e.what();
        if (!result.episodes.empty()) result.evaluation = result.episodes.back();
    }
    for (std::size_t k = 0; k < agent.model_count(); ++k) result.models.push_back(agent.q_function(k));
    return result;
}

}  // namespace epsim
