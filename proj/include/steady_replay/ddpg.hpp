#pragma once

// Deterministic-policy actor-critic learner with target networks and OU exploration.
//
// The actor maps an observation to tanh outputs u; the applied action is delta_max * u.
// The critic takes [observation, action] concatenated at its input layer.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "steady_replay/env.hpp"
#include "steady_replay/errors.hpp"
#include "steady_replay/net.hpp"
#include "steady_replay/replay.hpp"

namespace steady_replay {

inline constexpr std::size_t kCriticInputDim = kObsDim + kActDim;

/// Fixed per-component multipliers applied to observations before they reach either network.
using InputScale = std::array<double, kObsDim>;

inline InputScale unit_input_scale() {
    InputScale s;
    s.fill(1.0);
    return s;
}

/// Link/cup positions x5, goal displacement and distance x20; joints and flag unchanged.
inline InputScale default_input_scale() {
    InputScale s = unit_input_scale();
    for (std::size_t i = obs_index::elbow; i < obs_index::to_goal; ++i) s[i] = 5.0;
    for (std::size_t i = obs_index::to_goal; i < obs_index::joints; ++i) s[i] = 20.0;
    s[obs_index::distance] = 20.0;
    return s;
}

inline Observation scale_observation(const Observation& obs, const InputScale& scale) {
    Observation out;
    for (std::size_t i = 0; i < kObsDim; ++i) out[i] = obs[i] * scale[i];
    return out;
}

struct AgentConfig {
    double gamma = 0.9;
    double tau = 1e-3;
    double lr_actor = 1e-4;
    double lr_critic = 1e-3;
    int batch_size = 128;
    double delta_max = 0.2;
    int warmup_transitions = 1000;
    std::size_t replay_capacity = 100000;
    std::vector<std::size_t> hidden{400, 300};
    double ou_theta = 0.15;
    double ou_sigma0 = 0.3 * 0.2;
    double ou_sigma_floor = 0.05 * 0.2;
    double noise_decay_episodes = 1200;
    InputScale input_scale = default_input_scale();

    void validate() const {
        if (!(gamma >= 0 && gamma <= 1)) throw ConfigError("gamma must lie in [0, 1]");
        if (!(tau > 0 && tau <= 1)) throw ConfigError("tau must lie in (0, 1]");
        if (!(lr_actor > 0 && lr_critic > 0)) throw ConfigError("learning rates must be positive");
        if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
        if (!(delta_max > 0)) throw ConfigError("delta_max must be positive");
        if (warmup_transitions < 0) throw ConfigError("warmup_transitions must be >= 0");
        if (replay_capacity < 1) throw ConfigError("replay_capacity must be positive");
        if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
        for (auto h : hidden)
            if (h == 0) throw ConfigError("hidden layer sizes must be positive");
        if (!(ou_theta > 0 && ou_theta < 1)) throw ConfigError("ou_theta must lie in (0, 1)");
        if (!(ou_sigma0 >= 0 && ou_sigma_floor >= 0)) throw ConfigError("OU amplitudes must be >= 0");
        if (!(noise_decay_episodes > 0)) throw ConfigError("noise decay horizon must be positive");
    }
};

struct Agent {
    AgentConfig cfg;
    Mlp actor;
    Mlp critic;
    Mlp target_actor;
    Mlp target_critic;
    AdamState actor_opt;
    AdamState critic_opt;
};

inline std::vector<std::size_t> with_io(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
    std::vector<std::size_t> dims{in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(out);
    return dims;
}

/// Fresh networks; targets start as exact copies.
inline Agent make_agent(const AgentConfig& cfg, std::uint64_t actor_seed, std::uint64_t critic_seed) {
    cfg.validate();
    Agent a;
    a.cfg = cfg;
    a.actor = init_mlp(with_io(kObsDim, cfg.hidden, kActDim), OutputActivation::tanh, actor_seed);
    a.critic = init_mlp(with_io(kCriticInputDim, cfg.hidden, 1), OutputActivation::identity, critic_seed);
    a.target_actor = a.actor;
    a.target_critic = a.critic;
    a.actor_opt = AdamState::for_net(a.actor, cfg.lr_actor);
    a.critic_opt = AdamState::for_net(a.critic, cfg.lr_critic);
    return a;
}

inline Action act(const Mlp& actor, const Observation& obs, double delta_max, ForwardCache& cache) {
    forward_into(actor, obs, cache);
    Action a{};
    for (std::size_t i = 0; i < kActDim; ++i) a[i] = delta_max * cache.output()[i];
    return a;
}

inline Action act(const Mlp& actor, const Observation& obs, double delta_max) {
    ForwardCache cache;
    return act(actor, obs, delta_max, cache);
}

struct OuState {
    std::array<double, kActDim> x{};
    double theta = 0.15;
    double sigma = 0.0;
};

/// x <- x - theta * x + sigma * N(0, I).
inline std::array<double, kActDim> ou_step(OuState& state, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& xi : state.x) xi = xi - state.theta * xi + state.sigma * normal(rng);
    return state.x;
}

/// Linear decay from sigma0 to the floor over decay_episodes.
inline double noise_scale(int episode, double sigma0, double sigma_floor, double decay_episodes) {
    if (episode < 0) throw ContractViolation("noise_scale: negative episode");
    return std::max(sigma_floor, sigma0 * (1.0 - static_cast<double>(episode) / decay_episodes));
}

inline double noise_scale(int episode, const AgentConfig& cfg) {
    return noise_scale(episode, cfg.ou_sigma0, cfg.ou_sigma_floor, cfg.noise_decay_episodes);
}

inline Action act_exploratory(const Mlp& actor, const Observation& obs, OuState& ou, double delta_max, Rng& rng) {
    Action a = act(actor, obs, delta_max);
    const auto noise = ou_step(ou, rng);
    for (std::size_t i = 0; i < kActDim; ++i) a[i] = std::clamp(a[i] + noise[i], -delta_max, delta_max);
    return a;
}

/// Greedy action of the agent's actor for a raw observation.
inline Action act(const Agent& agent, const Observation& obs, ForwardCache& cache) {
    return act(agent.actor, scale_observation(obs, agent.cfg.input_scale), agent.cfg.delta_max, cache);
}

inline Action act_exploratory(const Agent& agent, const Observation& obs, OuState& ou, Rng& rng) {
    return act_exploratory(agent.actor, scale_observation(obs, agent.cfg.input_scale), ou, agent.cfg.delta_max, rng);
}

inline std::array<double, kCriticInputDim> critic_input(const Observation& s, const Action& a) {
    std::array<double, kCriticInputDim> x{};
    std::copy(s.begin(), s.end(), x.begin());
    std::copy(a.begin(), a.end(), x.begin() + kObsDim);
    return x;
}

/// Column-per-sample views of a batch.
struct BatchMatrices {
    Matrix states;       // kObsDim x N
    Matrix actions;      // kActDim x N
    Matrix next_states;  // kObsDim x N
    Eigen::VectorXd rewards;
    Eigen::VectorXd not_done;

    BatchMatrices(std::span<const Experience> batch, const InputScale& scale) {
        const auto n = static_cast<Eigen::Index>(batch.size());
        states.resize(kObsDim, n);
        actions.resize(kActDim, n);
        next_states.resize(kObsDim, n);
        rewards.resize(n);
        not_done.resize(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const Experience& e = batch[static_cast<std::size_t>(j)];
            for (std::size_t k = 0; k < kObsDim; ++k) {
                states(static_cast<Eigen::Index>(k), j) = e.s[k] * scale[k];
                next_states(static_cast<Eigen::Index>(k), j) = e.s_next[k] * scale[k];
            }
            for (std::size_t k = 0; k < kActDim; ++k) actions(static_cast<Eigen::Index>(k), j) = e.a[k];
            rewards(j) = e.r;
            not_done(j) = e.done ? 0.0 : 1.0;
        }
    }
};

inline Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out << top, bottom;
    return out;
}

/// y_i = r_i + gamma * (1 - done_i) * Q'(s'_i, mu'(s'_i)).
inline std::vector<double> critic_targets(std::span<const Experience> batch, const Mlp& target_actor,
                                          const Mlp& target_critic, double gamma, double delta_max,
                                          const InputScale& scale = unit_input_scale()) {
    if (batch.empty()) throw ContractViolation("critic_targets: empty batch");
    const BatchMatrices bm(batch, scale);
    BatchCache actor_cache;
    BatchCache critic_cache;
    forward_batch(target_actor, bm.next_states, actor_cache);
    forward_batch(target_critic, stack_rows(bm.next_states, delta_max * actor_cache.output()), critic_cache);
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        y[i] = batch[i].done ? batch[i].r : batch[i].r + gamma * critic_cache.output()(0, j);
    }
    return y;
}

struct CriticGradient {
    ParamGrads grads;
    double loss = 0.0;
};

/// Gradient of (1/N) sum (y_i - Q(s_i, a_i))^2.
inline CriticGradient critic_gradient(const Mlp& critic, std::span<const Experience> batch,
                                      std::span<const double> targets, const InputScale& scale = unit_input_scale()) {
    if (batch.size() != targets.size() || batch.empty()) throw ContractViolation("critic_gradient: size mismatch");
    const BatchMatrices bm(batch, scale);
    BatchCache cache;
    forward_batch(critic, stack_rows(bm.states, bm.actions), cache);
    const auto n = static_cast<Eigen::Index>(batch.size());
    const Eigen::Map<const Eigen::RowVectorXd> y(targets.data(), n);
    const Eigen::RowVectorXd err = y - cache.output().row(0);
    CriticGradient out{ParamGrads::zeros_like(critic), err.squaredNorm() / static_cast<double>(n)};
    const Matrix dq = (-2.0 / static_cast<double>(n)) * err;
    backward_batch(critic, cache, dq, &out.grads, nullptr);
    return out;
}

struct ActorGradient {
    ParamGrads grads;  // gradient of -J, i.e. the descent direction for the actor loss
    double objective = 0.0;
};

/// J = (1/N) sum Q(s_i, delta_max * mu(s_i)); chain rule through the critic's action inputs.
inline ActorGradient actor_gradient(const Mlp& actor, const Mlp& critic, std::span<const Experience> batch,
                                    double delta_max, const InputScale& scale = unit_input_scale()) {
    if (batch.empty()) throw ContractViolation("actor_gradient: empty batch");
    const BatchMatrices bm(batch, scale);
    const auto n = static_cast<Eigen::Index>(batch.size());
    BatchCache actor_cache;
    BatchCache critic_cache;
    forward_batch(actor, bm.states, actor_cache);
    forward_batch(critic, stack_rows(bm.states, delta_max * actor_cache.output()), critic_cache);
    ActorGradient out{ParamGrads::zeros_like(actor), critic_cache.output().sum() / static_cast<double>(n)};
    Matrix dq_dx;
    backward_batch(critic, critic_cache, Matrix::Ones(1, n), nullptr, &dq_dx);
    const Matrix dy = (-delta_max / static_cast<double>(n)) * dq_dx.bottomRows(kActDim);
    backward_batch(actor, actor_cache, dy, &out.grads, nullptr);
    return out;
}

struct TrainStats {
    double critic_loss = 0.0;
    double actor_objective = 0.0;  // mean Q(s, mu(s)) before the actor update
};

/// Critic regression step, actor ascent step, then Polyak update of both targets.
inline TrainStats train_step(Agent& agent, std::span<const Experience> batch) {
    if (batch.size() != static_cast<std::size_t>(agent.cfg.batch_size))
        throw ContractViolation("train_step: batch size differs from configuration");
    const double dm = agent.cfg.delta_max;
    const InputScale& scale = agent.cfg.input_scale;
    const std::vector<double> y =
        critic_targets(batch, agent.target_actor, agent.target_critic, agent.cfg.gamma, dm, scale);

    CriticGradient cg = critic_gradient(agent.critic, batch, y, scale);
    if (!std::isfinite(cg.loss)) throw DivergenceError("train_step: non-finite critic loss");
    adam_step(agent.critic, cg.grads, agent.critic_opt);

    ActorGradient ag = actor_gradient(agent.actor, agent.critic, batch, dm, scale);
    if (!std::isfinite(ag.objective)) throw DivergenceError("train_step: non-finite actor objective");
    adam_step(agent.actor, ag.grads, agent.actor_opt);

    soft_update(agent.target_critic, agent.critic, agent.cfg.tau);
    soft_update(agent.target_actor, agent.actor, agent.cfg.tau);
    return {cg.loss, ag.objective};
}

}  // namespace steady_replay
