#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "steady_replay/ddpg.hpp"

using namespace steady_replay;

namespace {

AgentConfig small_config() {
    AgentConfig c;
    c.hidden = {5, 4};
    c.batch_size = 6;
    return c;
}

std::vector<Experience> random_batch(std::size_t n, std::mt19937_64& rng, double delta_max) {
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<Experience> batch(n);
    for (auto& e : batch) {
        for (auto& x : e.s) x = u(rng);
        for (auto& x : e.s_next) x = u(rng);
        for (auto& x : e.a) x = delta_max * u(rng);
        e.r = u(rng);
        e.done = u(rng) > 0.6;
    }
    return batch;
}

void randomize(Mlp& net, std::mt19937_64& rng, double scale) {
    std::vector<double> p(net.parameter_count());
    std::uniform_real_distribution<double> u(-scale, scale);
    for (auto& x : p) x = u(rng);
    unflatten(net, p);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace

TEST(Act, ZeroFinalLayerGivesZeroAction) {
    Agent ag = make_agent(small_config(), 1, 2);
    for (auto& w : ag.actor.layers.back().weights) w = 0;
    for (auto& b : ag.actor.layers.back().biases) b = 0;
    Observation o{};
    o.fill(0.3);
    for (double a : act(ag.actor, o, 0.2)) EXPECT_EQ(a, 0.0);
}

TEST(Act, BoundAndScaling) {
    std::mt19937_64 rng(3);
    Mlp actor = init_mlp(with_io(kObsDim, {8}, kActDim), OutputActivation::tanh, 1);
    randomize(actor, rng, 3.0);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int i = 0; i < 100; ++i) {
        Observation o;
        for (auto& x : o) x = u(rng);
        const Action a = act(actor, o, 0.2);
        const Action b = act(actor, o, 0.4);
        for (std::size_t k = 0; k < kActDim; ++k) {
            EXPECT_LE(std::abs(a[k]), 0.2);
            EXPECT_DOUBLE_EQ(b[k], 2 * a[k]);
        }
    }
}

TEST(Ou, DeterministicDecay) {
    OuState s;
    s.theta = 0.15;
    s.sigma = 0;
    s.x = {1, 0, 0};
    Rng rng(1);
    auto x = ou_step(s, rng);
    EXPECT_DOUBLE_EQ(x[0], 0.85);
    EXPECT_EQ(x[1], 0.0);
    for (int k = 2; k <= 10; ++k) {
        x = ou_step(s, rng);
        EXPECT_NEAR(x[0], std::pow(0.85, k), 1e-15);
    }
}

TEST(Ou, StationaryVariance) {
    OuState s;
    s.theta = 0.15;
    s.sigma = 0.1;
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) ou_step(s, rng);
    const int n = 400000;
    double sum = 0, sq = 0;
    for (int i = 0; i < n; ++i) {
        const double v = ou_step(s, rng)[1];
        sum += v;
        sq += v * v;
    }
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    const double expected = 0.01 / (1 - 0.85 * 0.85);
    EXPECT_NEAR(var, expected, 0.05 * expected);
}

TEST(NoiseScale, Schedule) {
    EXPECT_EQ(noise_scale(0, 0.06, 0.01, 100), 0.06);
    EXPECT_EQ(noise_scale(100, 0.06, 0.01, 100), 0.01);
    EXPECT_EQ(noise_scale(500, 0.06, 0.01, 100), 0.01);
    EXPECT_DOUBLE_EQ(noise_scale(50, 0.06, 0.0, 100), 0.03);
    EXPECT_THROW(noise_scale(-1, 0.06, 0.01, 100), ContractViolation);
}

TEST(Exploratory, ZeroNoiseAndClamp) {
    std::mt19937_64 r(7);
    Mlp actor = init_mlp(with_io(kObsDim, {8}, kActDim), OutputActivation::tanh, 1);
    randomize(actor, r, 1.0);
    Observation o;
    o.fill(0.1);
    OuState quiet;
    Rng rng(2);
    EXPECT_EQ(act_exploratory(actor, o, quiet, 0.2, rng), act(actor, o, 0.2));
    OuState loud;
    loud.x = {1e6, 1e6, 1e6};
    for (double a : act_exploratory(actor, o, loud, 0.2, rng)) EXPECT_EQ(a, 0.2);
    OuState noisy;
    noisy.sigma = 1.0;
    for (int i = 0; i < 200; ++i)
        for (double a : act_exploratory(actor, o, noisy, 0.2, rng)) EXPECT_LE(std::abs(a), 0.2);
}

TEST(CriticTargets, Examples) {
    // Critic with zero weights and bias 2 outputs 2 everywhere.
    Mlp ta = init_mlp(with_io(kObsDim, {3}, kActDim), OutputActivation::tanh, 1);
    Mlp tc = init_mlp(with_io(kCriticInputDim, {3}, 1), OutputActivation::identity, 2);
    for (auto& l : tc.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    tc.layers.back().biases[0] = 2.0;
    std::vector<Experience> batch(2);
    batch[0].r = 1;
    batch[0].done = false;
    batch[1].r = 1;
    batch[1].done = true;
    const auto y = critic_targets(batch, ta, tc, 0.9, 0.2);
    EXPECT_DOUBLE_EQ(y[0], 2.8);
    EXPECT_EQ(y[1], 1.0);
    const auto y0 = critic_targets(batch, ta, tc, 0.0, 0.2);
    EXPECT_EQ(y0[0], 1.0);
    EXPECT_EQ(y0[1], 1.0);
}

TEST(CriticGradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Mlp critic = init_mlp(with_io(kCriticInputDim, {5, 4}, 1), OutputActivation::identity, trial);
        randomize(critic, rng, 0.5);
        const auto batch = random_batch(5, rng, 0.2);
        std::vector<double> y(batch.size());
        for (auto& v : y) v = std::uniform_real_distribution<double>(-1, 1)(rng);
        const CriticGradient g = critic_gradient(critic, batch, y);

        auto loss = [&](std::span<const double> p) {
            Mlp probe = critic;
            unflatten(probe, p);
            double s = 0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                const auto x = critic_input(batch[i].s, batch[i].a);
                const double q = forward(probe, x).first[0];
                s += (y[i] - q) * (y[i] - q);
            }
            return s / batch.size();
        };
        const auto p = flatten(critic);
        EXPECT_NEAR(loss(p), g.loss, 1e-12);
        const auto num = numerical_gradient(loss, p, 1e-6);
        const auto ana = flatten(g.grads);
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_LT(rel_err(ana[i], num[i]), 1e-4);
    }
}

TEST(CriticGradient, ZeroAtFit) {
    std::mt19937_64 rng(13);
    Mlp critic = init_mlp(with_io(kCriticInputDim, {4}, 1), OutputActivation::identity, 1);
    const auto batch = random_batch(4, rng, 0.2);
    std::vector<double> y;
    for (const auto& e : batch) y.push_back(forward(critic, critic_input(e.s, e.a)).first[0]);
    const CriticGradient g = critic_gradient(critic, batch, y);
    EXPECT_EQ(g.loss, 0.0);
    for (double v : flatten(g.grads)) EXPECT_EQ(v, 0.0);
}

TEST(ActorGradient, MatchesFiniteDifferences) {
    std::mt19937_64 rng(17);
    const double dm = 0.2;
    for (int trial = 0; trial < 20; ++trial) {
        Mlp actor = init_mlp(with_io(kObsDim, {5, 4}, kActDim), OutputActivation::tanh, trial);
        Mlp critic = init_mlp(with_io(kCriticInputDim, {6}, 1), OutputActivation::identity, 100 + trial);
        randomize(actor, rng, 0.5);
        randomize(critic, rng, 0.8);
        const auto batch = random_batch(5, rng, dm);
        const ActorGradient g = actor_gradient(actor, critic, batch, dm);

        auto objective = [&](std::span<const double> p) {
            Mlp probe = actor;
            unflatten(probe, p);
            double s = 0;
            for (const auto& e : batch) {
                const Action a = act(probe, e.s, dm);
                s += forward(critic, critic_input(e.s, a)).first[0];
            }
            return s / batch.size();
        };
        const auto p = flatten(actor);
        EXPECT_NEAR(objective(p), g.objective, 1e-12);
        const auto num = numerical_gradient(objective, p, 1e-6);
        const auto ana = flatten(g.grads);
        // grads hold the gradient of -J.
        for (std::size_t i = 0; i < p.size(); ++i) EXPECT_LT(rel_err(-ana[i], num[i]), 1e-4);
    }
}

TEST(ActorGradient, LinearToy) {
    // Q(s, a) = 2 * a0 and mu(s) = tanh(theta) through the bias only.
    Mlp actor = init_mlp(with_io(kObsDim, {1}, kActDim), OutputActivation::tanh, 1);
    for (auto& l : actor.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    Mlp critic = init_mlp(with_io(kCriticInputDim, {1}, 1), OutputActivation::identity, 2);
    for (auto& l : critic.layers) {
        std::fill(l.weights.begin(), l.weights.end(), 0.0);
        std::fill(l.biases.begin(), l.biases.end(), 0.0);
    }
    critic.layers[0].w(0, kObsDim) = 2.0;  // hidden = relu(2 * a0 + 1)
    critic.layers[0].biases[0] = 1.0;
    critic.layers[1].weights[0] = 1.0;
    std::vector<Experience> batch(3);
    const double dm = 1.0;
    const ActorGradient g = actor_gradient(actor, critic, batch, dm);
    // dJ/dtheta = 2 * tanh'(0) = 2.
    EXPECT_NEAR(-g.grads.layers.back().biases[0], 2.0, 1e-12);
    AdamState st = AdamState::for_net(actor, 1e-4);
    const double before = actor.layers.back().biases[0];
    adam_step(actor, g.grads, st);
    EXPECT_NEAR(actor.layers.back().biases[0] - before, 1e-4, 1e-9);
}

TEST(TrainStep, TauOneCopiesLiveNets) {
    AgentConfig c = small_config();
    c.tau = 1.0;
    Agent ag = make_agent(c, 1, 2);
    std::mt19937_64 rng(19);
    const auto batch = random_batch(6, rng, c.delta_max);
    train_step(ag, batch);
    EXPECT_EQ(flatten(ag.target_actor), flatten(ag.actor));
    EXPECT_EQ(flatten(ag.target_critic), flatten(ag.critic));
}

TEST(TrainStep, TargetsLagBehind) {
    AgentConfig c = small_config();
    c.tau = 0.01;
    Agent ag = make_agent(c, 1, 2);
    std::mt19937_64 rng(23);
    const auto batch = random_batch(6, rng, c.delta_max);
    const auto before = flatten(ag.target_critic);
    const auto live_before = flatten(ag.critic);
    train_step(ag, batch);
    const auto after = flatten(ag.target_critic);
    const auto live = flatten(ag.critic);
    for (std::size_t i = 0; i < after.size(); ++i)
        EXPECT_NEAR(after[i], 0.99 * before[i] + 0.01 * live[i], 1e-15);
    EXPECT_NE(live, live_before);
}

TEST(TrainStep, Deterministic) {
    const AgentConfig c = small_config();
    Agent a = make_agent(c, 4, 5);
    Agent b = make_agent(c, 4, 5);
    std::mt19937_64 rng(29);
    const auto batch = random_batch(6, rng, c.delta_max);
    for (int i = 0; i < 5; ++i) {
        const TrainStats sa = train_step(a, batch);
        const TrainStats sb = train_step(b, batch);
        EXPECT_EQ(sa.critic_loss, sb.critic_loss);
    }
    EXPECT_EQ(flatten(a.actor), flatten(b.actor));
    EXPECT_EQ(flatten(a.target_critic), flatten(b.target_critic));
}

TEST(TrainStep, RejectsWrongBatchSize) {
    Agent ag = make_agent(small_config(), 1, 2);
    std::mt19937_64 rng(31);
    EXPECT_THROW(train_step(ag, random_batch(5, rng, 0.2)), ContractViolation);
}

TEST(TrainStep, DivergenceSurfaces) {
    Agent ag = make_agent(small_config(), 1, 2);
    std::mt19937_64 rng(37);
    auto batch = random_batch(6, rng, 0.2);
    batch[2].r = std::numeric_limits<double>::infinity();
    EXPECT_THROW(train_step(ag, batch), DivergenceError);
}

TEST(Scaling, AgentActUsesScaledObservation) {
    AgentConfig c = small_config();
    Agent ag = make_agent(c, 1, 2);
    Observation o;
    o.fill(0.05);
    ForwardCache cache;
    const Action via_agent = act(ag, o, cache);
    const Action direct = act(ag.actor, scale_observation(o, c.input_scale), c.delta_max);
    EXPECT_EQ(via_agent, direct);
    c.input_scale = unit_input_scale();
    Agent plain = make_agent(c, 1, 2);
    EXPECT_EQ(act(plain, o, cache), act(plain.actor, o, c.delta_max));
}

TEST(AgentConfig, Validation) {
    AgentConfig c;
    c.gamma = 1.5;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.tau = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = {};
    c.hidden = {};
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(MakeAgent, Shapes) {
    const Agent ag = make_agent(AgentConfig{}, 1, 2);
    EXPECT_EQ(ag.actor.layer_dims, (std::vector<std::size_t>{20, 400, 300, 3}));
    EXPECT_EQ(ag.critic.layer_dims, (std::vector<std::size_t>{23, 400, 300, 1}));
    EXPECT_EQ(flatten(ag.actor), flatten(ag.target_actor));
}
