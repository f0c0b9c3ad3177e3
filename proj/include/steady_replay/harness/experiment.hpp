#pragma once

// Training runs, seeded evaluation and the four-method comparison.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "steady_replay/ddpg.hpp"
#include "steady_replay/env.hpp"
#include "steady_replay/harness/checkpoint.hpp"
#include "steady_replay/harness/config.hpp"
#include "steady_replay/harness/rng_streams.hpp"
#include "steady_replay/replay.hpp"

namespace steady_replay {

inline constexpr const char* kEpisodeLogHeader =
    "episode,method,stored_steps,attempted_steps,episode_reward,success,mean_critic_loss,mean_actor_objective,"
    "noise_scale,wall_ms";

inline constexpr const char* kStepLogHeader =
    "episode,step,stored,stuck,ticks,a0,a1,a2,prev_d_h,prev_d_v,next_d_h,next_d_v,d_o,reward,success,done";

struct EpisodeRecord {
    int episode = 0;
    UpdateMethod method = UpdateMethod::A;
    int stored_steps = 0;
    int attempted_steps = 0;
    double episode_reward = 0.0;
    bool success = false;
    double mean_critic_loss = 0.0;
    double mean_actor_objective = 0.0;
    double noise_scale = 0.0;
    std::int64_t wall_ms = 0;
};

inline std::string format_episode_row(const EpisodeRecord& r) {
    return fmt::format("{},{},{},{},{:.17g},{},{:.17g},{:.17g},{:.17g},{}", r.episode, to_char(r.method),
                       r.stored_steps, r.attempted_steps, r.episode_reward, r.success ? 1 : 0, r.mean_critic_loss,
                       r.mean_actor_objective, r.noise_scale, r.wall_ms);
}

inline std::string format_step_row(int episode, int step, const Action& a, const StepOutcome& o) {
    return fmt::format("{},{},{},{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{}",
                       episode, step, o.stored ? 1 : 0, o.stuck ? 1 : 0, o.ticks, a[0], a[1], a[2], o.prev.d_h,
                       o.prev.d_v, o.next.d_h, o.next.d_v, o.d_o, o.reward, o.success ? 1 : 0, o.done ? 1 : 0);
}

struct TrainingObserver {
    std::function<void(int episode, int step, const Action&, const StepOutcome&, const Observation& before)> on_step;
    std::function<void(const EpisodeRecord&)> on_episode;
    std::function<void(const Experience&)> on_admit;
};

struct TrainingResult {
    Agent agent;
    std::vector<EpisodeRecord> episodes;
    std::uint64_t pushes = 0;
    std::uint64_t train_steps = 0;
};

/// In-memory training loop. Deterministic in (cfg, cfg.seed) apart from wall_ms.
inline TrainingResult train(const RunConfig& cfg, const TrainingObserver& observer = {}) {
    cfg.validate();
    Rng init_rng = make_stream(cfg.seed, "init");
    Rng env_rng = make_stream(cfg.seed, "env");
    Rng noise_rng = make_stream(cfg.seed, "noise");
    Rng sample_rng = make_stream(cfg.seed, "sampling");

    TrainingResult result;
    const std::uint64_t actor_seed = draw_seed(init_rng);
    const std::uint64_t critic_seed = draw_seed(init_rng);
    result.agent = make_agent(cfg.agent, actor_seed, critic_seed);
    Agent& agent = result.agent;

    ArmEnv env(cfg.env_for_method());
    ReplayBuffer buffer(cfg.agent.replay_capacity);
    const StepMode mode = step_mode(cfg.method);
    const std::size_t batch_size = static_cast<std::size_t>(cfg.agent.batch_size);
    const std::size_t warmup = std::max<std::size_t>(static_cast<std::size_t>(cfg.agent.warmup_transitions), batch_size);
    std::vector<Experience> batch(batch_size);

    for (int ep = 0; ep < cfg.episodes; ++ep) {
        const auto t0 = std::chrono::steady_clock::now();
        OuState ou;
        ou.theta = cfg.agent.ou_theta;
        ou.sigma = noise_scale(ep, cfg.agent);

        EpisodeRecord rec;
        rec.episode = ep;
        rec.method = cfg.method;
        rec.noise_scale = ou.sigma;
        int n_train = 0;
        Observation obs = env.reset(env_rng);
        int step = 0;
        while (!env.done()) {
            const Action a = act_exploratory(agent, obs, ou, noise_rng);
            const StepOutcome out = env.step(a, mode);
            rec.episode_reward += out.reward;
            if (observer.on_step) observer.on_step(ep, step, a, out, obs);
            if (admit(cfg.method, out)) {
                const Experience e{obs, a, out.reward, out.next_obs, out.success};
                buffer.push(e);
                ++result.pushes;
                if (observer.on_admit) observer.on_admit(e);
                if (buffer.size() >= warmup) {
                    const auto idx = buffer.sample_indices(batch_size, sample_rng);
                    for (std::size_t i = 0; i < batch_size; ++i) batch[i] = buffer.at(idx[i]);
                    const TrainStats st = train_step(agent, batch);
                    rec.mean_critic_loss += st.critic_loss;
                    rec.mean_actor_objective += st.actor_objective;
                    ++n_train;
                    ++result.train_steps;
                }
            }
            obs = out.next_obs;
            ++step;
        }
        rec.stored_steps = env.stored_steps();
        rec.attempted_steps = env.attempted_steps();
        rec.success = env.flag();
        if (n_train > 0) {
            rec.mean_critic_loss /= n_train;
            rec.mean_actor_objective /= n_train;
        }
        if (cfg.record_wall_time)
            rec.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0)
                              .count();
        result.episodes.push_back(rec);
        if (observer.on_episode) observer.on_episode(rec);
    }
    return result;
}

// --- evaluation -------------------------------------------------------------------------------

struct TrajectoryStep {
    double distance = 0.0;  // cup-to-goal distance before the action
    Action action{};
};
using Trajectory = std::vector<TrajectoryStep>;

struct EvalEpisode {
    Vec3 object;
    double total_reward = 0.0;
    bool success = false;
    int steps = 0;
};

struct EvalReport {
    double success_rate = 0.0;
    double mean_episode_reward = 0.0;
    double shake = 0.0;
    std::vector<EvalEpisode> episodes;
    std::vector<Trajectory> trajectories;
};

/// Mean action norm over every step taken at or after the first state within `proximity` of the goal.
inline double shake_metric(const std::vector<Trajectory>& trajectories, double proximity) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& traj : trajectories) {
        bool near = false;
        for (const auto& s : traj) {
            near = near || s.distance <= proximity;
            if (!near) continue;
            sum += std::sqrt(s.action[0] * s.action[0] + s.action[1] * s.action[1] + s.action[2] * s.action[2]);
            ++n;
        }
    }
    return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

/// Object positions used by every method for a given eval seed.
inline std::vector<Vec3> eval_object_positions(const EnvConfig& env, std::uint64_t eval_seed, int n) {
    Rng rng = make_stream(eval_seed, "eval-objects");
    std::vector<Vec3> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(sample_object_position(env, rng));
    return out;
}

/// Noise-free rollouts; each episode is capped at stored_steps_per_episode decisions.
template <class Policy>
EvalReport evaluate_policy(Policy&& policy, const RunConfig& cfg, std::uint64_t eval_seed, int n_episodes) {
    if (n_episodes < 1) throw ContractViolation("evaluate: need at least one episode");
    EnvConfig env_cfg = cfg.env_for_method();
    env_cfg.max_attempted_steps = env_cfg.stored_steps_per_episode;
    ArmEnv env(env_cfg);
    const StepMode mode = step_mode(cfg.method);
    EvalReport report;
    int successes = 0;
    for (const Vec3& center : eval_object_positions(env_cfg, eval_seed, n_episodes)) {
        EvalEpisode ep;
        ep.object = center;
        Trajectory traj;
        Observation obs = env.reset_with_object(center);
        while (!env.done()) {
            const Action a = policy(obs);
            traj.push_back({obs[obs_index::distance], a});
            const StepOutcome out = env.step(a, mode);
            ep.total_reward += out.reward;
            ++ep.steps;
            obs = out.next_obs;
        }
        ep.success = env.flag();
        successes += ep.success ? 1 : 0;
        report.mean_episode_reward += ep.total_reward;
        report.episodes.push_back(ep);
        report.trajectories.push_back(std::move(traj));
    }
    report.success_rate = static_cast<double>(successes) / static_cast<double>(n_episodes);
    report.mean_episode_reward /= static_cast<double>(n_episodes);
    report.shake = shake_metric(report.trajectories, 2.0 * env_cfg.d_goal);
    return report;
}

inline EvalReport evaluate(const Agent& agent, const RunConfig& cfg, std::uint64_t eval_seed, int n_episodes = 100) {
    ForwardCache cache;
    return evaluate_policy([&](const Observation& o) { return act(agent, o, cache); }, cfg, eval_seed, n_episodes);
}

inline EvalReport evaluate_checkpoint(const std::string& checkpoint, const RunConfig& cfg, std::uint64_t eval_seed,
                                      int n_episodes = 100) {
    return evaluate(load_checkpoint(checkpoint, cfg.agent), cfg, eval_seed, n_episodes);
}

/// Hand-written controller: damped least-squares step of the cup toward a point slightly above the goal.
class GreedyReacher {
public:
    GreedyReacher(ArmGeometry geometry, double delta_max, double hover = 0.002, double damping = 0.01)
        : geom_(geometry), delta_max_(delta_max), hover_(hover), damping_(damping) {}

    Action operator()(const Observation& obs) const {
        JointVector q{{obs[obs_index::joints], obs[obs_index::joints + 1], obs[obs_index::joints + 2]}};
        const double err[3] = {obs[obs_index::to_goal], obs[obs_index::to_goal + 1],
                               obs[obs_index::to_goal + 2] + hover_};
        // Central-difference Jacobian of the cup position.
        double jac[3][3];
        const double h = 1e-6;
        for (std::size_t j = 0; j < 3; ++j) {
            JointVector qp = q;
            JointVector qm = q;
            qp[j] += h;
            qm[j] -= h;
            const Vec3 cp = forward_kinematics(geom_, qp).cup;
            const Vec3 cm = forward_kinematics(geom_, qm).cup;
            jac[0][j] = (cp.x - cm.x) / (2 * h);
            jac[1][j] = (cp.y - cm.y) / (2 * h);
            jac[2][j] = (cp.z - cm.z) / (2 * h);
        }
        // dq = J^T (J J^T + lambda^2 I)^-1 err
        double m[3][3];
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                m[r][c] = (r == c) ? damping_ * damping_ : 0.0;
                for (int k = 0; k < 3; ++k) m[r][c] += jac[r][k] * jac[c][k];
            }
        const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
        double inv[3][3];
        inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
        inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
        inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
        inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
        inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
        inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
        inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
        inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
        inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
        double w[3];
        for (int r = 0; r < 3; ++r) w[r] = inv[r][0] * err[0] + inv[r][1] * err[1] + inv[r][2] * err[2];
        Action a{};
        double biggest = 0.0;
        for (int j = 0; j < 3; ++j) {
            a[j] = jac[0][j] * w[0] + jac[1][j] * w[1] + jac[2][j] * w[2];
            biggest = std::max(biggest, std::abs(a[j]));
        }
        if (biggest > delta_max_)
            for (auto& x : a) x = std::clamp(x * delta_max_ / biggest, -delta_max_, delta_max_);
        return a;
    }

private:
    ArmGeometry geom_;
    double delta_max_;
    double hover_;
    double damping_;
};

// --- run directories ----------------------------------------------------------------------------

struct RunArtifacts {
    std::filesystem::path directory;
    std::filesystem::path checkpoint;
    std::filesystem::path episode_log;
    std::filesystem::path step_log;
    std::filesystem::path manifest;
    TrainingResult training;
    EvalReport evaluation;
};

inline std::string run_manifest_json(const RunConfig& cfg, const TrainingResult& tr, const EvalReport& ev);

/// Trains, evaluates on the shared eval set and writes episodes.csv, steps.csv, checkpoint.srckpt and
/// manifest.json under `dir`. On divergence the partial logs stay on disk and the exception propagates.
inline RunArtifacts run_training(const RunConfig& cfg, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    RunArtifacts art;
    art.directory = dir;
    art.episode_log = dir / "episodes.csv";
    art.step_log = dir / "steps.csv";
    art.checkpoint = dir / "checkpoint.srckpt";
    art.manifest = dir / "manifest.json";

    std::ofstream episodes(art.episode_log, std::ios::binary | std::ios::trunc);
    if (!episodes) throw FormatError("cannot write " + art.episode_log.string());
    episodes << kEpisodeLogHeader << '\n';
    std::ofstream steps;
    if (cfg.write_step_log) {
        steps.open(art.step_log, std::ios::binary | std::ios::trunc);
        if (!steps) throw FormatError("cannot write " + art.step_log.string());
        steps << kStepLogHeader << '\n';
    }
    TrainingObserver obs;
    obs.on_episode = [&](const EpisodeRecord& r) {
        episodes << format_episode_row(r) << '\n';
        episodes.flush();
    };
    if (cfg.write_step_log)
        obs.on_step = [&](int ep, int step, const Action& a, const StepOutcome& o, const Observation&) {
            steps << format_step_row(ep, step, a, o) << '\n';
        };

    art.training = train(cfg, obs);
    save_checkpoint(art.training.agent, art.checkpoint.string());
    art.evaluation = evaluate(art.training.agent, cfg, cfg.eval_seed, cfg.eval_episodes);
    std::ofstream manifest(art.manifest, std::ios::binary | std::ios::trunc);
    manifest << run_manifest_json(cfg, art.training, art.evaluation) << '\n';
    return art;
}

inline std::filesystem::path run_directory(const RunConfig& cfg) {
    return std::filesystem::path(cfg.out_dir) / fmt::format("method_{}_seed_{}", to_char(cfg.method), cfg.seed);
}

// --- comparison ---------------------------------------------------------------------------------

struct ComparisonRow {
    UpdateMethod method = UpdateMethod::A;
    std::uint64_t seed = 0;
    double success_rate = 0.0;
    double mean_reward = 0.0;
    double shake = 0.0;
};

inline constexpr const char* kComparisonHeader = "method,seed,success_rate,mean_reward,shake";

inline std::string format_comparison_row(const ComparisonRow& r) {
    return fmt::format("{},{},{:.17g},{:.17g},{:.17g}", to_char(r.method), r.seed, r.success_rate, r.mean_reward,
                       r.shake);
}

/// Trains and evaluates every (method, seed) cell against the shared eval set, writing comparison.csv and a
/// combined episodes.csv under base.out_dir. Cells run on `base.threads` workers and are fully isolated.
inline std::vector<ComparisonRow> compare(const RunConfig& base, const std::vector<UpdateMethod>& methods,
                                          const std::vector<std::uint64_t>& seeds,
                                          const std::function<void(const ComparisonRow&)>& progress = {}) {
    struct Cell {
        RunConfig cfg;
        ComparisonRow row;
        std::vector<EpisodeRecord> log;
        std::exception_ptr error;
    };
    std::vector<Cell> cells;
    for (auto m : methods)
        for (auto s : seeds) {
            Cell c;
            c.cfg = base;
            c.cfg.method = m;
            c.cfg.seed = s;
            c.cfg.validate();
            cells.push_back(std::move(c));
        }

    std::atomic<std::size_t> next{0};
    std::mutex progress_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            Cell& c = cells[i];
            try {
                RunArtifacts art = run_training(c.cfg, run_directory(c.cfg));
                c.row = {c.cfg.method, c.cfg.seed, art.evaluation.success_rate, art.evaluation.mean_episode_reward,
                         art.evaluation.shake};
                c.log = std::move(art.training.episodes);
                if (progress) {
                    std::lock_guard lock(progress_mutex);
                    progress(c.row);
                }
            } catch (...) {
                c.error = std::current_exception();
            }
        }
    };
    unsigned n_threads = base.threads > 0 ? static_cast<unsigned>(base.threads) : std::thread::hardware_concurrency();
    n_threads = std::max(1u, std::min<unsigned>(n_threads, static_cast<unsigned>(cells.size())));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (const auto& c : cells)
        if (c.error) std::rethrow_exception(c.error);

    std::filesystem::create_directories(base.out_dir);
    std::ofstream table(std::filesystem::path(base.out_dir) / "comparison.csv", std::ios::binary | std::ios::trunc);
    std::ofstream combined(std::filesystem::path(base.out_dir) / "episodes.csv", std::ios::binary | std::ios::trunc);
    table << kComparisonHeader << '\n';
    combined << kEpisodeLogHeader << '\n';
    std::vector<ComparisonRow> rows;
    for (const auto& c : cells) {
        rows.push_back(c.row);
        table << format_comparison_row(c.row) << '\n';
        for (const auto& r : c.log) combined << format_episode_row(r) << '\n';
    }
    return rows;
}

}  // namespace steady_replay

#include "steady_replay/harness/manifest.hpp"
