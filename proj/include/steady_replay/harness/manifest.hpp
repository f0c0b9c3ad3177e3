#pragma once

#include <string>

#include <json.hpp>

#include "steady_replay/harness/experiment.hpp"
#include "steady_replay/version.hpp"

namespace steady_replay {

inline nlohmann::ordered_json config_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    const EnvConfig e = c.env_for_method();
    j["profile"] = to_string(c.profile);
    j["method"] = std::string(1, to_char(c.method));
    j["episodes"] = c.episodes;
    j["eval_episodes"] = c.eval_episodes;
    j["agent"] = {{"gamma", c.agent.gamma},
                  {"tau", c.agent.tau},
                  {"lr_actor", c.agent.lr_actor},
                  {"lr_critic", c.agent.lr_critic},
                  {"batch_size", c.agent.batch_size},
                  {"warmup_transitions", c.agent.warmup_transitions},
                  {"replay_capacity", c.agent.replay_capacity},
                  {"hidden", c.agent.hidden},
                  {"ou_theta", c.agent.ou_theta},
                  {"ou_sigma0", c.agent.ou_sigma0},
                  {"ou_sigma_floor", c.agent.ou_sigma_floor},
                  {"noise_decay_episodes", c.agent.noise_decay_episodes}};
    j["env"] = {{"delta_max", e.delta_max},
                {"d_goal", e.d_goal},
                {"n_hold", e.n_hold},
                {"stored_steps_per_episode", e.stored_steps_per_episode},
                {"max_attempted_steps", e.max_attempted_steps},
                {"omega_max", e.motion.omega_max},
                {"dt", e.motion.dt},
                {"settle_eps", e.motion.eps},
                {"settle_max_ticks", e.motion.max_ticks},
                {"object_rho", {e.rho_min, e.rho_max}},
                {"object_phi_rad", {e.phi_min, e.phi_max}},
                {"object_radius", e.object_radius},
                {"object_height", e.object_height},
                {"geometry", {e.geometry.h1, e.geometry.l2, e.geometry.l3, e.geometry.l4, e.geometry.lc}},
                {"limits_min_rad", e.limits.min},
                {"limits_max_rad", e.limits.max},
                {"default_joints_rad", e.default_joints.q}};
    j["reward"] = {{"alpha", e.reward.alpha},
                   {"beta", e.reward.beta},
                   {"sigma", e.reward.sigma},
                   {"alpha_d", e.reward.alpha_d},
                   {"beta_d", e.reward.beta_d}};
    return j;
}

inline nlohmann::ordered_json eval_json(const EvalReport& ev) {
    return {{"success_rate", ev.success_rate},
            {"mean_episode_reward", ev.mean_episode_reward},
            {"shake", ev.shake},
            {"episodes", ev.episodes.size()}};
}

inline std::string run_manifest_json(const RunConfig& cfg, const TrainingResult& tr, const EvalReport& ev) {
    nlohmann::ordered_json j;
    j["tool"] = "steadyreplay";
    j["version"] = kVersion;
    j["seeds"] = {{"training", cfg.seed}, {"eval", cfg.eval_seed}};
    j["config"] = config_json(cfg);
    int successes = 0;
    for (const auto& r : tr.episodes) successes += r.success ? 1 : 0;
    j["training"] = {{"episodes", tr.episodes.size()},
                     {"successful_episodes", successes},
                     {"replay_pushes", tr.pushes},
                     {"train_steps", tr.train_steps}};
    j["evaluation"] = eval_json(ev);
    return j.dump(2);
}

}  // namespace steady_replay
