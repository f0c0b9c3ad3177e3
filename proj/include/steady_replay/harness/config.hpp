#pragma once

// Flat `key = value` run configuration. Unknown keys are rejected; missing keys fall back to the
// selected profile. Angles are given in degrees in the file and stored in radians.

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "steady_replay/ddpg.hpp"
#include "steady_replay/env.hpp"
#include "steady_replay/errors.hpp"
#include "steady_replay/replay.hpp"

namespace steady_replay {

enum class Profile { paper, desk };

inline Profile parse_profile(const std::string& s) {
    if (s == "paper") return Profile::paper;
    if (s == "desk") return Profile::desk;
    throw ConfigError("unknown profile '" + s + "' (expected paper or desk)");
}

inline const char* to_string(Profile p) { return p == Profile::paper ? "paper" : "desk"; }

struct RunConfig {
    Profile profile = Profile::paper;
    EnvConfig env;
    AgentConfig agent;
    UpdateMethod method = UpdateMethod::A;
    int episodes = 1500;
    std::uint64_t seed = 1;
    std::uint64_t eval_seed = 4242;
    int eval_episodes = 100;
    double push_penalty = -10.0;  // sigma used by methods C and D
    std::string out_dir = "runs";
    bool record_wall_time = false;
    bool write_step_log = true;
    int threads = 0;  // compare workers; 0 = hardware concurrency

    /// Environment config with the method's sigma applied.
    EnvConfig env_for_method() const {
        EnvConfig e = env;
        e.reward.sigma = penalizes_push(method) ? push_penalty : 0.0;
        return e;
    }

    void validate() const {
        if (episodes < 1) throw ConfigError("episodes must be at least 1");
        if (eval_episodes < 1) throw ConfigError("eval_episodes must be at least 1");
        if (!(push_penalty < 0)) throw ConfigError("push_penalty must be negative");
        if (threads < 0) throw ConfigError("threads must be >= 0");
        env_for_method().validate();
        agent.validate();
        if (agent.delta_max != env.delta_max) throw ConfigError("agent and environment delta_max differ");
    }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

inline double to_double(const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("'" + v + "' is not a number");
    return out;
}

template <class Int>
Int to_int(const std::string& v) {
    Int out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size()) throw ConfigError("'" + v + "' is not an integer");
    return out;
}

inline bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("'" + v + "' is not a boolean");
}

inline std::vector<std::size_t> to_sizes(const std::string& v) {
    std::vector<std::size_t> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) out.push_back(to_int<std::size_t>(trim(part)));
    if (out.empty()) throw ConfigError("'" + v + "' is not a size list");
    return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto real = [&t](const char* key, auto member) {
            t[key] = [member](RunConfig& c, const std::string& v) { member(c) = to_double(v); };
        };
        auto angle = [&t](const char* key, auto member) {
            t[key] = [member](RunConfig& c, const std::string& v) { member(c) = deg(to_double(v)); };
        };
        auto integer = [&t](const char* key, auto member) {
            t[key] = [member](RunConfig& c, const std::string& v) { member(c) = to_int<int>(v); };
        };

        t["profile"] = [](RunConfig& c, const std::string& v) { c.profile = parse_profile(v); };
        t["method"] = [](RunConfig& c, const std::string& v) { c.method = parse_method(v); };
        integer("episodes", [](RunConfig& c) -> int& { return c.episodes; });
        t["seed"] = [](RunConfig& c, const std::string& v) { c.seed = to_int<std::uint64_t>(v); };
        t["eval_seed"] = [](RunConfig& c, const std::string& v) { c.eval_seed = to_int<std::uint64_t>(v); };
        integer("eval_episodes", [](RunConfig& c) -> int& { return c.eval_episodes; });
        t["out_dir"] = [](RunConfig& c, const std::string& v) { c.out_dir = v; };
        t["record_wall_time"] = [](RunConfig& c, const std::string& v) { c.record_wall_time = to_bool(v); };
        t["write_step_log"] = [](RunConfig& c, const std::string& v) { c.write_step_log = to_bool(v); };
        integer("threads", [](RunConfig& c) -> int& { return c.threads; });

        real("gamma", [](RunConfig& c) -> double& { return c.agent.gamma; });
        real("tau", [](RunConfig& c) -> double& { return c.agent.tau; });
        real("lr_actor", [](RunConfig& c) -> double& { return c.agent.lr_actor; });
        real("lr_critic", [](RunConfig& c) -> double& { return c.agent.lr_critic; });
        integer("batch_size", [](RunConfig& c) -> int& { return c.agent.batch_size; });
        integer("warmup_transitions", [](RunConfig& c) -> int& { return c.agent.warmup_transitions; });
        t["replay_capacity"] = [](RunConfig& c, const std::string& v) {
            c.agent.replay_capacity = to_int<std::size_t>(v);
        };
        t["scale_inputs"] = [](RunConfig& c, const std::string& v) {
            c.agent.input_scale = to_bool(v) ? default_input_scale() : unit_input_scale();
        };
        t["hidden"] = [](RunConfig& c, const std::string& v) { c.agent.hidden = to_sizes(v); };
        real("ou_theta", [](RunConfig& c) -> double& { return c.agent.ou_theta; });
        real("ou_sigma0", [](RunConfig& c) -> double& { return c.agent.ou_sigma0; });
        real("ou_sigma_floor", [](RunConfig& c) -> double& { return c.agent.ou_sigma_floor; });
        real("noise_decay_episodes", [](RunConfig& c) -> double& { return c.agent.noise_decay_episodes; });
        t["delta_max"] = [](RunConfig& c, const std::string& v) { c.env.delta_max = c.agent.delta_max = to_double(v); };

        real("d_goal", [](RunConfig& c) -> double& { return c.env.d_goal; });
        integer("n_hold", [](RunConfig& c) -> int& { return c.env.n_hold; });
        integer("stored_steps_per_episode", [](RunConfig& c) -> int& { return c.env.stored_steps_per_episode; });
        integer("max_attempted_steps", [](RunConfig& c) -> int& { return c.env.max_attempted_steps; });
        real("omega_max", [](RunConfig& c) -> double& { return c.env.motion.omega_max; });
        real("dt", [](RunConfig& c) -> double& { return c.env.motion.dt; });
        real("settle_eps", [](RunConfig& c) -> double& { return c.env.motion.eps; });
        integer("settle_max_ticks", [](RunConfig& c) -> int& { return c.env.motion.max_ticks; });

        real("reward_alpha", [](RunConfig& c) -> double& { return c.env.reward.alpha; });
        real("reward_beta", [](RunConfig& c) -> double& { return c.env.reward.beta; });
        real("reward_alpha_d", [](RunConfig& c) -> double& { return c.env.reward.alpha_d; });
        real("reward_beta_d", [](RunConfig& c) -> double& { return c.env.reward.beta_d; });
        real("push_penalty", [](RunConfig& c) -> double& { return c.push_penalty; });

        real("object_rho_min", [](RunConfig& c) -> double& { return c.env.rho_min; });
        real("object_rho_max", [](RunConfig& c) -> double& { return c.env.rho_max; });
        angle("object_phi_min_deg", [](RunConfig& c) -> double& { return c.env.phi_min; });
        angle("object_phi_max_deg", [](RunConfig& c) -> double& { return c.env.phi_max; });
        real("object_radius", [](RunConfig& c) -> double& { return c.env.object_radius; });
        real("object_height", [](RunConfig& c) -> double& { return c.env.object_height; });

        real("arm_h1", [](RunConfig& c) -> double& { return c.env.geometry.h1; });
        real("arm_l2", [](RunConfig& c) -> double& { return c.env.geometry.l2; });
        real("arm_l3", [](RunConfig& c) -> double& { return c.env.geometry.l3; });
        real("arm_l4", [](RunConfig& c) -> double& { return c.env.geometry.l4; });
        real("arm_lc", [](RunConfig& c) -> double& { return c.env.geometry.lc; });
        for (int j = 0; j < 3; ++j) {
            const std::string n = std::to_string(j + 1);
            t["q" + n + "_min_deg"] = [j](RunConfig& c, const std::string& v) { c.env.limits.min[j] = deg(to_double(v)); };
            t["q" + n + "_max_deg"] = [j](RunConfig& c, const std::string& v) { c.env.limits.max[j] = deg(to_double(v)); };
            t["q" + n + "_default_deg"] = [j](RunConfig& c, const std::string& v) {
                c.env.default_joints[j] = deg(to_double(v));
            };
        }
        return t;
    }();
    return table;
}

}  // namespace config_detail

inline double ou_floor_ratio(Profile p) { return p == Profile::paper ? 0.05 : 0.015; }

/// Defaults for a profile before any file keys are applied.
inline RunConfig profile_defaults(Profile p) {
    RunConfig c;
    c.profile = p;
    if (p == Profile::paper) {
        c.agent.hidden = {400, 300};
        c.episodes = 1500;
        c.env.stored_steps_per_episode = 200;
    } else {
        // Fewer, shorter episodes: faster target tracking and a lower noise floor so late policies can settle.
        c.agent.hidden = {64, 64};
        c.agent.tau = 5e-3;
        c.episodes = 400;
        c.env.stored_steps_per_episode = 60;
    }
    c.agent.batch_size = 128;
    c.agent.noise_decay_episodes = 0.8 * c.episodes;
    c.agent.ou_sigma0 = 0.3 * c.agent.delta_max;
    c.agent.ou_sigma_floor = ou_floor_ratio(p) * c.agent.delta_max;
    return c;
}

struct ConfigEntry {
    std::string key;
    std::string value;
    std::size_t line = 0;
};

inline std::vector<ConfigEntry> parse_config_entries(std::istream& in) {
    std::vector<ConfigEntry> entries;
    std::map<std::string, std::size_t> seen;
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (line_no == 1 && raw.size() >= 3 && raw.compare(0, 3, "\xEF\xBB\xBF") == 0) raw.erase(0, 3);
        const auto hash = raw.find('#');
        const std::string line = config_detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected `key = value`", line_no);
        ConfigEntry e{config_detail::trim(line.substr(0, eq)), config_detail::trim(line.substr(eq + 1)), line_no};
        if (e.key.empty()) throw ConfigError("empty key", line_no);
        if (!config_detail::setters().contains(e.key)) throw ConfigError("unknown key '" + e.key + "'", line_no);
        if (auto it = seen.find(e.key); it != seen.end())
            throw ConfigError("duplicate key '" + e.key + "' (first on line " + std::to_string(it->second) + ")",
                              line_no);
        seen[e.key] = line_no;
        entries.push_back(std::move(e));
    }
    return entries;
}

/// Builds a validated config. Precedence: profile_override > `profile` key > paper.
/// noise_decay_episodes defaults to 0.8 * episodes; the OU amplitudes scale with delta_max
/// (0.3 at the start, 0.05 floor for paper, 0.015 floor for desk).
inline RunConfig build_config(const std::vector<ConfigEntry>& entries, std::optional<Profile> profile_override = {}) {
    Profile profile = Profile::paper;
    std::map<std::string, const ConfigEntry*> by_key;
    for (const auto& e : entries) by_key[e.key] = &e;
    if (auto it = by_key.find("profile"); it != by_key.end()) {
        try {
            profile = parse_profile(it->second->value);
        } catch (const ConfigError& err) {
            throw ConfigError(err.what(), it->second->line);
        }
    }
    if (profile_override) profile = *profile_override;

    RunConfig c = profile_defaults(profile);
    for (const auto& e : entries) {
        if (e.key == "profile") continue;
        try {
            config_detail::setters().at(e.key)(c, e.value);
        } catch (const ConfigError& err) {
            throw ConfigError(e.key + ": " + err.what(), e.line);
        }
    }
    if (!by_key.contains("noise_decay_episodes")) c.agent.noise_decay_episodes = 0.8 * c.episodes;
    if (!by_key.contains("ou_sigma0")) c.agent.ou_sigma0 = 0.3 * c.agent.delta_max;
    if (!by_key.contains("ou_sigma_floor")) c.agent.ou_sigma_floor = ou_floor_ratio(profile) * c.agent.delta_max;
    try {
        c.validate();
    } catch (const ConfigError& err) {
        // Attribute range violations to the offending line when the message names a key we saw.
        std::size_t line = 0;
        const std::string msg = err.what();
        for (const auto& e : entries)
            if (msg.find(e.key) != std::string::npos) line = e.line;
        throw ConfigError(msg, line);
    }
    return c;
}

inline RunConfig parse_config(const std::string& text, std::optional<Profile> profile_override = {}) {
    std::istringstream in(text);
    return build_config(parse_config_entries(in), profile_override);
}

inline RunConfig load_config(const std::string& path, std::optional<Profile> profile_override = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    return build_config(parse_config_entries(in), profile_override);
}

}  // namespace steady_replay
