#pragma once

// Reaching MDP on top of the arm model. Two interaction modes:
//   settle - one decision runs the arm to steady state (adaptive replay update)
//   tick   - one decision is one simulator tick (uniform replay update)

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include "steady_replay/arm_sim.hpp"
#include "steady_replay/errors.hpp"

namespace steady_replay {

using Rng = std::mt19937_64;

inline constexpr std::size_t kObsDim = 20;
inline constexpr std::size_t kActDim = 3;

/// Layout: [0..2] elbow P2, [3..5] wrist P3, [6..8] end-link tip P4, [9..11] cup Pc,
/// [12..14] goal - Pc, [15..17] joints, [18] |goal - Pc|, [19] success flag.
using Observation = std::array<double, kObsDim>;

/// Reference-minus-current joint deltas, rad.
using Action = std::array<double, kActDim>;

namespace obs_index {
inline constexpr std::size_t elbow = 0;
inline constexpr std::size_t wrist = 3;
inline constexpr std::size_t tip = 6;
inline constexpr std::size_t cup = 9;
inline constexpr std::size_t to_goal = 12;
inline constexpr std::size_t joints = 15;
inline constexpr std::size_t distance = 18;
inline constexpr std::size_t flag = 19;
}  // namespace obs_index

enum class StepMode { settle, tick };

struct RewardParams {
    double alpha = 1.0;
    double beta = 5.0;
    double sigma = 0.0;
    double alpha_d = -1.0;
    double beta_d = -1.0;

    void validate() const {
        if (!(alpha > 0)) throw ConfigError("reward alpha must be > 0");
        if (!(beta > 0)) throw ConfigError("reward beta must be > 0");
        if (!(sigma <= 0)) throw ConfigError("reward sigma must be <= 0");
        if (!(alpha_d < 0)) throw ConfigError("reward alpha_d must be < 0");
        if (!(beta_d < 0)) throw ConfigError("reward beta_d must be < 0");
    }
};

struct EnvConfig {
    ArmGeometry geometry;
    JointLimits limits;
    MotionParams motion;
    RewardParams reward;
    double delta_max = 0.2;
    double d_goal = 0.010;
    int n_hold = 5;
    int stored_steps_per_episode = 200;
    int max_attempted_steps = 400;
    double rho_min = 0.15;
    double rho_max = 0.30;
    double phi_min = deg(-60.0);
    double phi_max = deg(60.0);
    double object_radius = 0.020;
    double object_height = 0.040;
    JointVector default_joints{{0.0, deg(45.0), deg(-20.0)}};

    void validate() const {
        geometry.validate();
        limits.validate();
        motion.validate();
        reward.validate();
        if (!(delta_max > 0)) throw ConfigError("delta_max must be positive");
        if (!(d_goal > 0)) throw ConfigError("d_goal must be positive");
        if (n_hold < 1) throw ConfigError("n_hold must be at least 1");
        if (stored_steps_per_episode < 1) throw ConfigError("stored_steps_per_episode must be at least 1");
        if (max_attempted_steps < stored_steps_per_episode)
            throw ConfigError("max_attempted_steps must be >= stored_steps_per_episode");
        if (!(0 <= rho_min && rho_min <= rho_max)) throw ConfigError("object radial range is invalid");
        if (!(rho_max <= geometry.reach())) throw ConfigError("object radial range exceeds the arm reach");
        if (!(phi_min <= phi_max)) throw ConfigError("object azimuth range is invalid");
        if (!(object_radius > 0 && object_height > 0)) throw ConfigError("object size must be positive");
        if (!limits.contains(default_joints)) throw ConfigError("default joints violate the joint limits");
    }
};

struct Distances {
    double d_h = 0.0;
    double d_v = 0.0;
    Vec3 goal;
};

inline Distances distances(const LinkPoints& points, const ObjectState& obj) {
    const Vec3 goal = obj.top_center();
    return {std::hypot(points.cup.x - goal.x, points.cup.y - goal.y), std::abs(points.cup.z - goal.z), goal};
}

/// r_d = alpha_d * d_h + beta_d * d_v, never positive.
inline double potential(double d_h, double d_v, const RewardParams& p) { return p.alpha_d * d_h + p.beta_d * d_v; }

inline double reward(const Distances& prev, const Distances& next, double d_o, const RewardParams& p) {
    const double r_next = potential(next.d_h, next.d_v, p);
    const double r_prev = potential(prev.d_h, prev.d_v, p);
    return p.alpha * r_next + p.beta * (r_next - r_prev) + p.sigma * d_o;
}

inline Observation encode_observation(const ArmGeometry& geom, const JointVector& q, const ObjectState& obj,
                                      bool flag) {
    const LinkPoints pts = forward_kinematics(geom, q);
    const Vec3 to_goal = obj.top_center() - pts.cup;
    Observation o{};
    auto put = [&o](std::size_t at, const Vec3& v) {
        o[at] = v.x;
        o[at + 1] = v.y;
        o[at + 2] = v.z;
    };
    put(obs_index::elbow, pts.elbow);
    put(obs_index::wrist, pts.wrist);
    put(obs_index::tip, pts.tip);
    put(obs_index::cup, pts.cup);
    put(obs_index::to_goal, to_goal);
    for (std::size_t i = 0; i < 3; ++i) o[obs_index::joints + i] = q[i];
    o[obs_index::distance] = std::sqrt(to_goal.x * to_goal.x + to_goal.y * to_goal.y + to_goal.z * to_goal.z);
    o[obs_index::flag] = flag ? 1.0 : 0.0;
    return o;
}

/// Object base center, uniform in radius and azimuth over the configured sector.
inline Vec3 sample_object_position(const EnvConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> rho_dist(cfg.rho_min, cfg.rho_max);
    std::uniform_real_distribution<double> phi_dist(cfg.phi_min, cfg.phi_max);
    const double rho = rho_dist(rng);
    const double phi = phi_dist(rng);
    return {rho * std::cos(phi), rho * std::sin(phi), 0.0};
}

struct StepOutcome {
    Observation next_obs{};
    double reward = 0.0;
    bool done = false;
    bool success = false;
    bool stored = true;
    bool stuck = false;
    int ticks = 0;
    double d_o = 0.0;
    Distances prev;
    Distances next;
    JointVector reference;  // clamped
};

class ArmEnv {
public:
    explicit ArmEnv(EnvConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        object_.radius = cfg_.object_radius;
        object_.height = cfg_.object_height;
        q_ = cfg_.default_joints;
    }

    Observation reset(Rng& rng) { return reset_with_object(sample_object_position(cfg_, rng)); }

    Observation reset_with_object(const Vec3& center) {
        q_ = cfg_.default_joints;
        object_ = ObjectState{{center.x, center.y, 0.0}, cfg_.object_radius, cfg_.object_height};
        hold_ = 0;
        flag_ = false;
        done_ = false;
        stored_steps_ = 0;
        attempted_steps_ = 0;
        return observation();
    }

    StepOutcome step(const Action& a, StepMode mode) {
        return mode == StepMode::settle ? step_settle(a) : step_tick(a);
    }

    /// Runs the arm to steady state; stuck-at-boundary transitions come back with stored = false.
    StepOutcome step_settle(const Action& a) {
        const ClampResult ref = begin_step(a);
        StepOutcome out;
        out.reference = ref.q;
        out.prev = distances(forward_kinematics(cfg_.geometry, q_), object_);
        const SettleResult s = settle(q_, ref.q, ref.clipped, cfg_.motion,
                                      [&](const JointVector& before, const JointVector& after) {
                                          push_object(before, after, out.d_o);
                                      });
        q_ = s.q_steady;
        out.ticks = s.ticks;
        out.stuck = s.stuck_at_boundary;
        out.stored = !s.stuck_at_boundary;
        finish_step(out);
        return out;
    }

    /// Exactly one tick of motion; every transition is stored.
    StepOutcome step_tick(const Action& a) {
        const ClampResult ref = begin_step(a);
        StepOutcome out;
        out.reference = ref.q;
        out.prev = distances(forward_kinematics(cfg_.geometry, q_), object_);
        const JointVector next = tick(q_, ref.q, cfg_.motion.omega_max, cfg_.motion.dt);
        push_object(q_, next, out.d_o);
        q_ = next;
        out.ticks = 1;
        out.stored = true;
        finish_step(out);
        return out;
    }

    Observation observation() const { return encode_observation(cfg_.geometry, q_, object_, flag_); }

    const EnvConfig& config() const { return cfg_; }
    const JointVector& joints() const { return q_; }
    const ObjectState& object() const { return object_; }
    bool done() const { return done_; }
    bool flag() const { return flag_; }
    int hold_count() const { return hold_; }
    int stored_steps() const { return stored_steps_; }
    int attempted_steps() const { return attempted_steps_; }

private:
    ClampResult begin_step(const Action& a) const {
        if (done_) throw ContractViolation("step called on a finished episode");
        JointVector raw = q_;
        for (std::size_t i = 0; i < kActDim; ++i) {
            if (!(std::abs(a[i]) <= cfg_.delta_max))
                throw ContractViolation("action component " + std::to_string(i) + " outside [-delta_max, delta_max]");
            raw[i] += a[i];
        }
        return clamp_reference(raw, cfg_.limits);
    }

    void push_object(const JointVector& before, const JointVector& after, double& d_o) {
        const Vec3 prev_cup = forward_kinematics(cfg_.geometry, before).cup;
        const Vec3 new_cup = forward_kinematics(cfg_.geometry, after).cup;
        const PushResult push = resolve_object_push(prev_cup, new_cup, object_);
        object_ = push.object;
        d_o += push.displacement;
    }

    void finish_step(StepOutcome& out) {
        out.next = distances(forward_kinematics(cfg_.geometry, q_), object_);
        out.reward = steady_replay::reward(out.prev, out.next, out.d_o, cfg_.reward);
        ++attempted_steps_;
        if (out.stored) ++stored_steps_;

        const Observation probe = encode_observation(cfg_.geometry, q_, object_, false);
        hold_ = probe[obs_index::distance] <= cfg_.d_goal ? hold_ + 1 : 0;
        flag_ = hold_ >= cfg_.n_hold;
        out.success = flag_;
        done_ = flag_ || stored_steps_ >= cfg_.stored_steps_per_episode ||
                attempted_steps_ >= cfg_.max_attempted_steps;
        out.done = done_;
        out.next_obs = observation();
    }

    EnvConfig cfg_;
    JointVector q_;
    ObjectState object_;
    int hold_ = 0;
    bool flag_ = false;
    bool done_ = false;
    int stored_steps_ = 0;
    int attempted_steps_ = 0;
};

}  // namespace steady_replay
