#pragma once

// Kinematic model of the simplified suction arm: base yaw plus two links whose
// elevations are measured from horizontal, a horizontal end link and a vertical
// suction cup. Joints are rate limited and the cylinder target can be pushed.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>

#include "steady_replay/errors.hpp"

namespace steady_replay {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    double horizontal_norm() const { return std::hypot(x, y); }
};

inline constexpr double deg(double degrees) { return degrees * std::numbers::pi / 180.0; }

struct ArmGeometry {
    double h1 = 0.106;  // base to shoulder
    double l2 = 0.142;
    double l3 = 0.158;
    double l4 = 0.056;  // horizontal end link
    double lc = 0.030;  // suction cup drop

    void validate() const {
        if (!(h1 > 0 && l2 > 0 && l3 > 0 && l4 > 0 && lc > 0)) throw ConfigError("arm lengths must be positive");
    }
    double reach() const { return l2 + l3 + l4; }
};

/// Commanded joints: base yaw, absolute elevation of link2, absolute elevation of link3.
struct JointVector {
    std::array<double, 3> q{};

    double& operator[](std::size_t i) { return q[i]; }
    double operator[](std::size_t i) const { return q[i]; }
    friend bool operator==(const JointVector&, const JointVector&) = default;

    double max_abs_diff(const JointVector& other) const {
        double m = 0.0;
        for (std::size_t i = 0; i < 3; ++i) m = std::max(m, std::abs(q[i] - other.q[i]));
        return m;
    }
};

struct JointLimits {
    std::array<double, 3> min{-std::numbers::pi / 2, deg(0.0), deg(-90.0)};
    std::array<double, 3> max{std::numbers::pi / 2, deg(85.0), deg(30.0)};

    void validate() const {
        for (std::size_t i = 0; i < 3; ++i)
            if (!(min[i] < max[i])) throw ConfigError("joint limit min must be below max for joint " + std::to_string(i + 1));
    }
    bool contains(const JointVector& j) const {
        for (std::size_t i = 0; i < 3; ++i)
            if (j[i] < min[i] || j[i] > max[i]) return false;
        return true;
    }
};

struct LinkPoints {
    Vec3 shoulder;  // P1
    Vec3 elbow;     // P2
    Vec3 wrist;     // P3
    Vec3 tip;       // P4
    Vec3 cup;       // Pc
};

/// Cylinder standing on the ground; center is the base center (z = 0).
struct ObjectState {
    Vec3 center;
    double radius = 0.020;
    double height = 0.040;

    Vec3 top_center() const { return {center.x, center.y, center.z + height}; }
    friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct SettleResult {
    JointVector q_steady;
    int ticks = 0;
    bool stuck_at_boundary = false;
};

struct MotionParams {
    double omega_max = 1.0;    // rad/s
    double dt = 1.0 / 20.0;    // s
    double eps = 1e-3;         // steady-state threshold, rad
    int max_ticks = 1000;

    double step() const { return omega_max * dt; }
    void validate() const {
        if (!(omega_max > 0)) throw ConfigError("omega_max must be positive");
        if (!(dt > 0)) throw ConfigError("dt must be positive");
        if (!(eps > 0)) throw ConfigError("eps must be positive");
        if (max_ticks < 1) throw ConfigError("settle_max_ticks must be at least 1");
    }
};

inline LinkPoints forward_kinematics(const ArmGeometry& g, const JointVector& q) {
    const Vec3 radial{std::cos(q[0]), std::sin(q[0]), 0.0};
    const Vec3 up{0.0, 0.0, 1.0};
    LinkPoints p;
    p.shoulder = {0.0, 0.0, g.h1};
    p.elbow = p.shoulder + g.l2 * (std::cos(q[1]) * radial + std::sin(q[1]) * up);
    p.wrist = p.elbow + g.l3 * (std::cos(q[2]) * radial + std::sin(q[2]) * up);
    p.tip = p.wrist + g.l4 * radial;
    p.cup = p.tip - g.lc * up;
    return p;
}

/// Relative joint4 rotation that keeps link4 horizontal.
inline double joint4_angle(const JointVector& q) { return -q[2]; }

struct ClampResult {
    JointVector q;
    std::array<bool, 3> clipped{};

    bool any_clipped() const { return clipped[0] || clipped[1] || clipped[2]; }
};

inline ClampResult clamp_reference(const JointVector& q_ref, const JointLimits& limits) {
    ClampResult r{q_ref, {}};
    for (std::size_t i = 0; i < 3; ++i) {
        const double c = std::clamp(q_ref[i], limits.min[i], limits.max[i]);
        r.clipped[i] = c != q_ref[i];
        r.q[i] = c;
    }
    return r;
}

/// One rate-limited motion step toward the reference.
inline JointVector tick(const JointVector& q, const JointVector& q_ref, double omega_max, double dt) {
    const double step = omega_max * dt;
    JointVector next = q;
    for (std::size_t i = 0; i < 3; ++i) {
        const double gap = q_ref[i] - q[i];
        next[i] = std::abs(gap) <= step ? q_ref[i] : q[i] + std::copysign(step, gap);
    }
    return next;
}

/// Ticks until the per-tick joint change drops below eps. on_tick(before, after) sees every tick.
template <class OnTick>
SettleResult settle(const JointVector& q, const JointVector& q_ref, const std::array<bool, 3>& clipped,
                    const MotionParams& motion, OnTick&& on_tick) {
    JointVector prev = q;
    for (int t = 1; t <= motion.max_ticks; ++t) {
        const JointVector next = tick(prev, q_ref, motion.omega_max, motion.dt);
        on_tick(prev, next);
        if (next.max_abs_diff(prev) < motion.eps) {
            const bool any_clip = clipped[0] || clipped[1] || clipped[2];
            return {next, t, any_clip && next.max_abs_diff(q) < motion.eps};
        }
        prev = next;
    }
    throw SettleTimeout("settle: joints still moving after " + std::to_string(motion.max_ticks) + " ticks");
}

inline SettleResult settle(const JointVector& q, const JointVector& q_ref, const std::array<bool, 3>& clipped,
                           const MotionParams& motion) {
    return settle(q, q_ref, clipped, motion, [](const JointVector&, const JointVector&) {});
}

struct PushResult {
    ObjectState object;
    double displacement = 0.0;
};

/// Horizontal penetration resolution: a cup inside the cylinder shoves it until the cup sits on the side wall.
inline PushResult resolve_object_push(const Vec3& prev_cup, const Vec3& new_cup, const ObjectState& obj) {
    if (!(new_cup.z < obj.height)) return {obj, 0.0};
    const double dx = new_cup.x - obj.center.x;
    const double dy = new_cup.y - obj.center.y;
    const double rho = std::hypot(dx, dy);
    if (!(rho < obj.radius)) return {obj, 0.0};

    double ux = 0.0;
    double uy = 0.0;
    if (rho > 0.0) {
        ux = -dx / rho;
        uy = -dy / rho;
    } else {
        const double mx = new_cup.x - prev_cup.x;
        const double my = new_cup.y - prev_cup.y;
        const double m = std::hypot(mx, my);
        if (m > 0.0) {
            ux = mx / m;
            uy = my / m;
        } else {
            ux = 1.0;
        }
    }
    ObjectState moved = obj;
    moved.center.x = new_cup.x + obj.radius * ux;
    moved.center.y = new_cup.y + obj.radius * uy;
    const double d_o = std::hypot(moved.center.x - obj.center.x, moved.center.y - obj.center.y);
    if (d_o == 0.0) return {obj, 0.0};
    return {moved, d_o};
}

}  // namespace steady_replay
