#pragma once

// Bilateral teleoperation signal flow.
//
// Forward path: hand velocity -> low-pass (alpha_m) -> scaled by g_control and
// integrated into the trap position, clamped to the workspace.
// Feedback path: model force -> low-pass (alpha_f) -> virtual damping on the
// filtered hand velocity -> scaled by g_hand for the device.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "otdt/dynamics.hpp"
#include "otdt/error.hpp"
#include "otdt/force_model.hpp"
#include "otdt/vec3.hpp"

namespace otdt {

enum class Device { left, right };

inline constexpr std::string_view to_string(Device d) { return d == Device::left ? "left" : "right"; }

inline std::optional<Device> device_from_string(std::string_view s) {
    if (s == "left") return Device::left;
    if (s == "right") return Device::right;
    return std::nullopt;
}

inline constexpr double kGHandMin = 0.0022;
inline constexpr double kGHandMax = 0.0030;

struct TeleopConfig {
    double alpha_m = 0.05;
    double alpha_f = 0.05;
    double g_control = 50.0;  ///< µm per hand unit
    double g_hand = 0.0026;
    double damping_b = 1.0;   ///< pN·s per hand unit
    double f_warn = 8.0;      ///< pN
    double d_loss = 0.0;      ///< µm
    bool allow_g_hand_override = false;

    friend bool operator==(const TeleopConfig&, const TeleopConfig&) = default;

    void validate(const OpticalForceParams& params) const {
        if (!(alpha_m > 0.0 && alpha_m <= 1.0)) throw ValidationError("teleop.alpha_m", "must lie in (0, 1]");
        if (!(alpha_f > 0.0 && alpha_f <= 1.0)) throw ValidationError("teleop.alpha_f", "must lie in (0, 1]");
        if (!std::isfinite(g_control)) throw ValidationError("teleop.g_control", "must be finite");
        if (!std::isfinite(g_hand) || g_hand < 0.0) throw ValidationError("teleop.g_hand", "must be finite and >= 0");
        if (!allow_g_hand_override && (g_hand < kGHandMin || g_hand > kGHandMax))
            throw ValidationError("teleop.g_hand", "outside [0.0022, 0.0030]; set allow_g_hand_override");
        if (!std::isfinite(damping_b) || damping_b < 0.0)
            throw ValidationError("teleop.damping_b", "must be finite and >= 0");
        if (!(f_warn > 0.0)) throw ValidationError("teleop.f_warn", "must be > 0");
        if (!(d_loss > params.delta)) throw ValidationError("teleop.d_loss", "must exceed force delta");
    }
};

struct HandInput {
    Device device = Device::left;
    Vec3 velocity;          ///< hand units / s
    double timestamp = 0.0; ///< s
};

struct LowPassState {
    Vec3 y_prev;

    friend bool operator==(const LowPassState&, const LowPassState&) = default;
};

struct LowPassResult {
    LowPassState state;
    Vec3 y;
};

/// y = y_prev + alpha (x - y_prev).
inline LowPassResult lowpass_step(const LowPassState& state, const Vec3& x, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ParameterError("filter alpha must lie in (0, 1]");
    const Vec3 y = state.y_prev + alpha * (x - state.y_prev);
    return {{y}, y};
}

/// Incremental trap motion, clamped componentwise to the workspace.
inline Trap update_trap(const Trap& trap, const Vec3& filtered_vel, double g_control, double dt,
                        const Aabb& workspace) {
    if (!(dt > 0.0)) throw ValidationError("dt", "must be > 0");
    Trap out = trap;
    out.position = clamp(trap.position + filtered_vel * (g_control * dt), workspace.min, workspace.max);
    return out;
}

struct HapticOutput {
    Vec3 f_hand;     ///< device-scale units
    Vec3 f_raw;      ///< pN
    Vec3 f_filtered; ///< pN
    Vec3 f_damped;   ///< pN, pre-scaled rendered force
    bool warning = false;
    bool trap_lost = false;
};

struct RenderResult {
    LowPassState filter;
    HapticOutput output;
};

inline RenderResult render_force(const Vec3& f_raw, const LowPassState& filter, const TeleopConfig& cfg,
                                 const Vec3& hand_vel_filtered) {
    const auto [state, f_f] = lowpass_step(filter, f_raw, cfg.alpha_f);
    RenderResult r{state, {}};
    r.output.f_raw = f_raw;
    r.output.f_filtered = f_f;
    r.output.f_damped = f_f - cfg.damping_b * hand_vel_filtered;
    r.output.f_hand = cfg.g_hand * r.output.f_damped;
    r.output.warning = norm(f_raw) >= cfg.f_warn;
    return r;
}

/// Trap-side reaction felt on one device: minus the optical force exerted on
/// the robot by that device's traps.
inline Vec3 raw_force(const MsdmWrench& wrench, std::span<const SphereElement> elements,
                      std::span<const Device> trap_devices, Device device) {
    Vec3 sum;
    for (std::size_t i = 0; i < elements.size() && i < wrench.per_element.size(); ++i) {
        const auto& t = elements[i].assigned_trap;
        if (t && *t < trap_devices.size() && trap_devices[*t] == device) sum += wrench.per_element[i];
    }
    return -sum;
}

/// Smallest distance between each trap and the elements assigned to it;
/// nullopt for traps driving nothing.
inline std::vector<std::optional<double>> trap_element_distances(
    std::span<const Trap> traps, std::span<const SphereElement> elements,
    std::span<const WorldSphere> world) {
    std::vector<std::optional<double>> out(traps.size());
    for (std::size_t i = 0; i < elements.size() && i < world.size(); ++i) {
        const auto& t = elements[i].assigned_trap;
        if (!t || *t >= traps.size()) continue;
        const double d = distance(traps[*t].position, world[i].center);
        if (!out[*t] || d < *out[*t]) out[*t] = d;
    }
    return out;
}

/// Minimum over all assigned trap/element pairs; 0 when nothing is assigned.
inline double trap_center_distance(std::span<const Trap> traps, std::span<const SphereElement> elements,
                                   std::span<const WorldSphere> world) {
    std::optional<double> best;
    for (const auto& d : trap_element_distances(traps, elements, world))
        if (d && (!best || *d < *best)) best = d;
    return best.value_or(0.0);
}

struct TrapLossStatus {
    std::vector<bool> lost;
    bool any_lost = false;

    friend bool operator==(const TrapLossStatus&, const TrapLossStatus&) = default;
};

/// A trap is lost once its assigned element is farther than d_loss. Flags
/// already set in `previous` stay set.
inline TrapLossStatus detect_trap_loss(std::span<const Trap> traps, std::span<const SphereElement> elements,
                                       std::span<const WorldSphere> world, double d_loss,
                                       const TrapLossStatus& previous = {}) {
    TrapLossStatus s;
    s.lost.assign(traps.size(), false);
    const auto dist = trap_element_distances(traps, elements, world);
    for (std::size_t t = 0; t < traps.size(); ++t) {
        const bool was = t < previous.lost.size() && previous.lost[t];
        s.lost[t] = was || (dist[t] && *dist[t] > d_loss);
        s.any_lost = s.any_lost || s.lost[t];
    }
    return s;
}

/// Per-device filter state carried between ticks.
struct DeviceChannel {
    Vec3 hand_velocity;      ///< latest raw input (zero-order hold)
    LowPassState motion;
    LowPassState force;
    HapticOutput last;

    friend bool operator==(const DeviceChannel& a, const DeviceChannel& b) {
        return a.hand_velocity == b.hand_velocity && a.motion == b.motion && a.force == b.force;
    }
};

}  // namespace otdt
