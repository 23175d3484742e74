#pragma once

// Overdamped rigid-body dynamics for the microrobot and free cells.
//
// There is no inertia: each tick the drift displacement is force / drag * dt
// and a Gaussian Brownian displacement with variance 2 D dt is added per axis,
// D = kB T / drag. Buoyancy, gravity and hydrodynamic coupling between spheres
// are not modelled.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "otdt/error.hpp"
#include "otdt/force_model.hpp"
#include "otdt/rng.hpp"
#include "otdt/vec3.hpp"

namespace otdt {

inline constexpr double kBoltzmann = 1.380649e-23;  ///< J/K
inline constexpr double kJouleToPnUm = 1e18;       ///< 1 J = 1e18 pN·µm

struct Medium {
    double viscosity = 1e-3;   ///< pN·s/µm² (water)
    double temperature = 300.0; ///< K

    friend bool operator==(const Medium&, const Medium&) = default;

    /// Thermal energy in pN·µm.
    double kbt() const { return kBoltzmann * temperature * kJouleToPnUm; }

    void validate() const {
        if (!(viscosity > 0.0) || !std::isfinite(viscosity))
            throw ValidationError("medium.viscosity", "must be > 0");
        if (!(temperature >= 0.0) || !std::isfinite(temperature))
            throw ValidationError("medium.temperature", "must be >= 0");
    }
};

struct DragCoefficients {
    double translational = 0.0; ///< pN·s/µm
    double rotational = 0.0;    ///< pN·s·µm

    friend bool operator==(const DragCoefficients&, const DragCoefficients&) = default;
};

inline double stokes_drag(double radius, const Medium& medium) {
    return 6.0 * std::numbers::pi * medium.viscosity * radius;
}

/// Free-draining composition of Stokes drag over the sphere assembly.
/// Rotational drag adds each sphere's own rotation (8 pi eta a^3) to its
/// translation about the reference point (6 pi eta a |offset|^2).
inline DragCoefficients drag_coefficients(std::span<const SphereElement> elements,
                                          const Medium& medium) {
    if (elements.empty()) throw ValidationError("robot.elements", "drag needs at least one element");
    DragCoefficients d;
    for (const auto& e : elements) {
        const double a = e.radius;
        d.translational += stokes_drag(a, medium);
        d.rotational += 8.0 * std::numbers::pi * medium.viscosity * a * a * a +
                        stokes_drag(a, medium) * norm2(e.offset_body);
    }
    return d;
}

inline double diffusion_coefficient(double gamma, const Medium& medium) {
    return medium.kbt() / gamma;
}

/// One Brownian displacement component with standard deviation sqrt(2 D dt).
/// Always consumes the same number of draws, including at zero temperature.
inline double brownian_kick(double gamma, const Medium& medium, double dt, CounterRng& rng) {
    if (!(dt > 0.0)) throw ValidationError("dt", "must be > 0");
    const double z = rng.normal();
    const double sigma = std::sqrt(2.0 * diffusion_coefficient(gamma, medium) * dt);
    return sigma == 0.0 ? 0.0 : sigma * z;
}

struct Cell {
    Vec3 position;
    double radius = 3.0;
    double stiffness = 10.0;      ///< pN/µm
    double contact_damping = 0.0; ///< pN·s/µm
    bool fixed = false;

    friend bool operator==(const Cell&, const Cell&) = default;
};

struct PlaneShape {
    Vec3 normal{0.0, 0.0, 1.0}; ///< points into the free half-space
    double offset = 0.0;        ///< plane is {p : normal · p = offset}

    friend bool operator==(const PlaneShape&, const PlaneShape&) = default;
};

struct Obstacle {
    std::variant<Aabb, PlaneShape> shape;
    double stiffness = 100.0;     ///< pN/µm
    double contact_damping = 0.0; ///< pN·s/µm

    friend bool operator==(const Obstacle&, const Obstacle&) = default;
};

struct Robot {
    std::vector<SphereElement> elements;
    Pose pose;
    bool pinned = false;  ///< held in place; forces are still evaluated
    std::optional<DragCoefficients> drag_override;

    friend bool operator==(const Robot&, const Robot&) = default;

    DragCoefficients drag(const Medium& medium) const {
        return drag_override ? *drag_override : drag_coefficients(elements, medium);
    }

    double max_radius() const {
        double r = 0.0;
        for (const auto& e : elements) r = std::max(r, e.radius);
        return r;
    }
};

struct WorldSphere {
    Vec3 center;
    double radius = 0.0;
};

inline std::vector<WorldSphere> world_spheres(const Robot& robot) {
    std::vector<WorldSphere> out;
    out.reserve(robot.elements.size());
    for (const auto& e : robot.elements) out.push_back({robot.pose.to_world(e.offset_body), e.radius});
    return out;
}

/// Drift velocities from the previous tick, used only by contact damping.
struct ContactKinematics {
    std::vector<Vec3> robot_elements;
    std::vector<Vec3> cells;

    friend bool operator==(const ContactKinematics&, const ContactKinematics&) = default;
};

struct ContactResult {
    Vec3 robot_force;
    Vec3 robot_torque;             ///< about the robot reference point
    std::vector<Vec3> on_cells;
    std::vector<double> cell_load; ///< sum of contact-pair magnitudes per cell, pN
    Vec3 on_obstacles;             ///< total reaction absorbed by static geometry
    double max_cell_force = 0.0;   ///< max over cells of cell_load
};

namespace detail {

/// Penalty normal force magnitude, clamped so contacts never pull.
inline double penalty(double stiffness, double damping, double penetration, double approach_speed) {
    return std::max(0.0, stiffness * penetration + damping * approach_speed);
}

/// Contact normal and penetration of a sphere against static geometry.
/// Normal points from the obstacle toward the sphere centre.
struct Penetration {
    double depth = 0.0;
    Vec3 normal;
};

inline std::optional<Penetration> sphere_vs(const Aabb& box, const Vec3& c, double a) {
    const Vec3 q = clamp(c, box.min, box.max);
    const Vec3 d = c - q;
    const double dist = norm(d);
    if (dist > 0.0) {
        if (dist >= a) return std::nullopt;
        return Penetration{a - dist, d / dist};
    }
    // centre inside: push out through the nearest face
    const double faces[6] = {c.x - box.min.x, box.max.x - c.x, c.y - box.min.y,
                             box.max.y - c.y, c.z - box.min.z, box.max.z - c.z};
    const Vec3 normals[6] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
    int best = 0;
    for (int i = 1; i < 6; ++i)
        if (faces[i] < faces[best]) best = i;
    return Penetration{a + faces[best], normals[best]};
}

inline std::optional<Penetration> sphere_vs(const PlaneShape& plane, const Vec3& c, double a) {
    const double s = dot(plane.normal, c) - plane.offset;
    if (s >= a) return std::nullopt;
    return Penetration{a - s, plane.normal};
}

inline Vec3 velocity_or_zero(const std::vector<Vec3>& v, std::size_t i) {
    return i < v.size() ? v[i] : Vec3{};
}

}  // namespace detail

/// Penalty contacts between robot spheres, cells and static obstacles.
///
/// Every pair force is applied equal and opposite; the share landing on static
/// obstacles is accumulated in `on_obstacles` so the total over all bodies is
/// zero. Robot-cell pairs use the cell's stiffness, cell-cell pairs the series
/// combination of both cells, and anything touching an obstacle uses the
/// obstacle's stiffness.
inline ContactResult contact_forces(std::span<const WorldSphere> robot, const Vec3& robot_origin,
                                    std::span<const Cell> cells, std::span<const Obstacle> obstacles,
                                    const ContactKinematics& kin = {}) {
    ContactResult out;
    out.on_cells.assign(cells.size(), Vec3{});
    out.cell_load.assign(cells.size(), 0.0);

    auto apply_robot = [&](std::size_t i, const Vec3& f) {
        out.robot_force += f;
        out.robot_torque += cross(robot[i].center - robot_origin, f);
    };

    for (std::size_t i = 0; i < robot.size(); ++i) {
        const Vec3 vi = detail::velocity_or_zero(kin.robot_elements, i);
        for (std::size_t j = 0; j < cells.size(); ++j) {
            const Vec3 d = robot[i].center - cells[j].position;
            const double dist = norm(d);
            const double p = robot[i].radius + cells[j].radius - dist;
            if (p <= 0.0 || dist == 0.0) continue;
            const Vec3 n = d / dist;  // cell -> robot
            const double approach = -dot(vi - detail::velocity_or_zero(kin.cells, j), n);
            const double mag = detail::penalty(cells[j].stiffness, cells[j].contact_damping, p, approach);
            apply_robot(i, n * mag);
            out.on_cells[j] -= n * mag;
            out.cell_load[j] += mag;
        }
        for (const auto& ob : obstacles) {
            const auto pen = std::visit(
                [&](const auto& s) { return detail::sphere_vs(s, robot[i].center, robot[i].radius); },
                ob.shape);
            if (!pen) continue;
            const double approach = -dot(vi, pen->normal);
            const double mag = detail::penalty(ob.stiffness, ob.contact_damping, pen->depth, approach);
            apply_robot(i, pen->normal * mag);
            out.on_obstacles -= pen->normal * mag;
        }
    }

    for (std::size_t j = 0; j < cells.size(); ++j) {
        const Vec3 vj = detail::velocity_or_zero(kin.cells, j);
        for (std::size_t k = j + 1; k < cells.size(); ++k) {
            const Vec3 d = cells[j].position - cells[k].position;
            const double dist = norm(d);
            const double p = cells[j].radius + cells[k].radius - dist;
            if (p <= 0.0 || dist == 0.0) continue;
            const Vec3 n = d / dist;  // k -> j
            const double ks = cells[j].stiffness + cells[k].stiffness;
            const double stiff = ks > 0.0 ? cells[j].stiffness * cells[k].stiffness / ks : 0.0;
            const double damp = 0.5 * (cells[j].contact_damping + cells[k].contact_damping);
            const double approach = -dot(vj - detail::velocity_or_zero(kin.cells, k), n);
            const double mag = detail::penalty(stiff, damp, p, approach);
            out.on_cells[j] += n * mag;
            out.on_cells[k] -= n * mag;
            out.cell_load[j] += mag;
            out.cell_load[k] += mag;
        }
        for (const auto& ob : obstacles) {
            const auto pen = std::visit(
                [&](const auto& s) { return detail::sphere_vs(s, cells[j].position, cells[j].radius); },
                ob.shape);
            if (!pen) continue;
            const double approach = -dot(vj, pen->normal);
            const double mag = detail::penalty(ob.stiffness, ob.contact_damping, pen->depth, approach);
            out.on_cells[j] += pen->normal * mag;
            out.on_obstacles -= pen->normal * mag;
            out.cell_load[j] += mag;
        }
    }

    for (double load : out.cell_load) out.max_cell_force = std::max(out.max_cell_force, load);
    return out;
}

struct World {
    Robot robot;
    std::vector<Cell> cells;
    std::vector<Obstacle> obstacles;
    ContactKinematics drift;  ///< previous-tick drift velocities
    double time = 0.0;
    std::uint64_t tick = 0;

    friend bool operator==(const World&, const World&) = default;
};

struct StepOutcome {
    World next;
    MsdmWrench optical;    ///< evaluated at the pre-step state
    ContactResult contact; ///< evaluated at the pre-step state
    Vec3 robot_kick;       ///< translational Brownian displacement applied this tick
};

inline constexpr double kMaxStep = 2e-3;          ///< s
inline constexpr double kBlowupRadiusFactor = 5.0;

/// Advance the world by one explicit overdamped step.
///
/// Random draws per tick, in order: robot translation x,y,z; robot rotation
/// x,y,z; then x,y,z for each cell. The sequence does not depend on the state,
/// so two runs sharing a seed see identical noise.
inline StepOutcome step(const World& world, std::span<const Trap> traps,
                        const OpticalForceParams& params, const Medium& medium, double dt,
                        CounterRng& rng) {
    if (!(dt > 0.0) || dt > kMaxStep) throw ValidationError("dt", "must lie in (0, 2 ms]");

    StepOutcome out{world, {}, {}, {}};
    World& next = out.next;
    const Robot& robot = world.robot;

    out.optical = msdm_wrench(params, traps, robot.pose, robot.elements);
    const auto spheres = world_spheres(robot);
    out.contact = contact_forces(spheres, robot.pose.position, world.cells, world.obstacles, world.drift);

    const DragCoefficients drag = robot.drag(medium);
    const Vec3 force = out.optical.net_force + out.contact.robot_force;
    const Vec3 torque = out.optical.net_torque + out.contact.robot_torque;

    Vec3 kick_t, kick_r;
    kick_t.x = brownian_kick(drag.translational, medium, dt, rng);
    kick_t.y = brownian_kick(drag.translational, medium, dt, rng);
    kick_t.z = brownian_kick(drag.translational, medium, dt, rng);
    kick_r.x = brownian_kick(drag.rotational, medium, dt, rng);
    kick_r.y = brownian_kick(drag.rotational, medium, dt, rng);
    kick_r.z = brownian_kick(drag.rotational, medium, dt, rng);
    out.robot_kick = kick_t;

    next.drift.robot_elements.assign(robot.elements.size(), Vec3{});
    if (!robot.pinned) {
        const Vec3 v = force / drag.translational;
        const Vec3 w = torque / drag.rotational;
        const Vec3 dx = v * dt + kick_t;
        const Vec3 dtheta = w * dt + kick_r;
        if (!is_finite(dx) || norm(dx) > kBlowupRadiusFactor * robot.max_radius())
            throw IntegrationError("robot", "displacement " + std::to_string(norm(dx)) + " µm in one tick");
        next.robot.pose.position = robot.pose.position + dx;
        next.robot.pose.orientation =
            (Quat::from_rotation_vector(dtheta) * robot.pose.orientation).normalized();
        for (std::size_t i = 0; i < robot.elements.size(); ++i)
            next.drift.robot_elements[i] = v + cross(w, spheres[i].center - robot.pose.position);
    }

    next.drift.cells.assign(world.cells.size(), Vec3{});
    for (std::size_t j = 0; j < world.cells.size(); ++j) {
        const Cell& c = world.cells[j];
        const double gamma = stokes_drag(c.radius, medium);
        Vec3 kick;
        kick.x = brownian_kick(gamma, medium, dt, rng);
        kick.y = brownian_kick(gamma, medium, dt, rng);
        kick.z = brownian_kick(gamma, medium, dt, rng);
        if (c.fixed) continue;
        const Vec3 v = out.contact.on_cells[j] / gamma;
        const Vec3 dx = v * dt + kick;
        if (!is_finite(dx) || norm(dx) > kBlowupRadiusFactor * c.radius)
            throw IntegrationError("cell " + std::to_string(j),
                                   "displacement " + std::to_string(norm(dx)) + " µm in one tick");
        next.cells[j].position = c.position + dx;
        next.drift.cells[j] = v;
    }

    next.tick = world.tick + 1;
    next.time = static_cast<double>(next.tick) * dt;
    return out;
}

}  // namespace otdt
