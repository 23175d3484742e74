#pragma once

// Scenario documents (JSON, schema_version 1). See docs/scenario_schema.md.
//
// Loading applies defaults, resolves the force model (inline coefficients,
// a sample table to fit, or the built-in reference profile), validates every
// invariant and reports the offending field path. The resolved scenario has a
// canonical JSON form whose 64-bit FNV-1a hash identifies it in trial logs.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "otdt/dynamics.hpp"
#include "otdt/error.hpp"
#include "otdt/force_io.hpp"
#include "otdt/force_model.hpp"
#include "otdt/teleop.hpp"
#include "otdt/vec3.hpp"

namespace otdt {

inline constexpr int kScenarioSchemaVersion = 1;

inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    return s;
}

enum class ForceSource { inline_params, fitted_samples, reference_profile };

inline constexpr std::string_view to_string(ForceSource s) {
    switch (s) {
        case ForceSource::inline_params: return "inline";
        case ForceSource::fitted_samples: return "fitted_samples";
        case ForceSource::reference_profile: return "reference_profile";
    }
    return "inline";
}

struct Goal {
    Vec3 center;
    double radius = 1.0;

    friend bool operator==(const Goal&, const Goal&) = default;
};

struct Scenario {
    std::string name = "unnamed";
    Medium medium;
    Robot robot;
    std::vector<Trap> traps;
    std::vector<Device> trap_devices;
    OpticalForceParams force_params;
    ForceSource force_source = ForceSource::inline_params;
    std::vector<Cell> cells;
    std::vector<Obstacle> obstacles;
    std::size_t payload_cell = 0;
    Vec3 start;
    Goal goal;
    TeleopConfig teleop;
    std::uint64_t seed = 0;
    double dt = 1e-3;
    double broadcast_hz = 60.0;
    double timeout = 120.0;
    Aabb workspace{{-100.0, -100.0, -100.0}, {100.0, 100.0, 100.0}};

    World initial_world() const {
        World w;
        w.robot = robot;
        w.cells = cells;
        w.obstacles = obstacles;
        return w;
    }

    std::vector<std::size_t> traps_of(Device d) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < trap_devices.size(); ++i)
            if (trap_devices[i] == d) out.push_back(i);
        return out;
    }

    void validate() const;
    nlohmann::json to_json() const;
    std::string canonical() const { return to_json().dump(); }
    std::uint64_t hash() const { return fnv1a64(canonical()); }
};

// ---------------------------------------------------------------------------
// JSON helpers

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }
inline nlohmann::json quat_json(const Quat& q) { return nlohmann::json::array({q.w, q.x, q.y, q.z}); }

namespace detail {

/// Field reader that carries the dotted path for error messages.
class Reader {
public:
    Reader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {}

    const nlohmann::json& json() const { return j_; }
    const std::string& path() const { return path_; }

    bool has(const char* key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }

    Reader at(const char* key) const {
        if (!has(key)) throw ValidationError(sub(key), "missing");
        return {j_.at(key), sub(key)};
    }

    Reader index(std::size_t i) const { return {j_.at(i), path_ + "[" + std::to_string(i) + "]"}; }

    std::size_t size() const { return j_.size(); }

    double number() const {
        if (!j_.is_number()) throw ValidationError(path_, "expected a number");
        const double v = j_.get<double>();
        if (!std::isfinite(v)) throw ValidationError(path_, "must be finite");
        return v;
    }

    double number(const char* key, double fallback) const { return has(key) ? at(key).number() : fallback; }

    bool boolean(const char* key, bool fallback) const {
        if (!has(key)) return fallback;
        if (!j_.at(key).is_boolean()) throw ValidationError(sub(key), "expected a boolean");
        return j_.at(key).get<bool>();
    }

    std::string string() const {
        if (!j_.is_string()) throw ValidationError(path_, "expected a string");
        return j_.get<std::string>();
    }

    std::uint64_t u64() const {
        const bool ok = j_.is_number_unsigned() || (j_.is_number_integer() && j_.get<std::int64_t>() >= 0);
        if (!ok) throw ValidationError(path_, "expected a non-negative integer");
        return j_.get<std::uint64_t>();
    }

    Vec3 vec3() const {
        if (!j_.is_array() || j_.size() != 3) throw ValidationError(path_, "expected [x, y, z]");
        return {index(0).number(), index(1).number(), index(2).number()};
    }

    Quat quat() const {
        if (!j_.is_array() || j_.size() != 4) throw ValidationError(path_, "expected [w, x, y, z]");
        Quat q{index(0).number(), index(1).number(), index(2).number(), index(3).number()};
        if (std::abs(q.norm() - 1.0) > 1e-6) throw ValidationError(path_, "quaternion must be unit length");
        return q.normalized();
    }

    Aabb box() const {
        Aabb b{at("min").vec3(), at("max").vec3()};
        if (!b.valid()) throw ValidationError(path_, "min must be < max componentwise");
        return b;
    }

    void expect_array() const {
        if (!j_.is_array()) throw ValidationError(path_, "expected an array");
    }

private:
    std::string sub(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

    const nlohmann::json& j_;
    std::string path_;
};

inline int line_of_offset(std::string_view text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

inline nlohmann::json parse_document(std::string_view text) {
    try {
        return nlohmann::json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
    }
}

inline std::vector<ForceSample> default_reference_samples(const ReferenceProfile& profile, std::size_t points) {
    const auto r = linspace(0.0, 4.0 * profile.beam_waist, points);
    return sample_reference_force(profile, r);
}

}  // namespace detail

/// Coefficients obtained by fitting the default reference profile
/// (F_max 6 pN, waist 0.8 µm, 200 samples on [0, 4w]).
inline OpticalForceParams default_force_params() {
    static const OpticalForceParams p = fit_piecewise(detail::default_reference_samples({}, 200));
    return p;
}

inline void Scenario::validate() const {
    medium.validate();
    if (robot.elements.empty()) throw ValidationError("robot.elements", "at least one element required");
    for (std::size_t i = 0; i < robot.elements.size(); ++i) {
        const auto& e = robot.elements[i];
        const std::string p = "robot.elements[" + std::to_string(i) + "]";
        if (!(e.radius > 0.0)) throw ValidationError(p + ".radius", "must be > 0");
        if (!is_finite(e.offset_body)) throw ValidationError(p + ".offset", "must be finite");
        if (e.assigned_trap && *e.assigned_trap >= traps.size())
            throw ValidationError(p + ".trap", "index out of range");
    }
    if (robot.drag_override &&
        !(robot.drag_override->translational > 0.0 && robot.drag_override->rotational > 0.0))
        throw ValidationError("robot.drag", "coefficients must be > 0");
    if (trap_devices.size() != traps.size()) throw ValidationError("traps", "every trap needs a device");
    for (std::size_t i = 0; i < traps.size(); ++i) {
        const auto& t = traps[i];
        if (!is_finite(t.position)) throw ValidationError("traps[" + std::to_string(i) + "].position", "must be finite");
        if (!std::isfinite(t.power_weight) || t.power_weight < 0.0)
            throw ValidationError("traps[" + std::to_string(i) + "].power_weight", "must be finite and >= 0");
    }
    try {
        force_params.validate();
    } catch (const ParameterError& e) {
        throw ValidationError("force_params", e.what());
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string p = "cells[" + std::to_string(i) + "]";
        if (!(cells[i].radius > 0.0)) throw ValidationError(p + ".radius", "must be > 0");
        if (!(cells[i].stiffness >= 0.0)) throw ValidationError(p + ".stiffness", "must be >= 0");
        if (!(cells[i].contact_damping >= 0.0)) throw ValidationError(p + ".damping", "must be >= 0");
    }
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        const std::string p = "obstacles[" + std::to_string(i) + "]";
        if (!(obstacles[i].stiffness >= 0.0)) throw ValidationError(p + ".stiffness", "must be >= 0");
        if (const auto* b = std::get_if<Aabb>(&obstacles[i].shape); b && !b->valid())
            throw ValidationError(p + ".box", "min must be < max componentwise");
        if (const auto* pl = std::get_if<PlaneShape>(&obstacles[i].shape);
            pl && std::abs(norm(pl->normal) - 1.0) > 1e-9)
            throw ValidationError(p + ".plane.normal", "must be unit length");
    }
    if (payload_cell >= cells.size()) throw ValidationError("payload_cell", "index out of range");
    if (!(goal.radius > 0.0)) throw ValidationError("goal.radius", "must be > 0");
    if (!workspace.valid()) throw ValidationError("workspace", "min must be < max componentwise");
    if (!(dt > 0.0 && dt <= kMaxStep)) throw ValidationError("dt", "must lie in (0, 0.002]");
    if (!(broadcast_hz > 0.0) || broadcast_hz > 1.0 / dt)
        throw ValidationError("broadcast_hz", "must be > 0 and not exceed the physics rate");
    if (!(timeout > 0.0)) throw ValidationError("timeout", "must be > 0");
    teleop.validate(force_params);
}

inline nlohmann::json Scenario::to_json() const {
    using nlohmann::json;
    json elements = json::array();
    for (const auto& e : robot.elements) {
        json je{{"offset", vec_json(e.offset_body)}, {"radius", e.radius}};
        je["trap"] = e.assigned_trap ? json(*e.assigned_trap) : json(nullptr);
        elements.push_back(je);
    }
    json jrobot{{"elements", elements},
                {"pose", {{"position", vec_json(robot.pose.position)},
                          {"orientation", quat_json(robot.pose.orientation)}}},
                {"pinned", robot.pinned}};
    if (robot.drag_override)
        jrobot["drag"] = {{"translational", robot.drag_override->translational},
                          {"rotational", robot.drag_override->rotational}};

    json jtraps = json::array();
    for (std::size_t i = 0; i < traps.size(); ++i)
        jtraps.push_back({{"position", vec_json(traps[i].position)},
                          {"power_weight", traps[i].power_weight},
                          {"device", std::string(to_string(trap_devices[i]))}});

    json jcells = json::array();
    for (const auto& c : cells)
        jcells.push_back({{"position", vec_json(c.position)}, {"radius", c.radius},
                          {"stiffness", c.stiffness}, {"damping", c.contact_damping}, {"fixed", c.fixed}});

    json jobs = json::array();
    for (const auto& o : obstacles) {
        json jo{{"stiffness", o.stiffness}, {"damping", o.contact_damping}};
        if (const auto* b = std::get_if<Aabb>(&o.shape))
            jo["box"] = {{"min", vec_json(b->min)}, {"max", vec_json(b->max)}};
        else {
            const auto& p = std::get<PlaneShape>(o.shape);
            jo["plane"] = {{"normal", vec_json(p.normal)}, {"offset", p.offset}};
        }
        jobs.push_back(jo);
    }

    return json{
        {"schema_version", kScenarioSchemaVersion},
        {"name", name},
        {"medium", {{"viscosity", medium.viscosity}, {"temperature", medium.temperature}}},
        {"robot", jrobot},
        {"traps", jtraps},
        {"force_params", otdt::to_json(force_params)},
        {"force_source", std::string(to_string(force_source))},
        {"cells", jcells},
        {"obstacles", jobs},
        {"payload_cell", payload_cell},
        {"start", vec_json(start)},
        {"goal", {{"center", vec_json(goal.center)}, {"radius", goal.radius}}},
        {"teleop", {{"alpha_m", teleop.alpha_m}, {"alpha_f", teleop.alpha_f},
                    {"g_control", teleop.g_control}, {"g_hand", teleop.g_hand},
                    {"damping_b", teleop.damping_b}, {"f_warn", teleop.f_warn},
                    {"d_loss", teleop.d_loss}, {"allow_g_hand_override", teleop.allow_g_hand_override}}},
        {"seed", seed},
        {"dt", dt},
        {"broadcast_hz", broadcast_hz},
        {"timeout", timeout},
        {"workspace", {{"min", vec_json(workspace.min)}, {"max", vec_json(workspace.max)}}},
    };
}

/// Parse, default, resolve and validate a scenario document. Relative sample
/// file paths resolve against `base_dir`.
inline Scenario load_scenario(std::string_view text, const std::filesystem::path& base_dir = {}) {
    const nlohmann::json doc = detail::parse_document(text);
    const detail::Reader root(doc, "");
    if (!doc.is_object()) throw ValidationError("(root)", "expected an object");

    const auto version = root.has("schema_version") ? root.at("schema_version").u64() : 0;
    if (version != kScenarioSchemaVersion)
        throw ValidationError("schema_version", "unsupported version " + std::to_string(version));

    Scenario s;
    if (root.has("name")) s.name = root.at("name").string();

    if (root.has("medium")) {
        const auto m = root.at("medium");
        s.medium.viscosity = m.number("viscosity", s.medium.viscosity);
        s.medium.temperature = m.number("temperature", s.medium.temperature);
    }

    if (root.has("start")) s.start = root.at("start").vec3();

    // traps before robot so element assignments can be range-checked in validate()
    const auto jtraps = root.at("traps");
    jtraps.expect_array();
    for (std::size_t i = 0; i < jtraps.size(); ++i) {
        const auto t = jtraps.index(i);
        s.traps.push_back({t.at("position").vec3(), t.number("power_weight", 1.0)});
        const auto dev = t.has("device") ? t.at("device").string() : std::string("left");
        const auto d = device_from_string(dev);
        if (!d) throw ValidationError(t.path() + ".device", "must be \"left\" or \"right\"");
        s.trap_devices.push_back(*d);
    }

    const auto jrobot = root.at("robot");
    const auto jelems = jrobot.at("elements");
    jelems.expect_array();
    for (std::size_t i = 0; i < jelems.size(); ++i) {
        const auto e = jelems.index(i);
        SphereElement el;
        el.offset_body = e.has("offset") ? e.at("offset").vec3() : Vec3{};
        el.radius = e.number("radius", 1.0);
        if (e.has("trap")) el.assigned_trap = static_cast<std::size_t>(e.at("trap").u64());
        s.robot.elements.push_back(el);
    }
    s.robot.pose.position = s.start;
    if (jrobot.has("pose")) {
        const auto p = jrobot.at("pose");
        if (p.has("position")) s.robot.pose.position = p.at("position").vec3();
        if (p.has("orientation")) s.robot.pose.orientation = p.at("orientation").quat();
    }
    s.robot.pinned = jrobot.boolean("pinned", false);
    if (jrobot.has("drag")) {
        const auto d = jrobot.at("drag");
        s.robot.drag_override = DragCoefficients{d.at("translational").number(), d.at("rotational").number()};
    }

    const int sources = static_cast<int>(root.has("force_params")) + static_cast<int>(root.has("force_samples")) +
                        static_cast<int>(root.has("force_reference"));
    if (sources > 1)
        throw ValidationError("force_params", "give only one of force_params, force_samples, force_reference");
    if (root.has("force_params")) {
        s.force_params = params_from_json(doc.at("force_params"));
        s.force_source = ForceSource::inline_params;
    } else if (root.has("force_samples")) {
        const auto fs = root.at("force_samples");
        std::vector<ForceSample> samples;
        if (fs.json().is_string()) {
            const std::filesystem::path p = base_dir / fs.string();
            try {
                samples = read_samples_csv(p.string());
            } catch (const ParseError& e) {
                throw ValidationError("force_samples", std::string(e.what()));
            } catch (const Error& e) {
                throw ValidationError("force_samples", e.what());
            }
        } else {
            fs.expect_array();
            for (std::size_t i = 0; i < fs.size(); ++i) {
                const auto row = fs.index(i);
                if (!row.json().is_array() || row.size() != 2) throw ValidationError(row.path(), "expected [r_um, force_pN]");
                samples.push_back({row.index(0).number(), row.index(1).number()});
            }
        }
        try {
            s.force_params = fit_piecewise(samples);
        } catch (const Error& e) {
            throw ValidationError("force_samples", e.what());
        }
        s.force_source = ForceSource::fitted_samples;
    } else {
        ReferenceProfile prof;
        std::size_t points = 200;
        if (root.has("force_reference")) {
            const auto r = root.at("force_reference");
            prof.f_max = r.number("F_max", prof.f_max);
            prof.beam_waist = r.number("w", prof.beam_waist);
            if (r.has("points")) points = static_cast<std::size_t>(r.at("points").u64());
        }
        try {
            s.force_params = fit_piecewise(detail::default_reference_samples(prof, points));
        } catch (const Error& e) {
            throw ValidationError("force_reference", e.what());
        }
        s.force_source = ForceSource::reference_profile;
    }

    if (root.has("cells")) {
        const auto jc = root.at("cells");
        jc.expect_array();
        for (std::size_t i = 0; i < jc.size(); ++i) {
            const auto c = jc.index(i);
            Cell cell;
            cell.position = c.at("position").vec3();
            cell.radius = c.number("radius", cell.radius);
            cell.stiffness = c.number("stiffness", cell.stiffness);
            cell.contact_damping = c.number("damping", cell.contact_damping);
            cell.fixed = c.boolean("fixed", false);
            s.cells.push_back(cell);
        }
    }

    if (root.has("obstacles")) {
        const auto jo = root.at("obstacles");
        jo.expect_array();
        for (std::size_t i = 0; i < jo.size(); ++i) {
            const auto o = jo.index(i);
            Obstacle ob;
            if (o.has("box")) {
                ob.shape = o.at("box").box();
            } else if (o.has("plane")) {
                const auto pl = o.at("plane");
                ob.shape = PlaneShape{pl.at("normal").vec3(), pl.number("offset", 0.0)};
            } else {
                throw ValidationError(o.path(), "needs a \"box\" or \"plane\"");
            }
            ob.stiffness = o.number("stiffness", ob.stiffness);
            ob.contact_damping = o.number("damping", ob.contact_damping);
            s.obstacles.push_back(ob);
        }
    }

    if (root.has("payload_cell")) s.payload_cell = static_cast<std::size_t>(root.at("payload_cell").u64());
    const auto jg = root.at("goal");
    s.goal.center = jg.at("center").vec3();
    s.goal.radius = jg.at("radius").number();

    if (root.has("seed")) s.seed = root.at("seed").u64();
    s.dt = root.number("dt", s.dt);
    s.broadcast_hz = root.number("broadcast_hz", s.broadcast_hz);
    s.timeout = root.number("timeout", s.timeout);
    if (root.has("workspace")) s.workspace = root.at("workspace").box();

    // teleop defaults depend on the resolved robot and force model
    s.medium.validate();
    if (s.robot.elements.empty()) throw ValidationError("robot.elements", "at least one element required");
    for (std::size_t i = 0; i < s.robot.elements.size(); ++i)
        if (!(s.robot.elements[i].radius > 0.0))
            throw ValidationError("robot.elements[" + std::to_string(i) + "].radius", "must be > 0");
    auto& tc = s.teleop;
    if (root.has("teleop")) {
        const auto t = root.at("teleop");
        tc.alpha_m = t.number("alpha_m", tc.alpha_m);
        tc.alpha_f = t.number("alpha_f", tc.alpha_f);
        tc.g_control = t.number("g_control", tc.g_control);
        tc.g_hand = t.number("g_hand", tc.g_hand);
        tc.allow_g_hand_override = t.boolean("allow_g_hand_override", false);
        tc.damping_b = t.number("damping_b", 0.2 * tc.g_control * s.robot.drag(s.medium).translational);
        tc.f_warn = t.number("f_warn", tc.f_warn);
        tc.d_loss = t.number("d_loss", s.force_params.cutoff_r_max);
    } else {
        tc.damping_b = 0.2 * tc.g_control * s.robot.drag(s.medium).translational;
        tc.d_loss = s.force_params.cutoff_r_max;
    }

    s.validate();
    return s;
}

inline Scenario load_scenario_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open scenario " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return load_scenario(buf.str(), path.parent_path());
}

}  // namespace otdt
