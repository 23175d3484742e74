#pragma once

// Batch studies: two-trap rotation curves (strategies A and B), haptic
// rendering consistency sweeps, and scripted-operator delivery trials.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "otdt/dynamics.hpp"
#include "otdt/error.hpp"
#include "otdt/force_io.hpp"
#include "otdt/force_model.hpp"
#include "otdt/rng.hpp"
#include "otdt/scenario.hpp"
#include "otdt/session.hpp"
#include "otdt/teleop.hpp"
#include "otdt/trial_log.hpp"

namespace otdt {

// ---------------------------------------------------------------------------
// Statistics

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> ranks(const std::vector<double>& xs) {
    std::vector<std::size_t> idx(xs.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && xs[idx[j + 1]] == xs[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw Error("pearson needs two equal series of length >= 2");
    const auto mx = mean_sd(x).mean, my = mean_sd(y).mean;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
    return pearson(ranks(x), ranks(y));
}

struct FitMetrics {
    double mse = 0.0;
    double rmse = 0.0;
    double r2 = 0.0;
    double max_abs = 0.0;
    std::size_t n = 0;
};

/// Agreement of `predicted` with `reference`; R² = 1 − SS_res / SS_tot of the reference.
inline FitMetrics fit_metrics(const std::vector<double>& reference, const std::vector<double>& predicted) {
    if (reference.size() != predicted.size()) throw Error("fit_metrics: length mismatch");
    if (reference.empty()) throw Error("fit_metrics: empty table");
    FitMetrics m;
    m.n = reference.size();
    const double mean = mean_sd(reference).mean;
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
        const double e = predicted[i] - reference[i];
        ss_res += e * e;
        ss_tot += (reference[i] - mean) * (reference[i] - mean);
        m.max_abs = std::max(m.max_abs, std::abs(e));
    }
    m.mse = ss_res / static_cast<double>(m.n);
    m.rmse = std::sqrt(m.mse);
    m.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);
    return m;
}

inline nlohmann::json to_json(const FitMetrics& m) {
    return {{"mse", m.mse}, {"rmse", m.rmse}, {"r2", m.r2}, {"max_abs", m.max_abs}, {"n", m.n}};
}

// ---------------------------------------------------------------------------
// CSV helpers

namespace csv {

inline std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
    return os.str();
}

inline std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double to_double(const std::string& s, int line) { return detail::parse_double(s, line); }

/// Reads a table with an exact header; returns the data rows split into cells.
inline std::vector<std::vector<std::string>> read_table(std::istream& in, const std::string& header) {
    std::string line;
    if (!std::getline(in, line) || line != header) throw ParseError(1, "expected header '" + header + "'");
    const auto width = split(header).size();
    std::vector<std::vector<std::string>> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = split(line);
        if (cells.size() != width)
            throw ParseError(lineno, "expected " + std::to_string(width) + " columns");
        rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace csv

// ---------------------------------------------------------------------------
// Rotation study

enum class Strategy { A, B };

/// Two-handle rod tilted out of the focal plane by a pair of traps.
///
/// The rod carries handle spheres at body (±L/2, 0, 0). Trap 0 sits at
/// (−d*/2, 0, 0); trap 1 at (+d*/2, 0, h) with h = sqrt(max(0, L² − d*²)), so
/// the traps are exactly one rod length apart whenever d* ≤ L and the rod
/// settles at θ = acos(d*/L). Strategy A uses equal trap powers; strategy B
/// weights the traps (m, 1) normalised to sum 2.
struct RotationStudyConfig {
    Strategy strategy = Strategy::A;
    std::vector<double> d_star_values{2.0, 2.5, 3.0, 3.5, 4.0};
    double power_ratio_m = 1.5;
    double settle_time = 0.5;      ///< s simulated before the first convergence check
    double rod_length = 4.0;       ///< µm, handle centre spacing
    double handle_radius = 1.0;    ///< µm
    double rate_tolerance = 1e-4;  ///< rad/s (and µm/s) pose change
    double check_interval = 0.01;  ///< s
    double dt = 1e-3;
    OpticalForceParams params = default_force_params();
    Medium medium{1e-3, 0.0};

    void validate() const {
        if (d_star_values.size() < 5) throw ValidationError("d_star", "need at least 5 values");
        for (std::size_t i = 0; i < d_star_values.size(); ++i) {
            if (!(d_star_values[i] > 0.0) || !std::isfinite(d_star_values[i]))
                throw ValidationError("d_star", "values must be finite and > 0");
            if (i > 0 && !(d_star_values[i] > d_star_values[i - 1]))
                throw ValidationError("d_star", "values must be strictly increasing");
        }
        if (!(power_ratio_m > 0.0) || !std::isfinite(power_ratio_m)) throw ValidationError("m", "must be > 0");
        if (!(settle_time > 0.0)) throw ValidationError("settle_time", "must be > 0");
        if (!(rod_length > 0.0) || !(handle_radius > 0.0)) throw ValidationError("rod", "dimensions must be > 0");
        if (!(check_interval >= dt)) throw ValidationError("check_interval", "must be >= dt");
        params.validate();
        medium.validate();
    }
};

struct RotationRow {
    double d_star = 0.0;
    double theta_deg = 0.0;
    bool converged = false;
    double settle_s = 0.0;  ///< simulated time at convergence (or at give-up)

    friend bool operator==(const RotationRow&, const RotationRow&) = default;
};

/// Angle between the body x axis and the xy focal plane, degrees.
inline double out_of_plane_angle_deg(const Quat& q) {
    const Vec3 axis = q.rotate({1, 0, 0});
    const double s = std::clamp(std::abs(axis.z) / norm(axis), 0.0, 1.0);
    return std::asin(s) * 180.0 / std::numbers::pi;
}

/// Rotation angle between two orientations, radians.
inline double rotation_between(const Quat& a, const Quat& b) {
    const double d = std::abs(a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z);
    return 2.0 * std::acos(std::min(1.0, d));
}

inline std::pair<double, double> strategy_weights(Strategy s, double m) {
    if (s == Strategy::A) return {1.0, 1.0};
    return {2.0 * m / (m + 1.0), 2.0 / (m + 1.0)};
}

inline RotationRow run_rotation_point(const RotationStudyConfig& cfg, double d_star) {
    const double L = cfg.rod_length;
    const double h = std::sqrt(std::max(0.0, L * L - d_star * d_star));
    const auto [w0, w1] = strategy_weights(cfg.strategy, cfg.power_ratio_m);
    const std::vector<Trap> traps{{{-0.5 * d_star, 0, 0}, w0}, {{0.5 * d_star, 0, h}, w1}};

    World world;
    world.robot.elements = {{{-0.5 * L, 0, 0}, cfg.handle_radius, 0}, {{0.5 * L, 0, 0}, cfg.handle_radius, 1}};
    world.robot.pose.position = {0, 0, 0.5 * h};  // start flat, centred between the traps
    CounterRng rng(0);

    const auto interval_ticks = static_cast<std::uint64_t>(std::llround(cfg.check_interval / cfg.dt));
    const auto settle_ticks = static_cast<std::uint64_t>(std::llround(cfg.settle_time / cfg.dt));
    const auto max_ticks = 10 * settle_ticks;

    RotationRow row{d_star, 0.0, false, 0.0};
    Pose prev = world.robot.pose;
    while (world.tick < max_ticks) {
        world = step(world, traps, cfg.params, cfg.medium, cfg.dt, rng).next;
        if (world.tick % interval_ticks != 0) continue;
        const Pose now = world.robot.pose;
        const double span = static_cast<double>(interval_ticks) * cfg.dt;
        const double rot_rate = rotation_between(prev.orientation, now.orientation) / span;
        const double lin_rate = distance(prev.position, now.position) / span;
        prev = now;
        if (world.tick >= settle_ticks && rot_rate < cfg.rate_tolerance && lin_rate < cfg.rate_tolerance) {
            row.converged = true;
            break;
        }
    }
    row.theta_deg = out_of_plane_angle_deg(world.robot.pose.orientation);
    row.settle_s = world.time;
    return row;
}

inline std::vector<RotationRow> run_rotation_study(const RotationStudyConfig& cfg) {
    cfg.validate();
    std::vector<std::future<RotationRow>> jobs;
    for (double d : cfg.d_star_values)
        jobs.push_back(std::async(std::launch::async, [&cfg, d] { return run_rotation_point(cfg, d); }));
    std::vector<RotationRow> rows;
    for (auto& j : jobs) rows.push_back(j.get());
    return rows;
}

inline constexpr const char* kRotationHeader = "d_star_um,theta_deg,converged,settle_s";

inline void write_rotation_csv(std::ostream& out, const std::vector<RotationRow>& rows) {
    out << kRotationHeader << '\n';
    for (const auto& r : rows)
        out << csv::num(r.d_star) << ',' << csv::num(r.theta_deg) << ',' << (r.converged ? 1 : 0) << ','
            << csv::num(r.settle_s) << '\n';
}

inline std::vector<RotationRow> read_rotation_csv(std::istream& in) {
    std::vector<RotationRow> rows;
    int line = 1;
    for (const auto& c : csv::read_table(in, kRotationHeader)) {
        ++line;
        rows.push_back({csv::to_double(c[0], line), csv::to_double(c[1], line), c[2] == "1",
                        csv::to_double(c[3], line)});
    }
    return rows;
}

inline nlohmann::json rotation_summary(const RotationStudyConfig& cfg, const std::vector<RotationRow>& rows) {
    std::vector<double> d, th;
    bool all_converged = true;
    for (const auto& r : rows) {
        d.push_back(r.d_star);
        th.push_back(r.theta_deg);
        all_converged = all_converged && r.converged;
    }
    return {{"strategy", cfg.strategy == Strategy::A ? "A" : "B"},
            {"m", cfg.strategy == Strategy::A ? 1.0 : cfg.power_ratio_m},
            {"points", rows.size()},
            {"spearman", rows.size() >= 2 ? spearman(d, th) : 0.0},
            {"all_converged", all_converged}};
}

// ---------------------------------------------------------------------------
// Rendering consistency study

/// A single trapped element held fixed while its trap is dragged through a
/// displacement grid by hand input, along a radial (x) and an axial (z) axis.
/// Each sample compares the pre-scaled rendered force projected on the
/// displacement direction with the model magnitude at the actual distance.
struct ConsistencyConfig {
    OpticalForceParams params = default_force_params();
    TeleopConfig teleop{};
    double element_radius = 1.0;
    double max_displacement = 0.0;   ///< µm; 0 means 95% of the cutoff
    std::size_t points = 40;         ///< grid points per axis
    double step_per_tick = 0.001;    ///< µm of trap travel per tick while moving
    std::size_t dwell_ticks = 600;   ///< steady mode: ticks held at each grid point
    double dt = 1e-3;
    Medium medium{};

    double extent() const { return max_displacement > 0.0 ? max_displacement : 0.95 * params.cutoff_r_max; }

    void validate() const {
        params.validate();
        if (points == 0) throw ValidationError("points", "empty sweep grid");
        if (!(step_per_tick > 0.0) || step_per_tick > 0.01)
            throw ValidationError("step_per_tick", "must lie in (0, 0.01] µm");
        if (!(extent() > 0.0)) throw ValidationError("max_displacement", "must be > 0");
        if (!(element_radius > 0.0)) throw ValidationError("element_radius", "must be > 0");
    }
};

struct ConsistencySample {
    std::string axis;  ///< "radial" or "axial"
    std::string mode;  ///< "steady" (damping off, dwell) or "sweep" (continuous drag, damping on)
    double displacement = 0.0;  ///< µm, actual trap-element distance
    double model = 0.0;         ///< pN
    double rendered = 0.0;      ///< pN, f_d projected on the restoring direction

    friend bool operator==(const ConsistencySample&, const ConsistencySample&) = default;
};

struct ConsistencyResult {
    FitMetrics radial;        ///< continuous sweep, damping on
    FitMetrics axial;
    FitMetrics radial_steady; ///< dwell, damping off
    FitMetrics axial_steady;
    std::vector<ConsistencySample> samples;
};

namespace detail {

/// Pinned one-element robot driven through the real teleop pipeline.
class ConsistencyRig {
public:
    ConsistencyRig(const ConsistencyConfig& cfg, const TeleopConfig& tc)
        : cfg_(cfg), tc_(tc), rng_(0) {
        world_.robot.elements = {{{}, cfg.element_radius, 0}};
        world_.robot.pinned = true;
        traps_ = {{{}, 1.0}};
    }

    void tick(const Vec3& hand_velocity) {
        motion_ = lowpass_step(motion_, hand_velocity, tc_.alpha_m).state;
        traps_[0] = update_trap(traps_[0], motion_.y_prev, tc_.g_control, cfg_.dt, Aabb{{-1e6, -1e6, -1e6}, {1e6, 1e6, 1e6}});
        auto out = step(world_, traps_, cfg_.params, cfg_.medium, cfg_.dt, rng_);
        world_ = std::move(out.next);
        const Vec3 f_raw = raw_force(out.optical, world_.robot.elements, devices_, Device::left);
        const auto r = render_force(f_raw, force_, tc_, motion_.y_prev);
        force_ = r.filter;
        last_ = r.output;
    }

    ConsistencySample sample(std::string axis, std::string mode) const {
        const Vec3 d = traps_[0].position - world_.robot.pose.position;
        const double r = norm(d);
        const Vec3 u = r > 0.0 ? d / r : Vec3{};
        // f_raw is the trap-side reaction, so the restoring magnitude is along -u
        const double rendered = -dot(last_.f_damped, u);
        return {std::move(axis), std::move(mode), r, force_magnitude(cfg_.params, r), rendered};
    }

    double displacement() const { return distance(traps_[0].position, world_.robot.pose.position); }

private:
    const ConsistencyConfig& cfg_;
    TeleopConfig tc_;
    World world_;
    std::vector<Trap> traps_;
    std::vector<Device> devices_{Device::left};
    CounterRng rng_;
    LowPassState motion_{};
    LowPassState force_{};
    HapticOutput last_{};
};

}  // namespace detail

inline std::vector<ConsistencySample> consistency_sweep(const ConsistencyConfig& cfg, const Vec3& axis_dir,
                                                        const std::string& axis, bool steady) {
    TeleopConfig tc = cfg.teleop;
    if (steady) tc.damping_b = 0.0;
    detail::ConsistencyRig rig(cfg, tc);
    const double hand_speed = cfg.step_per_tick / (cfg.dt * tc.g_control);
    const double extent = cfg.extent();
    const double spacing = cfg.points > 1 ? extent / static_cast<double>(cfg.points - 1) : 0.0;
    std::vector<ConsistencySample> out;

    if (steady) {
        // move to each grid point, then hold still until both filters settle
        for (std::size_t i = 0; i < cfg.points; ++i) {
            const double target = spacing * static_cast<double>(i);
            const auto move_ticks = static_cast<std::size_t>(std::llround((target - rig.displacement()) / cfg.step_per_tick));
            for (std::size_t k = 0; k < move_ticks; ++k) rig.tick(axis_dir * hand_speed);
            for (std::size_t k = 0; k < cfg.dwell_ticks; ++k) rig.tick({});
            out.push_back(rig.sample(axis, "steady"));
        }
        return out;
    }

    // continuous drag at constant hand speed, sampled every grid spacing
    const auto total = static_cast<std::size_t>(std::ceil(extent / cfg.step_per_tick));
    const std::size_t every = std::max<std::size_t>(1, total / std::max<std::size_t>(1, cfg.points));
    for (std::size_t k = 1; k <= total; ++k) {
        rig.tick(axis_dir * hand_speed);
        if (k % every == 0 && rig.displacement() <= extent) out.push_back(rig.sample(axis, "sweep"));
    }
    return out;
}

inline ConsistencyResult run_consistency_study(const ConsistencyConfig& cfg) {
    cfg.validate();
    ConsistencyResult res;
    auto metrics = [](const std::vector<ConsistencySample>& s) {
        std::vector<double> model, rendered;
        for (const auto& x : s) {
            model.push_back(x.model);
            rendered.push_back(x.rendered);
        }
        return fit_metrics(model, rendered);
    };
    struct Job {
        Vec3 dir;
        const char* axis;
        bool steady;
    };
    const Job jobs[] = {{{1, 0, 0}, "radial", false}, {{0, 0, 1}, "axial", false},
                        {{1, 0, 0}, "radial", true},  {{0, 0, 1}, "axial", true}};
    std::vector<std::future<std::vector<ConsistencySample>>> futures;
    for (const auto& j : jobs)
        futures.push_back(std::async(std::launch::async, [&cfg, j] { return consistency_sweep(cfg, j.dir, j.axis, j.steady); }));
    FitMetrics* slots[] = {&res.radial, &res.axial, &res.radial_steady, &res.axial_steady};
    for (std::size_t i = 0; i < futures.size(); ++i) {
        auto s = futures[i].get();
        *slots[i] = metrics(s);
        res.samples.insert(res.samples.end(), s.begin(), s.end());
    }
    return res;
}

inline constexpr const char* kConsistencyHeader = "axis,mode,displacement_um,model_pN,rendered_pN";

inline void write_consistency_csv(std::ostream& out, const std::vector<ConsistencySample>& rows) {
    out << kConsistencyHeader << '\n';
    for (const auto& r : rows)
        out << r.axis << ',' << r.mode << ',' << csv::num(r.displacement) << ',' << csv::num(r.model) << ','
            << csv::num(r.rendered) << '\n';
}

inline std::vector<ConsistencySample> read_consistency_csv(std::istream& in) {
    std::vector<ConsistencySample> rows;
    int line = 1;
    for (const auto& c : csv::read_table(in, kConsistencyHeader)) {
        ++line;
        rows.push_back({c[0], c[1], csv::to_double(c[2], line), csv::to_double(c[3], line),
                        csv::to_double(c[4], line)});
    }
    return rows;
}

inline nlohmann::json consistency_summary(const ConsistencyResult& r) {
    return {{"radial", to_json(r.radial)},
            {"axial", to_json(r.axial)},
            {"radial_steady", to_json(r.radial_steady)},
            {"axial_steady", to_json(r.axial_steady)}};
}

// ---------------------------------------------------------------------------
// Delivery study

enum class PolicyKind { force_blind, force_aware };

inline constexpr std::string_view to_string(PolicyKind k) {
    return k == PolicyKind::force_blind ? "force_blind" : "force_aware";
}

/// Scripted stand-in for a human operator. Steers the robot reference point
/// through waypoints; the force-aware kind slows down in proportion to the
/// raw model force it is rendered.
struct OperatorPolicy {
    PolicyKind kind = PolicyKind::force_blind;
    double nominal_speed = 60.0;  ///< µm/s of trap travel
    double slowdown_gain = 0.0;   ///< µm/s per pN (force_aware only)
    std::vector<Vec3> waypoints;  ///< robot reference targets, µm
    double waypoint_tolerance = 1.0;

    void validate() const {
        if (!(nominal_speed > 0.0) || !std::isfinite(nominal_speed))
            throw ValidationError("policy.nominal_speed", "must be > 0");
        if (!(slowdown_gain >= 0.0) || !std::isfinite(slowdown_gain))
            throw ValidationError("policy.slowdown_gain", "must be >= 0");
        if (!(waypoint_tolerance > 0.0)) throw ValidationError("policy.waypoint_tolerance", "must be > 0");
        for (const auto& w : waypoints)
            if (!is_finite(w)) throw ValidationError("policy.waypoints", "must be finite");
    }

    double speed(double f_raw) const {
        if (kind == PolicyKind::force_blind) return nominal_speed;
        return std::max(0.0, nominal_speed - slowdown_gain * f_raw);
    }
};

/// Robot targets that carry the payload from its start onto the goal centre.
inline std::vector<Vec3> default_waypoints(const Scenario& s) {
    const Vec3 shift = s.goal.center - s.cells.at(s.payload_cell).position;
    return {s.robot.pose.position + shift};
}

/// Input source that plays an OperatorPolicy against a live session. Commands
/// are refreshed at the record rate, like an operator reacting to the display.
class PolicyInput final : public InputSource {
public:
    PolicyInput(OperatorPolicy policy, const Scenario& scenario) : policy_(std::move(policy)) {
        for (Device d : {Device::left, Device::right})
            if (!scenario.traps_of(d).empty()) devices_.push_back(d);
        if (policy_.waypoints.empty()) policy_.waypoints = default_waypoints(scenario);
    }

    bool poll(const Session& session, std::vector<ClientMessage>& out) override {
        if (!session.is_broadcast_tick(session.tick_count())) return true;
        const Vec3 pos = session.world().robot.pose.position;
        while (next_ < policy_.waypoints.size() && distance(pos, policy_.waypoints[next_]) <= policy_.waypoint_tolerance)
            ++next_;
        Vec3 hand;
        if (next_ < policy_.waypoints.size()) {
            const Vec3 d = policy_.waypoints[next_] - pos;
            double f = 0.0;
            for (Device dev : devices_) f = std::max(f, norm(session.channel(dev).last.f_raw));
            const double speed = policy_.speed(f);
            hand = d / norm(d) * (speed / session.scenario().teleop.g_control);
        }
        for (Device dev : devices_) out.emplace_back(HandInput{dev, hand, session.time()});
        return true;
    }

private:
    OperatorPolicy policy_;
    std::vector<Device> devices_;
    std::size_t next_ = 0;
};

struct DeliveryConfig {
    Scenario scenario;
    OperatorPolicy blind{PolicyKind::force_blind, 60.0, 0.0, {}, 1.0};
    OperatorPolicy aware{PolicyKind::force_aware, 60.0, 8.0, {}, 1.0};
    std::size_t trials_per_condition = 10;
    std::uint64_t base_seed = 1;
    bool parallel = true;

    void validate() const {
        if (trials_per_condition < 2) throw ValidationError("trials", "need at least 2 trials per condition");
        if (blind.kind != PolicyKind::force_blind || aware.kind != PolicyKind::force_aware)
            throw ValidationError("policy.kind", "conditions must be force_blind and force_aware");
        blind.validate();
        aware.validate();
        scenario.validate();
    }
};

struct DeliveryTrial {
    PolicyKind condition = PolicyKind::force_blind;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    TrialLog log;
};

struct ConditionSummary {
    PolicyKind condition = PolicyKind::force_blind;
    TrialSummary summary;
};

struct DeliveryResult {
    std::vector<DeliveryTrial> trials;  ///< blind trials by index, then aware trials by index
    ConditionSummary blind;
    ConditionSummary aware;
    double force_sd_reduction = 0.0;     ///< (SD_blind − SD_aware) / SD_blind
    double distance_sd_reduction = 0.0;
    double force_mean_reduction = 0.0;
};

inline TrialLog run_delivery_trial(const Scenario& base, const OperatorPolicy& policy, std::uint64_t seed) {
    Scenario s = base;
    s.seed = seed;
    PolicyInput input(policy, s);
    VirtualClock clock;
    return run_session(s, input, clock);
}

inline DeliveryResult run_delivery_study(const DeliveryConfig& cfg) {
    cfg.validate();
    DeliveryResult res;
    std::vector<std::future<TrialLog>> jobs;
    const auto launch = cfg.parallel ? std::launch::async : std::launch::deferred;
    for (const auto* p : {&cfg.blind, &cfg.aware}) {
        for (std::size_t i = 0; i < cfg.trials_per_condition; ++i) {
            const std::uint64_t seed = cfg.base_seed + i;
            res.trials.push_back({p->kind, i, seed, {}});
            jobs.push_back(std::async(launch, [&cfg, p, seed] { return run_delivery_trial(cfg.scenario, *p, seed); }));
        }
    }
    for (std::size_t i = 0; i < jobs.size(); ++i) res.trials[i].log = jobs[i].get();

    std::vector<TrialLog> blind, aware;
    for (const auto& t : res.trials) (t.condition == PolicyKind::force_blind ? blind : aware).push_back(t.log);
    res.blind = {PolicyKind::force_blind, summarize(blind)};
    res.aware = {PolicyKind::force_aware, summarize(aware)};
    res.force_sd_reduction = reduction(res.blind.summary.contact_force.sd, res.aware.summary.contact_force.sd);
    res.distance_sd_reduction = reduction(res.blind.summary.trap_distance.sd, res.aware.summary.trap_distance.sd);
    res.force_mean_reduction = reduction(res.blind.summary.contact_force.mean, res.aware.summary.contact_force.mean);
    return res;
}

struct TrialRow {
    std::string condition;
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool success = false;
    std::string reason;
    double duration = 0.0;
    double contact_mean = 0.0;
    double contact_sd = 0.0;
    double distance_mean = 0.0;
    double distance_sd = 0.0;

    friend bool operator==(const TrialRow&, const TrialRow&) = default;
};

inline TrialRow trial_row(const DeliveryTrial& t) {
    const auto s = summarize({t.log});
    const auto& o = t.log.outcome.value();
    return {std::string(to_string(t.condition)), t.index, t.seed, o.success, o.reason, o.duration,
            s.contact_force.mean, s.contact_force.sd, s.trap_distance.mean, s.trap_distance.sd};
}

inline constexpr const char* kTrialHeader =
    "condition,trial,seed,success,reason,duration_s,contact_mean_pN,contact_sd_pN,distance_mean_um,distance_sd_um";

inline void write_trials_csv(std::ostream& out, const std::vector<TrialRow>& rows) {
    out << kTrialHeader << '\n';
    for (const auto& r : rows)
        out << r.condition << ',' << r.index << ',' << r.seed << ',' << (r.success ? 1 : 0) << ',' << r.reason << ','
            << csv::num(r.duration) << ',' << csv::num(r.contact_mean) << ',' << csv::num(r.contact_sd) << ','
            << csv::num(r.distance_mean) << ',' << csv::num(r.distance_sd) << '\n';
}

inline std::vector<TrialRow> read_trials_csv(std::istream& in) {
    std::vector<TrialRow> rows;
    int line = 1;
    for (const auto& c : csv::read_table(in, kTrialHeader)) {
        ++line;
        TrialRow r;
        r.condition = c[0];
        r.index = static_cast<std::size_t>(std::stoull(c[1]));
        r.seed = std::stoull(c[2]);
        r.success = c[3] == "1";
        r.reason = c[4];
        r.duration = csv::to_double(c[5], line);
        r.contact_mean = csv::to_double(c[6], line);
        r.contact_sd = csv::to_double(c[7], line);
        r.distance_mean = csv::to_double(c[8], line);
        r.distance_sd = csv::to_double(c[9], line);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline constexpr const char* kSummaryHeader =
    "condition,trials,records,success_rate,contact_mean_pN,contact_sd_pN,distance_mean_um,distance_sd_um";

inline void write_summary_csv(std::ostream& out, const DeliveryResult& r) {
    out << kSummaryHeader << '\n';
    for (const auto* c : {&r.blind, &r.aware}) {
        const auto& s = c->summary;
        out << to_string(c->condition) << ',' << s.trials << ',' << s.records << ',' << csv::num(s.success_rate)
            << ',' << csv::num(s.contact_force.mean) << ',' << csv::num(s.contact_force.sd) << ','
            << csv::num(s.trap_distance.mean) << ',' << csv::num(s.trap_distance.sd) << '\n';
    }
}

inline nlohmann::json to_json(const TrialSummary& s) {
    return {{"trials", s.trials},
            {"records", s.records},
            {"success_rate", s.success_rate},
            {"contact_force", {{"mean", s.contact_force.mean}, {"sd", s.contact_force.sd}}},
            {"trap_distance", {{"mean", s.trap_distance.mean}, {"sd", s.trap_distance.sd}}}};
}

inline nlohmann::json delivery_summary(const DeliveryResult& r) {
    return {{"force_blind", to_json(r.blind.summary)},
            {"force_aware", to_json(r.aware.summary)},
            {"contact_force_sd_reduction", r.force_sd_reduction},
            {"trap_distance_sd_reduction", r.distance_sd_reduction},
            {"contact_force_mean_reduction", r.force_mean_reduction}};
}

/// Writes trials.csv, summary.csv, summary.json and one log per trial.
inline void write_delivery_outputs(const std::filesystem::path& dir, const DeliveryResult& r) {
    std::filesystem::create_directories(dir / "logs");
    std::vector<TrialRow> rows;
    for (const auto& t : r.trials) {
        rows.push_back(trial_row(t));
        std::ofstream log(dir / "logs" / (std::string(to_string(t.condition)) + "_" + std::to_string(t.index) + ".jsonl"));
        write_log(log, t.log);
    }
    std::ofstream trials(dir / "trials.csv");
    write_trials_csv(trials, rows);
    std::ofstream summary(dir / "summary.csv");
    write_summary_csv(summary, r);
    std::ofstream js(dir / "summary.json");
    js << delivery_summary(r).dump(2) << '\n';
}

}  // namespace otdt
