#pragma once

// A teleoperation session: one scenario, one world, one pipeline per device,
// advanced tick by tick by a single owner. Inputs are held per device and
// consumed at the start of each physics tick; records are emitted at the
// broadcast rate and on the final tick.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "otdt/dynamics.hpp"
#include "otdt/error.hpp"
#include "otdt/rng.hpp"
#include "otdt/scenario.hpp"
#include "otdt/teleop.hpp"
#include "otdt/trial_log.hpp"

namespace otdt {

enum class Phase { lobby, running, ended };

inline constexpr std::string_view to_string(Phase p) {
    switch (p) {
        case Phase::lobby: return "lobby";
        case Phase::running: return "running";
        case Phase::ended: return "ended";
    }
    return "lobby";
}

struct ControlMessage {
    std::string action;  ///< "start" or "abort"
};

using ClientMessage = std::variant<HandInput, ControlMessage>;

inline constexpr std::size_t kKickTraceLength = 10;

class Session {
public:
    explicit Session(Scenario scenario)
        : scenario_(std::move(scenario)),
          world_(scenario_.initial_world()),
          traps_(scenario_.traps),
          rng_(scenario_.seed) {
        scenario_.validate();
        loss_.lost.assign(traps_.size(), false);
    }

    const Scenario& scenario() const { return scenario_; }
    const World& world() const { return world_; }
    const std::vector<Trap>& traps() const { return traps_; }
    Phase phase() const { return phase_; }
    const TrialLog& log() const { return log_; }
    TrialLog take_log() { return std::move(log_); }
    const DeviceChannel& channel(Device d) const { return channels_[index(d)]; }
    const TrapLossStatus& trap_loss() const { return loss_; }
    double time() const { return world_.time; }
    std::uint64_t tick_count() const { return world_.tick; }

    void start() {
        if (phase_ != Phase::lobby) return;
        phase_ = Phase::running;
        log_.header = {scenario_.name, hex64(scenario_.hash()), scenario_.seed, scenario_.dt,
                       scenario_.broadcast_hz};
        pending_events_.push_back("start");
    }

    /// Queue a hand velocity; it takes effect at the next tick.
    void set_hand_velocity(Device d, const Vec3& v) { mailbox_[index(d)] = v; }

    void apply(const ClientMessage& msg) {
        if (const auto* h = std::get_if<HandInput>(&msg)) {
            set_hand_velocity(h->device, h->velocity);
        } else {
            const auto& c = std::get<ControlMessage>(msg);
            if (c.action == "start") start();
            else if (c.action == "abort") abort_requested_ = true;
        }
    }

    /// Close the trial because the input stream went away.
    void disconnect() {
        if (phase_ == Phase::running) finish(false, "disconnect");
    }

    struct TickResult {
        const LogRecord* record = nullptr;  ///< set when this tick produced a record
        bool ended = false;
    };

    TickResult tick() {
        if (phase_ != Phase::running) throw std::logic_error("tick() requires a running session");
        const double dt = scenario_.dt;
        const auto& tc = scenario_.teleop;
        const std::uint64_t n = world_.tick;

        const std::size_t entries_before = log_.entries.size();
        auto result = [&] {
            const bool fresh = log_.entries.size() > entries_before &&
                               std::holds_alternative<LogRecord>(log_.entries.back());
            return TickResult{fresh ? &std::get<LogRecord>(log_.entries.back()) : nullptr,
                              phase_ == Phase::ended};
        };

        if (abort_requested_) {
            log_.entries.emplace_back(LogInput{n, std::nullopt, {}, "abort"});
            finish(false, "abort");
            return result();
        }

        // forward path: zero-order hold, motion filter, incremental trap update
        for (Device d : {Device::left, Device::right}) {
            auto& ch = channels_[index(d)];
            if (auto& m = mailbox_[index(d)]) {
                if (*m != ch.hand_velocity) {
                    ch.hand_velocity = *m;
                    log_.entries.emplace_back(LogInput{n, d, *m, {}});
                }
                m.reset();
            }
            ch.motion = lowpass_step(ch.motion, ch.hand_velocity, tc.alpha_m).state;
            for (std::size_t t = 0; t < traps_.size(); ++t)
                if (scenario_.trap_devices[t] == d)
                    traps_[t] = update_trap(traps_[t], ch.motion.y_prev, tc.g_control, dt, scenario_.workspace);
        }

        auto outcome = step(world_, traps_, scenario_.force_params, scenario_.medium, dt, rng_);
        world_ = std::move(outcome.next);
        for (int k = 0; k < 3 && kicks_.size() < kKickTraceLength; ++k) kicks_.push_back(outcome.robot_kick[k]);

        // feedback path
        bool warning = false;
        for (Device d : {Device::left, Device::right}) {
            auto& ch = channels_[index(d)];
            const Vec3 f_raw = raw_force(outcome.optical, world_.robot.elements, scenario_.trap_devices, d);
            auto rendered = render_force(f_raw, ch.force, tc, ch.motion.y_prev);
            ch.force = rendered.filter;
            ch.last = rendered.output;
            warning = warning || rendered.output.warning;
        }

        const auto spheres = world_spheres(world_.robot);
        const bool was_lost = loss_.any_lost;
        loss_ = detect_trap_loss(traps_, world_.robot.elements, spheres, tc.d_loss, loss_);
        for (auto& ch : channels_) ch.last.trap_lost = loss_.any_lost;
        if (loss_.any_lost && !was_lost) pending_events_.push_back("trap_lost");
        if (warning != warning_) pending_events_.push_back(warning ? "warning_on" : "warning_off");
        warning_ = warning;

        const Vec3 payload = world_.cells[scenario_.payload_cell].position;
        const bool delivered = distance(payload, scenario_.goal.center) <= scenario_.goal.radius;

        if (loss_.any_lost) {
            finish(false, "trap_lost");
        } else if (delivered) {
            pending_events_.push_back("goal_reached");
            finish(true, "goal_reached");
        } else if (world_.time >= scenario_.timeout - 0.5 * dt) {
            finish(false, "timeout");
        } else if (is_broadcast_tick(world_.tick)) {
            emit_record();
        }
        return result();
    }

    /// Records fall on ticks where floor(tick * dt * rate) advances.
    bool is_broadcast_tick(std::uint64_t tick) const {
        const double per = scenario_.dt * scenario_.broadcast_hz;
        auto slot = [&](std::uint64_t k) { return static_cast<std::uint64_t>(std::floor(static_cast<double>(k) * per + 1e-9)); };
        return tick == 0 || slot(tick) != slot(tick - 1);
    }

private:
    static constexpr std::size_t index(Device d) { return d == Device::left ? 0 : 1; }

    LogRecord* last_record_mut() {
        for (auto it = log_.entries.rbegin(); it != log_.entries.rend(); ++it)
            if (auto* r = std::get_if<LogRecord>(&*it)) return r;
        return nullptr;
    }

    void emit_record() {
        LogRecord r;
        r.tick = world_.tick;
        r.t = world_.time;
        r.robot = world_.robot.pose;
        for (const auto& t : traps_) r.traps.push_back(t.position);
        r.payload = world_.cells[scenario_.payload_cell].position;
        const auto spheres = world_spheres(world_.robot);
        r.contact_force = contact_forces(spheres, world_.robot.pose.position, world_.cells, world_.obstacles,
                                         world_.drift).max_cell_force;
        r.trap_distance = trap_center_distance(traps_, world_.robot.elements, spheres);
        r.f_hand_left = channels_[0].last.f_hand;
        r.f_hand_right = channels_[1].last.f_hand;
        r.warning = warning_;
        r.trap_lost = loss_.any_lost;
        r.events = std::move(pending_events_);
        pending_events_.clear();
        log_.entries.emplace_back(std::move(r));
        record_emitted_at_ = world_.tick;
    }

    void finish(bool success, std::string reason) {
        if (record_emitted_at_ != world_.tick) {
            emit_record();
        } else if (!pending_events_.empty()) {
            // keep t strictly increasing: fold late events into this tick's record
            if (auto* r = last_record_mut()) {
                for (auto& e : pending_events_) r->events.push_back(std::move(e));
            }
            pending_events_.clear();
        }
        log_.outcome = Outcome{success, std::move(reason), world_.time, world_.tick, kicks_};
        phase_ = Phase::ended;
    }

    Scenario scenario_;
    World world_;
    std::vector<Trap> traps_;
    CounterRng rng_;
    Phase phase_ = Phase::lobby;
    std::array<DeviceChannel, 2> channels_{};
    std::array<std::optional<Vec3>, 2> mailbox_{};
    bool abort_requested_ = false;
    bool warning_ = false;
    TrapLossStatus loss_;
    std::vector<std::string> pending_events_;
    std::vector<double> kicks_;
    TrialLog log_;
    std::optional<std::uint64_t> record_emitted_at_;
};

// ---------------------------------------------------------------------------
// Driving a session

/// Source of client messages for a running session. `poll` is called once
/// before every physics tick; returning false means the stream closed.
class InputSource {
public:
    virtual ~InputSource() = default;
    virtual bool poll(const Session& session, std::vector<ClientMessage>& out) = 0;
};

class Clock {
public:
    virtual ~Clock() = default;
    /// Block until simulated time `t` may be published.
    virtual void wait_until(double t) = 0;
};

/// Advances as fast as possible; used for scripted runs and replay.
class VirtualClock final : public Clock {
public:
    void wait_until(double) override {}
};

/// Paces simulated time against the steady clock.
class WallClock final : public Clock {
public:
    WallClock() : origin_(std::chrono::steady_clock::now()) {}
    void wait_until(double t) override {
        std::this_thread::sleep_until(origin_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                    std::chrono::duration<double>(t)));
    }

private:
    std::chrono::steady_clock::time_point origin_;
};

using RecordCallback = std::function<void(const Session&, const LogRecord&)>;

/// Start the session (if still in the lobby) and tick until the trial ends.
inline TrialLog run_session(Session& session, InputSource& input, Clock& clock,
                            const RecordCallback& on_record = {}) {
    session.start();
    std::vector<ClientMessage> msgs;
    while (session.phase() == Phase::running) {
        msgs.clear();
        if (!input.poll(session, msgs)) {
            session.disconnect();
            break;
        }
        for (const auto& m : msgs) session.apply(m);
        const auto r = session.tick();
        if (r.record) {
            clock.wait_until(r.record->t);
            if (on_record) on_record(session, *r.record);
        }
    }
    return session.take_log();
}

inline TrialLog run_session(const Scenario& scenario, InputSource& input, Clock& clock,
                            const RecordCallback& on_record = {}) {
    Session s(scenario);
    return run_session(s, input, clock, on_record);
}

/// Replays the inputs captured in a log, tick for tick.
class RecordedInput final : public InputSource {
public:
    explicit RecordedInput(const TrialLog& log) {
        for (const auto* in : log.inputs()) inputs_.push_back(*in);
        if (log.outcome && log.outcome->reason == "disconnect") close_at_ = log.outcome->ticks;
    }

    bool poll(const Session& session, std::vector<ClientMessage>& out) override {
        const auto n = session.tick_count();
        if (close_at_ && n >= *close_at_) return false;
        while (next_ < inputs_.size() && inputs_[next_].tick <= n) {
            const auto& in = inputs_[next_++];
            if (in.device) out.emplace_back(HandInput{*in.device, in.velocity, session.time()});
            else out.emplace_back(ControlMessage{in.action});
        }
        return true;
    }

private:
    std::vector<LogInput> inputs_;
    std::size_t next_ = 0;
    std::optional<std::uint64_t> close_at_;
};

/// Re-run a logged trial. The log must have been produced by this scenario.
inline TrialLog replay(const TrialLog& log, const Scenario& scenario) {
    const auto hash = hex64(scenario.hash());
    if (log.header.config_hash != hash)
        throw HashMismatchError("log config hash " + log.header.config_hash + " != scenario hash " + hash);
    RecordedInput input(log);
    VirtualClock clock;
    return run_session(scenario, input, clock);
}

/// Timestamped script of hand inputs applied when simulated time reaches them.
class ScriptedInput final : public InputSource {
public:
    struct Step {
        double t = 0.0;
        ClientMessage message;
    };

    explicit ScriptedInput(std::vector<Step> steps, std::optional<double> close_after = std::nullopt)
        : steps_(std::move(steps)), close_after_(close_after) {
        std::stable_sort(steps_.begin(), steps_.end(), [](const Step& a, const Step& b) { return a.t < b.t; });
    }

    bool poll(const Session& session, std::vector<ClientMessage>& out) override {
        const double now = session.time();
        if (close_after_ && now >= *close_after_) return false;
        const double eps = 0.5 * session.scenario().dt;
        while (next_ < steps_.size() && steps_[next_].t <= now + eps) out.push_back(steps_[next_++].message);
        return true;
    }

private:
    std::vector<Step> steps_;
    std::size_t next_ = 0;
    std::optional<double> close_after_;
};

// ---------------------------------------------------------------------------
// Aggregate metrics

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;  ///< population standard deviation
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
    if (xs.empty()) return {};
    double sum = 0.0;
    for (double x : xs) sum += x;
    const double mean = sum / static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

struct TrialSummary {
    MeanSd contact_force;
    MeanSd trap_distance;
    double success_rate = 0.0;
    std::size_t trials = 0;
    std::size_t records = 0;
};

/// Pools every record of every log; success rate counts logged outcomes.
inline TrialSummary summarize(const std::vector<TrialLog>& logs) {
    if (logs.empty()) throw Error("summarize needs at least one trial log");
    std::vector<double> force, dist;
    std::size_t successes = 0;
    for (const auto& log : logs) {
        for (const auto* r : log.records()) {
            force.push_back(r->contact_force);
            dist.push_back(r->trap_distance);
        }
        if (log.outcome && log.outcome->success) ++successes;
    }
    TrialSummary s;
    s.contact_force = mean_sd(force);
    s.trap_distance = mean_sd(dist);
    s.trials = logs.size();
    s.records = force.size();
    s.success_rate = static_cast<double>(successes) / static_cast<double>(logs.size());
    return s;
}

/// Relative reduction (a - b) / a, e.g. of a standard deviation.
inline double reduction(double a, double b) { return a == 0.0 ? 0.0 : (a - b) / a; }

}  // namespace otdt
