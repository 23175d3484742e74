#pragma once

// Trial logs as JSON lines: one header line, then input and record lines in
// tick order, then exactly one outcome line. Serialization is deterministic so
// a replayed trial can be compared byte for byte.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "otdt/error.hpp"
#include "otdt/force_model.hpp"
#include "otdt/scenario.hpp"
#include "otdt/teleop.hpp"
#include "otdt/vec3.hpp"

namespace otdt {

struct LogHeader {
    std::string scenario;
    std::string config_hash;  ///< hex FNV-1a of the canonical scenario
    std::uint64_t seed = 0;
    double dt = 0.0;
    double tick_rate = 0.0;   ///< record / broadcast rate, Hz

    friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

struct LogRecord {
    std::uint64_t tick = 0;
    double t = 0.0;
    Pose robot;
    std::vector<Vec3> traps;
    Vec3 payload;
    double contact_force = 0.0; ///< pN, max per-cell contact load
    double trap_distance = 0.0; ///< µm, min over assigned trap/element pairs
    Vec3 f_hand_left;
    Vec3 f_hand_right;
    bool warning = false;
    bool trap_lost = false;
    std::vector<std::string> events;

    friend bool operator==(const LogRecord&, const LogRecord&) = default;
};

/// An input consumed by the session at `tick` (zero-order hold until the next).
struct LogInput {
    std::uint64_t tick = 0;
    std::optional<Device> device;
    Vec3 velocity;
    std::string action;  ///< empty for hand input, "abort" for control

    friend bool operator==(const LogInput&, const LogInput&) = default;
};

struct Outcome {
    bool success = false;
    std::string reason;
    double duration = 0.0;
    std::uint64_t ticks = 0;
    std::vector<double> first_kicks;  ///< first robot Brownian displacements, µm

    friend bool operator==(const Outcome&, const Outcome&) = default;
};

using LogEntry = std::variant<LogInput, LogRecord>;

struct TrialLog {
    LogHeader header;
    std::vector<LogEntry> entries;
    std::optional<Outcome> outcome;

    std::vector<const LogRecord*> records() const {
        std::vector<const LogRecord*> out;
        for (const auto& e : entries)
            if (const auto* r = std::get_if<LogRecord>(&e)) out.push_back(r);
        return out;
    }

    std::vector<const LogInput*> inputs() const {
        std::vector<const LogInput*> out;
        for (const auto& e : entries)
            if (const auto* i = std::get_if<LogInput>(&e)) out.push_back(i);
        return out;
    }
};

// ---------------------------------------------------------------------------

namespace detail {

inline Vec3 vec_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }
inline Quat quat_from(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

}  // namespace detail

inline nlohmann::json to_json(const LogHeader& h) {
    return {{"type", "header"}, {"scenario", h.scenario}, {"config_hash", h.config_hash},
            {"seed", h.seed}, {"dt", h.dt}, {"tick_rate", h.tick_rate}};
}

/// Record fields shared by log lines and live `state` messages.
inline nlohmann::json record_fields(const LogRecord& r) {
    nlohmann::json traps = nlohmann::json::array();
    for (const auto& t : r.traps) traps.push_back(vec_json(t));
    return {{"tick", r.tick},
            {"t", r.t},
            {"robot", {{"position", vec_json(r.robot.position)}, {"orientation", quat_json(r.robot.orientation)}}},
            {"traps", traps},
            {"payload", vec_json(r.payload)},
            {"contact_force", r.contact_force},
            {"trap_distance", r.trap_distance},
            {"f_hand", {{"left", vec_json(r.f_hand_left)}, {"right", vec_json(r.f_hand_right)}}},
            {"warning", r.warning},
            {"trap_lost", r.trap_lost},
            {"events", r.events}};
}

inline nlohmann::json to_json(const LogRecord& r) {
    auto j = record_fields(r);
    j["type"] = "record";
    return j;
}

inline nlohmann::json to_json(const LogInput& in) {
    nlohmann::json j{{"type", "input"}, {"tick", in.tick}};
    if (in.device) {
        j["device"] = std::string(to_string(*in.device));
        j["vel"] = vec_json(in.velocity);
    }
    if (!in.action.empty()) j["action"] = in.action;
    return j;
}

inline nlohmann::json outcome_fields(const Outcome& o) {
    return {{"success", o.success}, {"reason", o.reason}, {"duration", o.duration},
            {"ticks", o.ticks}, {"first_kicks", o.first_kicks}};
}

inline nlohmann::json to_json(const Outcome& o) {
    auto j = outcome_fields(o);
    j["type"] = "outcome";
    return j;
}

inline void write_log(std::ostream& out, const TrialLog& log) {
    out << to_json(log.header).dump() << '\n';
    for (const auto& e : log.entries) std::visit([&](const auto& v) { out << to_json(v).dump() << '\n'; }, e);
    if (log.outcome) out << to_json(*log.outcome).dump() << '\n';
}

inline std::string serialize_log(const TrialLog& log) {
    std::ostringstream os;
    write_log(os, log);
    return os.str();
}

inline LogRecord record_from_json(const nlohmann::json& j) {
    LogRecord r;
    r.tick = j.at("tick").get<std::uint64_t>();
    r.t = j.at("t").get<double>();
    r.robot.position = detail::vec_from(j.at("robot").at("position"));
    r.robot.orientation = detail::quat_from(j.at("robot").at("orientation"));
    for (const auto& t : j.at("traps")) r.traps.push_back(detail::vec_from(t));
    r.payload = detail::vec_from(j.at("payload"));
    r.contact_force = j.at("contact_force").get<double>();
    r.trap_distance = j.at("trap_distance").get<double>();
    r.f_hand_left = detail::vec_from(j.at("f_hand").at("left"));
    r.f_hand_right = detail::vec_from(j.at("f_hand").at("right"));
    r.warning = j.at("warning").get<bool>();
    r.trap_lost = j.at("trap_lost").get<bool>();
    r.events = j.at("events").get<std::vector<std::string>>();
    return r;
}

inline Outcome outcome_from_json(const nlohmann::json& j) {
    return {j.at("success").get<bool>(), j.at("reason").get<std::string>(), j.at("duration").get<double>(),
            j.at("ticks").get<std::uint64_t>(), j.at("first_kicks").get<std::vector<double>>()};
}

inline TrialLog read_log(std::istream& in) {
    TrialLog log;
    std::string line;
    int lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(lineno, e.what());
        }
        try {
            const auto type = j.at("type").get<std::string>();
            if (log.outcome) throw ParseError(lineno, "content after outcome line");
            if (type == "header") {
                if (have_header) throw ParseError(lineno, "duplicate header");
                log.header = {j.at("scenario").get<std::string>(), j.at("config_hash").get<std::string>(),
                              j.at("seed").get<std::uint64_t>(), j.at("dt").get<double>(),
                              j.at("tick_rate").get<double>()};
                have_header = true;
            } else if (!have_header) {
                throw ParseError(lineno, "first line must be the header");
            } else if (type == "record") {
                log.entries.emplace_back(record_from_json(j));
            } else if (type == "input") {
                LogInput in_line;
                in_line.tick = j.at("tick").get<std::uint64_t>();
                if (j.contains("device")) {
                    in_line.device = device_from_string(j.at("device").get<std::string>());
                    if (!in_line.device) throw ParseError(lineno, "bad device");
                    in_line.velocity = detail::vec_from(j.at("vel"));
                }
                if (j.contains("action")) in_line.action = j.at("action").get<std::string>();
                log.entries.emplace_back(in_line);
            } else if (type == "outcome") {
                log.outcome = outcome_from_json(j);
            } else {
                throw ParseError(lineno, "unknown line type " + type);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(lineno, e.what());
        }
    }
    if (!have_header) throw ParseError(1, "empty log");
    return log;
}

inline TrialLog read_log_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open log " + path);
    return read_log(in);
}

}  // namespace otdt
