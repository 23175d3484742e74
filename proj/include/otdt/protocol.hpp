#pragma once

// Newline-delimited JSON messages exchanged with operator and observer
// clients. See docs/protocol.md for the full message reference.
//
// client -> server
//   {"type":"hand_input","device":"left|right","vel":[vx,vy,vz],"t":seconds}
//   {"type":"control","action":"start|abort"}
//   {"type":"select","scenario":"name"}        (lobby only)
//   {"type":"observe","session":id}            (first message of an observer)
// server -> client
//   welcome, state (at the record rate), result, error

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "otdt/session.hpp"
#include "otdt/trial_log.hpp"

namespace otdt {

struct SelectScenario {
    std::string name;
};

struct ObserveRequest {
    std::uint64_t session = 0;
};

using InboundMessage = std::variant<HandInput, ControlMessage, SelectScenario, ObserveRequest>;

/// Parse one client line. Returns nullopt and fills `error` when malformed.
inline std::optional<InboundMessage> parse_client_message(std::string_view line, std::string& error) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line.begin(), line.end());
    } catch (const nlohmann::json::parse_error& e) {
        error = std::string("malformed JSON: ") + e.what();
        return std::nullopt;
    }
    try {
        if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
            error = "message needs a string \"type\"";
            return std::nullopt;
        }
        const auto type = j.at("type").get<std::string>();
        if (type == "hand_input") {
            const auto dev = device_from_string(j.at("device").get<std::string>());
            if (!dev) {
                error = "device must be \"left\" or \"right\"";
                return std::nullopt;
            }
            const auto& v = j.at("vel");
            if (!v.is_array() || v.size() != 3) {
                error = "vel must be [vx, vy, vz]";
                return std::nullopt;
            }
            HandInput h{*dev, {v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>()},
                        j.value("t", 0.0)};
            if (!is_finite(h.velocity) || !std::isfinite(h.timestamp)) {
                error = "hand_input values must be finite";
                return std::nullopt;
            }
            return h;
        }
        if (type == "control") {
            auto action = j.at("action").get<std::string>();
            if (action != "start" && action != "abort") {
                error = "control action must be start or abort";
                return std::nullopt;
            }
            return ControlMessage{std::move(action)};
        }
        if (type == "select") return SelectScenario{j.at("scenario").get<std::string>()};
        if (type == "observe") return ObserveRequest{j.at("session").get<std::uint64_t>()};
        error = "unknown message type " + type;
    } catch (const nlohmann::json::exception& e) {
        error = std::string("bad message: ") + e.what();
    }
    return std::nullopt;
}

inline nlohmann::json hand_input_message(Device d, const Vec3& v, double t) {
    return {{"type", "hand_input"}, {"device", std::string(to_string(d))}, {"vel", vec_json(v)}, {"t", t}};
}

inline nlohmann::json control_message(std::string_view action) {
    return {{"type", "control"}, {"action", std::string(action)}};
}

/// Static and dynamic geometry needed to draw the scene.
inline nlohmann::json geometry_json(const Session& s) {
    using nlohmann::json;
    const auto& w = s.world();
    json elements = json::array();
    for (const auto& sp : world_spheres(w.robot))
        elements.push_back({{"center", vec_json(sp.center)}, {"radius", sp.radius}});
    json traps = json::array();
    for (std::size_t i = 0; i < s.traps().size(); ++i)
        traps.push_back({{"position", vec_json(s.traps()[i].position)},
                         {"power_weight", s.traps()[i].power_weight},
                         {"device", std::string(to_string(s.scenario().trap_devices[i]))}});
    json cells = json::array();
    for (const auto& c : w.cells) cells.push_back({{"position", vec_json(c.position)}, {"radius", c.radius}});
    const auto scen = s.scenario().to_json();
    return {{"elements", elements}, {"traps", traps}, {"cells", cells},
            {"obstacles", scen.at("obstacles")}, {"goal", scen.at("goal")},
            {"payload_cell", s.scenario().payload_cell}};
}

inline nlohmann::json state_message(const Session& s, const LogRecord& r) {
    auto j = record_fields(r);
    j["type"] = "state";
    j["phase"] = std::string(to_string(s.phase()));
    j["geometry"] = geometry_json(s);
    return j;
}

inline nlohmann::json result_message(std::uint64_t session_id, const TrialLog& log) {
    nlohmann::json j{{"type", "result"}, {"session", session_id}, {"scenario", log.header.scenario},
                     {"config_hash", log.header.config_hash}};
    j["outcome"] = log.outcome ? outcome_fields(*log.outcome) : nlohmann::json(nullptr);
    return j;
}

inline nlohmann::json welcome_message(std::uint64_t session_id, const std::string& scenario,
                                      const std::vector<std::string>& available, bool headless) {
    return {{"type", "welcome"}, {"session", session_id}, {"scenario", scenario},
            {"scenarios", available}, {"phase", "lobby"}, {"mode", headless ? "headless" : "realtime"}};
}

inline nlohmann::json error_message(std::string_view what) {
    return {{"type", "error"}, {"message", std::string(what)}};
}

}  // namespace otdt
