#pragma once

// Scripted protocol client shared by the server tests and the acceptance run.

#include <sys/socket.h>
#include <sys/time.h>

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "otdt/net.hpp"
#include "otdt/protocol.hpp"
#include "otdt/scenario.hpp"
#include "otdt/server.hpp"

namespace otdt::testing {

class Client {
public:
    explicit Client(std::uint16_t port, double recv_timeout_s = 20.0)
        : stream_(net::connect_tcp("127.0.0.1", port)) {
        timeval tv{};
        tv.tv_sec = static_cast<time_t>(recv_timeout_s);
        ::setsockopt(stream_.fd(), SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    }

    void send(const nlohmann::json& j) { stream_.write_line(j.dump()); }
    void send_raw(const std::string& line) { stream_.write_line(line); }

    std::optional<std::string> line() { return stream_.read_line(); }

    std::optional<nlohmann::json> recv() {
        const auto l = line();
        if (!l) return std::nullopt;
        return nlohmann::json::parse(*l);
    }

    /// Every line until the server closes the connection.
    std::vector<std::string> drain() {
        std::vector<std::string> out;
        while (auto l = line()) out.push_back(*l);
        return out;
    }

    void close() { stream_.shutdown(); }

private:
    net::LineStream stream_;
};

/// Short trial used for the protocol golden: one trap, a timeout of 0.3 s.
inline Scenario golden_scenario() {
    return load_scenario(R"({
      "schema_version": 1,
      "name": "golden",
      "seed": 11,
      "timeout": 0.3,
      "traps": [{"position": [0, 0, 0]}, {"position": [0, 3, 0], "device": "right"}],
      "robot": {"elements": [{"radius": 1.0, "trap": 0}, {"offset": [0, 3, 0], "radius": 1.0, "trap": 1}]},
      "force_params": {"K": 5, "delta": 1, "A": 2, "C": 3, "r_max": 4},
      "cells": [{"position": [6, 0, 0], "radius": 3}],
      "goal": {"center": [20, 0, 0], "radius": 2}
    })");
}

/// Headless server serving only the golden scenario.
inline ServerOptions golden_server_options() {
    ServerOptions o;
    o.port = 0;
    o.headless = true;
    o.scenarios = {golden_scenario()};
    return o;
}

/// Selects the golden scenario, queues timestamped inputs in the lobby, sends
/// one malformed line and starts. Returns every line the server sent.
inline std::vector<std::string> run_golden_script(std::uint16_t port) {
    Client c(port);
    std::vector<std::string> lines;
    if (auto w = c.line()) lines.push_back(*w);
    c.send({{"type", "select"}, {"scenario", "golden"}});
    c.send(hand_input_message(Device::left, {0.5, 0, 0}, 0.05));
    c.send(hand_input_message(Device::right, {0.5, 0.1, 0}, 0.05));
    c.send(hand_input_message(Device::left, {0, 0.3, 0}, 0.15));
    c.send_raw("{bad json");
    c.send(hand_input_message(Device::right, {0, 0, 0}, 0.2));
    c.send(control_message("start"));
    for (auto& l : c.drain()) lines.push_back(std::move(l));
    return lines;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

inline void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p);
    for (const auto& l : lines) out << l << '\n';
}

inline std::filesystem::path golden_path() {
    return std::filesystem::path(OTDT_GOLDEN_DIR) / "session_stream.jsonl";
}

}  // namespace otdt::testing
