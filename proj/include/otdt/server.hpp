#pragma once

// TCP session server. Each operator connection owns one trial: it sits in the
// lobby until it sends {"type":"control","action":"start"}, then a dedicated
// ticking thread runs the session while the connection's reader thread feeds
// the input mailbox. Observers attach to a running session by id and receive
// the same state stream. After the result message the server closes the
// operator connection and, if configured, writes the trial log.
//
// Headless mode ticks on a virtual clock and applies each hand_input when the
// simulated time reaches its "t"; realtime mode paces against the wall clock
// and applies inputs as they arrive (latest value per device).

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "otdt/net.hpp"
#include "otdt/protocol.hpp"
#include "otdt/scenario.hpp"
#include "otdt/session.hpp"
#include "otdt/trial_log.hpp"

namespace otdt {

struct ServerOptions {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7878;  ///< 0 picks a free port
    std::vector<Scenario> scenarios;
    bool headless = false;
    std::optional<std::filesystem::path> log_dir;
};

/// Mailbox between a connection's reader thread and its ticking thread.
class NetworkInput final : public InputSource {
public:
    explicit NetworkInput(bool scheduled) : scheduled_(scheduled) {}

    void push(const ClientMessage& msg) {
        std::lock_guard lock(mutex_);
        queue_.push_back(msg);
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }

    bool poll(const Session& session, std::vector<ClientMessage>& out) override {
        std::lock_guard lock(mutex_);
        if (closed_) return false;
        if (!scheduled_) {
            out.insert(out.end(), queue_.begin(), queue_.end());
            queue_.clear();
            return true;
        }
        const double now = session.time() + 0.5 * session.scenario().dt;
        for (auto it = queue_.begin(); it != queue_.end();) {
            const auto* h = std::get_if<HandInput>(&*it);
            if (!h || h->timestamp <= now) {
                out.push_back(*it);
                it = queue_.erase(it);
            } else {
                ++it;
            }
        }
        return true;
    }

private:
    bool scheduled_;
    std::mutex mutex_;
    std::deque<ClientMessage> queue_;
    bool closed_ = false;
};

class Server {
public:
    explicit Server(ServerOptions options) : options_(std::move(options)) {
        if (options_.scenarios.empty()) throw Error("server needs at least one scenario");
    }

    ~Server() { stop(); }

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Bind, listen and start accepting. Returns the bound port.
    std::uint16_t start() {
        listener_ = net::listen_tcp(options_.host, options_.port);
        port_ = net::local_port(listener_);
        accept_thread_ = std::thread([this] { accept_loop(); });
        return port_;
    }

    std::uint16_t port() const { return port_; }

    void stop() {
        if (stopping_.exchange(true)) return;
        listener_.shutdown();
        if (accept_thread_.joinable()) accept_thread_.join();
        {
            std::lock_guard lock(mutex_);
            for (const auto& c : connections_) c->shutdown();
        }
        std::vector<std::thread> threads;
        {
            std::lock_guard lock(mutex_);
            threads.swap(threads_);
        }
        for (auto& t : threads)
            if (t.joinable()) t.join();
        listener_.close();
    }

    /// Number of trials that have finished since start.
    std::size_t completed_trials() const { return completed_.load(); }

private:
    struct Hub {
        std::mutex mutex;
        std::vector<std::shared_ptr<net::LineStream>> observers;
        bool ended = false;

        void broadcast(const std::string& line) {
            std::lock_guard lock(mutex);
            for (const auto& o : observers) o->write_line(line);
        }
    };

    void accept_loop() {
        while (!stopping_) {
            const int fd = ::accept(listener_.fd(), nullptr, nullptr);
            if (fd < 0) {
                if (stopping_) break;
                if (errno == EINTR || errno == ECONNABORTED) continue;
                break;
            }
            auto stream = std::make_shared<net::LineStream>(net::Socket(fd));
            std::lock_guard lock(mutex_);
            if (stopping_) break;
            connections_.insert(stream);
            threads_.emplace_back([this, stream] {
                try {
                    handle(stream);
                } catch (const std::exception& e) {
                    std::cerr << "connection error: " << e.what() << '\n';
                }
                std::lock_guard lk(mutex_);
                connections_.erase(stream);
            });
        }
    }

    const Scenario* find_scenario(const std::string& name) const {
        for (const auto& s : options_.scenarios)
            if (s.name == name) return &s;
        return nullptr;
    }

    void handle(const std::shared_ptr<net::LineStream>& stream) {
        const std::uint64_t id = next_id_.fetch_add(1);
        const Scenario* scenario = &options_.scenarios.front();
        std::vector<std::string> names;
        for (const auto& s : options_.scenarios) names.push_back(s.name);
        stream->write_line(welcome_message(id, scenario->name, names, options_.headless).dump());

        auto input = std::make_shared<NetworkInput>(options_.headless);
        for (;;) {
            const auto line = stream->read_line();
            if (!line) return;
            if (line->empty()) continue;
            std::string err;
            const auto msg = parse_client_message(*line, err);
            if (!msg) {
                stream->write_line(error_message(err).dump());
                continue;
            }
            if (const auto* sel = std::get_if<SelectScenario>(&*msg)) {
                if (const auto* s = find_scenario(sel->name)) scenario = s;
                else stream->write_line(error_message("unknown scenario " + sel->name).dump());
            } else if (const auto* obs = std::get_if<ObserveRequest>(&*msg)) {
                observe(stream, obs->session);
                return;
            } else if (const auto* h = std::get_if<HandInput>(&*msg)) {
                input->push(*h);
            } else if (std::get<ControlMessage>(*msg).action == "start") {
                break;
            } else {
                stream->write_line(error_message("no trial running").dump());
            }
        }
        run_trial(stream, id, *scenario, input);
    }

    void observe(const std::shared_ptr<net::LineStream>& stream, std::uint64_t id) {
        std::shared_ptr<Hub> hub;
        {
            std::lock_guard lock(mutex_);
            if (auto it = hubs_.find(id); it != hubs_.end()) hub = it->second;
        }
        if (!hub) {
            stream->write_line(error_message("no running session " + std::to_string(id)).dump());
            return;
        }
        {
            std::lock_guard lock(hub->mutex);
            if (hub->ended) {
                stream->write_line(error_message("session " + std::to_string(id) + " has ended").dump());
                return;
            }
            hub->observers.push_back(stream);
        }
        // observers only listen; hold the connection until the peer leaves
        while (stream->read_line()) {
        }
        std::lock_guard lock(hub->mutex);
        std::erase(hub->observers, stream);
    }

    void run_trial(const std::shared_ptr<net::LineStream>& stream, std::uint64_t id, const Scenario& scenario,
                   const std::shared_ptr<NetworkInput>& input) {
        auto hub = std::make_shared<Hub>();
        {
            std::lock_guard lock(mutex_);
            hubs_[id] = hub;
        }

        std::atomic<bool> done{false};
        std::thread reader([&] {
            while (auto line = stream->read_line()) {
                if (done) continue;
                std::string err;
                const auto msg = parse_client_message(*line, err);
                if (!msg) {
                    stream->write_line(error_message(err).dump());
                    continue;
                }
                if (const auto* h = std::get_if<HandInput>(&*msg)) input->push(*h);
                else if (const auto* c = std::get_if<ControlMessage>(&*msg)) input->push(*c);
                else stream->write_line(error_message("not accepted while running").dump());
            }
            input->close();
        });

        Session session(scenario);
        VirtualClock virtual_clock;
        WallClock wall_clock;
        Clock& clock = options_.headless ? static_cast<Clock&>(virtual_clock) : static_cast<Clock&>(wall_clock);
        const TrialLog log = run_session(session, *input, clock, [&](const Session& s, const LogRecord& r) {
            if (s.phase() != Phase::running) return;
            const auto line = state_message(s, r).dump();
            stream->write_line(line);
            hub->broadcast(line);
        });

        auto result = result_message(id, log);
        const auto records = log.records();
        if (!records.empty()) result["final_state"] = record_fields(*records.back());
        const auto result_line = result.dump();
        {
            std::lock_guard lock(hub->mutex);
            hub->ended = true;
            for (const auto& o : hub->observers) {
                o->write_line(result_line);
                o->shutdown();
            }
            hub->observers.clear();
        }
        stream->write_line(result_line);
        write_log_file(id, log);
        ++completed_;

        done = true;
        stream->shutdown();
        reader.join();
        std::lock_guard lock(mutex_);
        hubs_.erase(id);
    }

    void write_log_file(std::uint64_t id, const TrialLog& log) const {
        if (!options_.log_dir) return;
        std::filesystem::create_directories(*options_.log_dir);
        const auto path = *options_.log_dir / (log.header.scenario + "_s" + std::to_string(id) + ".jsonl");
        std::ofstream out(path);
        write_log(out, log);
    }

    ServerOptions options_;
    net::Socket listener_;
    std::uint16_t port_ = 0;
    std::thread accept_thread_;
    std::atomic<bool> stopping_{false};
    std::atomic<std::uint64_t> next_id_{1};
    std::atomic<std::size_t> completed_{0};
    std::mutex mutex_;
    std::vector<std::thread> threads_;
    std::set<std::shared_ptr<net::LineStream>> connections_;
    std::map<std::uint64_t, std::shared_ptr<Hub>> hubs_;
};

}  // namespace otdt
