// Session server: serves one trial per operator connection.
//
//   otdt_server --scenario scenarios/ --port 7878 [--headless] [--log-dir logs]
//
// The port falls back to $OTDT_PORT, then 7878.

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "otdt/server.hpp"

namespace fs = std::filesystem;

static std::vector<otdt::Scenario> load_all(const std::vector<std::string>& paths) {
    std::vector<otdt::Scenario> out;
    for (const auto& p : paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p))
                if (e.path().extension() == ".json") files.push_back(e.path());
            std::sort(files.begin(), files.end());
            for (const auto& f : files) out.push_back(otdt::load_scenario_file(f));
        } else {
            out.push_back(otdt::load_scenario_file(p));
        }
    }
    return out;
}

int main(int argc, char** argv) {
    CLI::App app{"Optical-trap microrobot teleoperation session server"};
    std::vector<std::string> scenarios;
    std::string host = "127.0.0.1";
    int port = -1;
    bool headless = false;
    std::string log_dir;
    app.add_option("-s,--scenario", scenarios, "scenario file or directory (repeatable)")->required();
    app.add_option("-p,--port", port, "TCP port (default $OTDT_PORT or 7878; 0 picks a free port)");
    app.add_option("--host", host, "bind address");
    app.add_flag("--headless", headless, "virtual clock; apply inputs at their timestamps");
    app.add_option("--log-dir", log_dir, "write one JSON-lines log per trial here");
    CLI11_PARSE(app, argc, argv);

    if (port < 0) {
        const char* env = std::getenv("OTDT_PORT");
        port = env ? std::atoi(env) : 7878;
    }

    // block termination signals before any thread starts so sigwait sees them
    sigset_t sigs;
    sigemptyset(&sigs);
    sigaddset(&sigs, SIGINT);
    sigaddset(&sigs, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &sigs, nullptr);

    try {
        otdt::ServerOptions opts;
        opts.host = host;
        opts.port = static_cast<std::uint16_t>(port);
        opts.scenarios = load_all(scenarios);
        opts.headless = headless;
        if (!log_dir.empty()) opts.log_dir = log_dir;
        otdt::Server server(std::move(opts));
        const auto bound = server.start();
        std::cout << "listening on " << host << ':' << bound << (headless ? " (headless)" : "") << std::endl;
        int sig = 0;
        sigwait(&sigs, &sig);
        std::cout << "shutting down after " << server.completed_trials() << " trials" << std::endl;
    } catch (const std::exception& e) {
        std::cerr << "otdt_server: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
