// Batch studies.
//
//   otdt_experiments rotation --strategy A --dstar 2,2.5,3,3.5,4 --out rotation.csv
//   otdt_experiments consistency --params params.json --out consistency.csv
//   otdt_experiments delivery --scenario scenarios/delivery.json --trials 10 --seed 1 --out results/
//
// Every table goes to CSV; a JSON summary is printed and written beside it.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "otdt/experiments.hpp"
#include "otdt/force_io.hpp"

namespace fs = std::filesystem;

static fs::path summary_path(const fs::path& csv) {
    fs::path p = csv;
    p.replace_extension(".summary.json");
    return p;
}

static void emit_summary(const nlohmann::json& j, const fs::path& path) {
    std::ofstream(path) << j.dump(2) << '\n';
    std::cout << j.dump(2) << '\n';
}

int main(int argc, char** argv) {
    CLI::App app{"Optical-trap microrobot batch experiments"};
    app.require_subcommand(1);

    auto* rot = app.add_subcommand("rotation", "two-trap out-of-plane rotation versus trap spacing");
    std::string strategy = "A";
    std::vector<double> dstar{2.0, 2.5, 3.0, 3.5, 4.0};
    double m = 1.5, settle = 0.5;
    std::string rot_params, rot_out = "rotation.csv";
    rot->add_option("--strategy", strategy, "A (equal powers) or B (powers m:1)")->check(CLI::IsMember({"A", "B"}));
    rot->add_option("--dstar", dstar, "trap spacings, µm, strictly increasing")->delimiter(',');
    rot->add_option("--m", m, "strategy B power ratio");
    rot->add_option("--settle", settle, "settle time before convergence checks, s");
    rot->add_option("--params", rot_params, "force params JSON (default: fitted reference profile)");
    rot->add_option("--out", rot_out, "output CSV");

    auto* con = app.add_subcommand("consistency", "rendered force versus model along radial and axial sweeps");
    std::string con_params, con_out = "consistency.csv";
    std::size_t points = 40;
    con->add_option("--params", con_params, "force params JSON (default: fitted reference profile)");
    con->add_option("--points", points, "grid points per axis");
    con->add_option("--out", con_out, "output CSV");

    auto* del = app.add_subcommand("delivery", "scripted force-blind versus force-aware delivery trials");
    std::string scenario_path, del_out = "delivery";
    std::size_t trials = 10;
    std::uint64_t seed = 1;
    double speed = 60.0, gain = 8.0;
    bool serial = false;
    del->add_option("--scenario", scenario_path, "scenario JSON")->required();
    del->add_option("--trials", trials, "trials per condition");
    del->add_option("--seed", seed, "base seed; trial i uses seed + i in both conditions");
    del->add_option("--speed", speed, "nominal operator speed, µm/s");
    del->add_option("--gain", gain, "force-aware slowdown, µm/s per pN");
    del->add_flag("--serial", serial, "run trials one at a time");
    del->add_option("--out", del_out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*rot) {
            otdt::RotationStudyConfig cfg;
            cfg.strategy = strategy == "A" ? otdt::Strategy::A : otdt::Strategy::B;
            cfg.d_star_values = dstar;
            cfg.power_ratio_m = m;
            cfg.settle_time = settle;
            if (!rot_params.empty()) cfg.params = otdt::read_params_json(rot_params);
            const auto rows = otdt::run_rotation_study(cfg);
            std::ofstream out(rot_out);
            otdt::write_rotation_csv(out, rows);
            for (const auto& r : rows)
                if (!r.converged) std::cerr << "warning: d*=" << r.d_star << " did not converge\n";
            emit_summary(otdt::rotation_summary(cfg, rows), summary_path(rot_out));
        } else if (*con) {
            otdt::ConsistencyConfig cfg;
            if (!con_params.empty()) cfg.params = otdt::read_params_json(con_params);
            cfg.points = points;
            const auto res = otdt::run_consistency_study(cfg);
            std::ofstream out(con_out);
            otdt::write_consistency_csv(out, res.samples);
            emit_summary(otdt::consistency_summary(res), summary_path(con_out));
        } else if (*del) {
            otdt::DeliveryConfig cfg;
            cfg.scenario = otdt::load_scenario_file(scenario_path);
            cfg.trials_per_condition = trials;
            cfg.base_seed = seed;
            cfg.blind.nominal_speed = cfg.aware.nominal_speed = speed;
            cfg.aware.slowdown_gain = gain;
            cfg.parallel = !serial;
            const auto res = otdt::run_delivery_study(cfg);
            otdt::write_delivery_outputs(del_out, res);
            std::cout << otdt::delivery_summary(res).dump(2) << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "otdt_experiments: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
