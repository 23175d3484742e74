#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "otdt/experiments.hpp"

using namespace otdt;

namespace {

Scenario delivery_scenario() {
    return load_scenario_file(std::filesystem::path(OTDT_SCENARIO_DIR) / "delivery.json");
}

}  // namespace

TEST(Stats, SpearmanExamples) {
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4, 5}, {50, 41, 30, 20, 0}), -1.0);
    EXPECT_DOUBLE_EQ(spearman({1, 2, 3, 4, 5}, {1, 4, 9, 16, 25}), 1.0);
    // ties get average ranks
    EXPECT_EQ(ranks({10, 20, 20, 30}), (std::vector<double>{1, 2.5, 2.5, 4}));
    // textbook value: d^2 sum 2 over n = 5 gives 1 - 6*2/120
    EXPECT_NEAR(spearman({1, 2, 3, 4, 5}, {2, 1, 3, 4, 5}), 0.9, 1e-12);
}

TEST(Stats, FitMetricsExamples) {
    const auto m = fit_metrics({1, 2, 3, 4}, {1, 2, 3, 5});
    EXPECT_DOUBLE_EQ(m.mse, 0.25);
    EXPECT_DOUBLE_EQ(m.rmse, 0.5);
    EXPECT_DOUBLE_EQ(m.r2, 1.0 - 1.0 / 5.0);
    EXPECT_DOUBLE_EQ(m.max_abs, 1.0);
    EXPECT_EQ(fit_metrics({1, 2}, {1, 2}).r2, 1.0);
    EXPECT_THROW(fit_metrics({}, {}), Error);
    EXPECT_THROW(fit_metrics({1}, {1, 2}), Error);
}

TEST(Rotation, AngleHelpers) {
    EXPECT_NEAR(out_of_plane_angle_deg(Quat{}), 0.0, 1e-12);
    EXPECT_NEAR(out_of_plane_angle_deg(Quat::from_axis_angle({0, 1, 0}, -std::numbers::pi / 6)), 30.0, 1e-9);
    EXPECT_NEAR(out_of_plane_angle_deg(Quat::from_axis_angle({0, 0, 1}, 1.0)), 0.0, 1e-12);
    EXPECT_NEAR(rotation_between(Quat{}, Quat::from_axis_angle({1, 0, 0}, 0.3)), 0.3, 1e-12);
    const auto [a0, a1] = strategy_weights(Strategy::A, 3.0);
    EXPECT_EQ(a0, 1.0);
    EXPECT_EQ(a1, 1.0);
    const auto [b0, b1] = strategy_weights(Strategy::B, 1.5);
    EXPECT_DOUBLE_EQ(b0 / b1, 1.5);
    EXPECT_DOUBLE_EQ(b0 + b1, 2.0);
}

TEST(Rotation, StrategyATracksRodGeometry) {
    RotationStudyConfig cfg;
    const auto rows = run_rotation_study(cfg);
    ASSERT_EQ(rows.size(), 5u);
    std::vector<double> d, th;
    for (const auto& r : rows) {
        EXPECT_TRUE(r.converged) << r.d_star;
        // handles one rod length apart sit exactly on both traps
        const double geometric = std::acos(std::min(1.0, r.d_star / cfg.rod_length)) * 180.0 / std::numbers::pi;
        EXPECT_NEAR(r.theta_deg, geometric, 0.5) << r.d_star;
        d.push_back(r.d_star);
        th.push_back(r.theta_deg);
    }
    EXPECT_NEAR(rows.back().theta_deg, 0.0, 0.5);
    EXPECT_LE(spearman(d, th), -0.9);
}

TEST(Rotation, StrategyBWithUnitRatioMatchesA) {
    RotationStudyConfig a, b;
    b.strategy = Strategy::B;
    b.power_ratio_m = 1.0;
    for (double d : a.d_star_values) {
        const auto ra = run_rotation_point(a, d);
        const auto rb = run_rotation_point(b, d);
        EXPECT_NEAR(ra.theta_deg, rb.theta_deg, 1e-6);
    }
}

TEST(Rotation, StrategyBConverges) {
    RotationStudyConfig cfg;
    cfg.strategy = Strategy::B;
    for (const auto& r : run_rotation_study(cfg)) EXPECT_TRUE(r.converged) << r.d_star;
}

TEST(Rotation, ConfigValidation) {
    RotationStudyConfig cfg;
    cfg.d_star_values = {1, 2, 3, 4};
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg.d_star_values = {1, 2, 2, 3, 4};
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(Rotation, CsvRoundTrip) {
    const std::vector<RotationRow> rows{{2.0, 60.0, true, 0.51}, {2.5, 51.3178, false, 5.0}};
    std::stringstream ss;
    write_rotation_csv(ss, rows);
    EXPECT_EQ(read_rotation_csv(ss), rows);
}

TEST(Consistency, EmptyGridIsRejected) {
    ConsistencyConfig cfg;
    cfg.points = 0;
    try {
        run_consistency_study(cfg);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("empty sweep grid"), std::string::npos);
    }
}

TEST(Consistency, SteadyRenderingIsTheModel) {
    ConsistencyConfig cfg;
    cfg.points = 12;
    const auto samples = consistency_sweep(cfg, {1, 0, 0}, "radial", true);
    ASSERT_EQ(samples.size(), 12u);
    for (const auto& s : samples) {
        EXPECT_NEAR(s.rendered, s.model, 1e-6) << s.displacement;
        // independent oracle for the displacement grid
        EXPECT_LE(s.displacement, cfg.extent() + 1e-9);
    }
}

TEST(Consistency, SweepTracksModel) {
    ConsistencyConfig cfg;
    const auto res = run_consistency_study(cfg);
    EXPECT_GE(res.radial.r2, 0.95);
    EXPECT_GE(res.axial.r2, 0.95);
    EXPECT_GE(res.radial_steady.r2, 0.999999);
    EXPECT_GE(res.axial_steady.r2, 0.999999);
    EXPECT_GE(res.radial.n, 30u);
}

TEST(Consistency, CsvRoundTrip) {
    const std::vector<ConsistencySample> rows{{"radial", "sweep", 0.1, 0.85, 0.8}, {"axial", "steady", 1.0 / 3, 5.5, 5.5}};
    std::stringstream ss;
    write_consistency_csv(ss, rows);
    EXPECT_EQ(read_consistency_csv(ss), rows);
}

TEST(Policy, SpeedLaw) {
    OperatorPolicy blind{PolicyKind::force_blind, 60.0, 8.0, {}, 1.0};
    OperatorPolicy aware{PolicyKind::force_aware, 60.0, 8.0, {}, 1.0};
    EXPECT_EQ(blind.speed(5.0), 60.0);
    EXPECT_EQ(aware.speed(5.0), 20.0);
    EXPECT_EQ(aware.speed(10.0), 0.0);
}

TEST(Delivery, ZeroGainMakesConditionsIdentical) {
    const auto s = delivery_scenario();
    OperatorPolicy blind{PolicyKind::force_blind, 60.0, 0.0, {}, 1.0};
    OperatorPolicy aware{PolicyKind::force_aware, 60.0, 0.0, {}, 1.0};
    EXPECT_EQ(serialize_log(run_delivery_trial(s, blind, 3)), serialize_log(run_delivery_trial(s, aware, 3)));
}

TEST(Delivery, ConditionsShareNoisePerTrial) {
    DeliveryConfig cfg{delivery_scenario()};
    cfg.trials_per_condition = 3;
    const auto res = run_delivery_study(cfg);
    ASSERT_EQ(res.trials.size(), 6u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(res.trials[i].seed, res.trials[i + 3].seed);
        EXPECT_EQ(res.trials[i].log.outcome->first_kicks, res.trials[i + 3].log.outcome->first_kicks);
    }
    EXPECT_NE(res.trials[0].log.outcome->first_kicks, res.trials[1].log.outcome->first_kicks);
}

TEST(Delivery, ForceAwareReducesContactSpread) {
    DeliveryConfig cfg{delivery_scenario()};
    const auto res = run_delivery_study(cfg);
    EXPECT_LT(res.aware.summary.contact_force.sd, res.blind.summary.contact_force.sd);
    EXPECT_GT(res.force_sd_reduction, 0.0);
    EXPECT_EQ(res.blind.summary.success_rate, 1.0);
    EXPECT_EQ(res.aware.summary.success_rate, 1.0);
}

TEST(Delivery, NeedsTwoTrials) {
    DeliveryConfig cfg{delivery_scenario()};
    cfg.trials_per_condition = 1;
    EXPECT_THROW(run_delivery_study(cfg), ValidationError);
}

TEST(Delivery, OutputsRoundTrip) {
    DeliveryConfig cfg{delivery_scenario()};
    cfg.trials_per_condition = 2;
    const auto res = run_delivery_study(cfg);
    const auto dir = std::filesystem::temp_directory_path() / "otdt_delivery_test";
    std::filesystem::remove_all(dir);
    write_delivery_outputs(dir, res);
    std::ifstream trials(dir / "trials.csv");
    const auto rows = read_trials_csv(trials);
    ASSERT_EQ(rows.size(), 4u);
    EXPECT_EQ(rows[0], trial_row(res.trials[0]));
    EXPECT_EQ(rows[3].condition, "force_aware");
    const auto log = read_log_file((dir / "logs" / "force_aware_1.jsonl").string());
    EXPECT_EQ(serialize_log(log), serialize_log(res.trials[3].log));
    EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
    std::filesystem::remove_all(dir);
}
