#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "otdt/scenario.hpp"

using namespace otdt;

namespace {

const char* kMinimal = R"({
  "schema_version": 1,
  "traps": [{"position": [0, 0, 0]}],
  "robot": {"elements": [{"radius": 1.0, "trap": 0}]},
  "force_params": {"K": 5, "delta": 1, "A": 2, "C": 3, "r_max": 4},
  "cells": [{"position": [6, 0, 0]}],
  "goal": {"center": [20, 0, 0], "radius": 2}
})";

// independent FNV-1a, byte at a time through a different accumulation order
std::uint64_t fnv_oracle(const std::string& s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < s.size(); ++i) h = (h ^ static_cast<std::uint8_t>(s[i])) * 1099511628211ULL;
    return h;
}

std::string field_of(const std::string& text) {
    try {
        load_scenario(text);
    } catch (const ValidationError& e) {
        return e.field();
    }
    return "(none)";
}

}  // namespace

TEST(Fnv, PublishedVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}

TEST(Scenario, MinimalDocumentGetsDefaults) {
    const auto s = load_scenario(kMinimal);
    EXPECT_EQ(s.name, "unnamed");
    EXPECT_EQ(s.dt, 1e-3);
    EXPECT_EQ(s.broadcast_hz, 60.0);
    EXPECT_EQ(s.trap_devices, std::vector<Device>{Device::left});
    EXPECT_EQ(s.force_source, ForceSource::inline_params);
    EXPECT_EQ(s.teleop.alpha_m, 0.05);
    EXPECT_EQ(s.teleop.g_control, 50.0);
    EXPECT_EQ(s.teleop.d_loss, 4.0);
    EXPECT_NEAR(s.teleop.damping_b, 0.2 * 50.0 * stokes_drag(1.0, Medium{}), 1e-15);
    EXPECT_EQ(s.cells[0].stiffness, 10.0);
}

TEST(Scenario, HashMatchesIndependentOracle) {
    const auto s = load_scenario(kMinimal);
    EXPECT_EQ(s.hash(), fnv_oracle(s.canonical()));
    EXPECT_EQ(load_scenario(s.canonical()).canonical(), s.canonical());
}

TEST(Scenario, SeedChangesHash) {
    auto a = load_scenario(kMinimal);
    auto b = a;
    b.seed = 1;
    EXPECT_NE(a.hash(), b.hash());
}

TEST(Scenario, NonPositiveGoalRadiusNamesField) {
    std::string text = kMinimal;
    text.replace(text.find("\"radius\": 2"), 11, "\"radius\": 0");
    EXPECT_EQ(field_of(text), "goal.radius");
}

TEST(Scenario, OutOfRangeTrapNamesElement) {
    std::string text = kMinimal;
    text.replace(text.find("\"trap\": 0"), 9, "\"trap\": 3");
    EXPECT_EQ(field_of(text), "robot.elements[0].trap");
}

TEST(Scenario, UnsupportedSchemaVersion) {
    std::string text = kMinimal;
    text.replace(text.find("\"schema_version\": 1"), 19, "\"schema_version\": 2");
    EXPECT_EQ(field_of(text), "schema_version");
}

TEST(Scenario, BadDeviceName) {
    std::string text = kMinimal;
    text.replace(text.find("\"position\": [0, 0, 0]}"), 22, "\"position\": [0, 0, 0], \"device\": \"up\"}");
    EXPECT_EQ(field_of(text), "traps[0].device");
}

TEST(Scenario, DiscontinuousForceRejected) {
    std::string text = kMinimal;
    text.replace(text.find("\"C\": 3"), 6, "\"C\": 4");
    EXPECT_EQ(field_of(text), "force_params");
}

TEST(Scenario, ParseErrorReportsLine) {
    const std::string text = "{\n  \"schema_version\": 1,\n  \"traps\": [,]\n}";
    try {
        load_scenario(text);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
}

TEST(Scenario, SamplesFileAndInlineParamsHashDifferently) {
    const auto dir = std::filesystem::temp_directory_path() / "otdt_scenario_test";
    std::filesystem::create_directories(dir);
    const auto rs = linspace(0.0, 3.2, 64);
    {
        std::ofstream csv(dir / "s.csv");
        write_samples_csv(csv, sample_reference_force({6.0, 0.8}, rs));
    }

    std::string sampled = kMinimal;
    const auto at = sampled.find("\"force_params\"");
    const auto end = sampled.find('}', at) + 1;
    sampled.replace(at, end - at, "\"force_samples\": \"s.csv\"");
    {
        std::ofstream out(dir / "scn.json");
        out << sampled;
    }

    const auto a = load_scenario_file(dir / "scn.json");
    const auto b = load_scenario(kMinimal);
    EXPECT_EQ(a.force_source, ForceSource::fitted_samples);
    EXPECT_NE(a.hash(), b.hash());
    EXPECT_EQ(a.teleop.d_loss, a.force_params.cutoff_r_max);
    std::filesystem::remove_all(dir);
}

TEST(Scenario, MissingSamplesFileIsValidationError) {
    std::string text = kMinimal;
    const auto at = text.find("\"force_params\"");
    const auto end = text.find('}', at) + 1;
    text.replace(at, end - at, "\"force_samples\": \"nope.csv\"");
    EXPECT_EQ(field_of(text), "force_samples");
}

TEST(Scenario, ShippedScenariosLoad) {
    for (const char* name : {"minimal.json", "delivery.json", "delivery_sampled.json"}) {
        const auto s = load_scenario_file(std::filesystem::path(OTDT_SCENARIO_DIR) / name);
        EXPECT_NO_THROW(s.validate()) << name;
    }
}
