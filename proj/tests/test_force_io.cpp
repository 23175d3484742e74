#include <gtest/gtest.h>

#include <sstream>

#include "otdt/force_io.hpp"

using namespace otdt;

TEST(SampleCsv, RoundTripIsExact) {
    const auto rs = linspace(0.0, 3.2, 57);
    const auto samples = sample_reference_force({6.0, 0.8}, rs);
    std::stringstream ss;
    write_samples_csv(ss, samples);
    EXPECT_EQ(read_samples_csv(ss), samples);
}

TEST(SampleCsv, ReportsLineOfBadRow) {
    std::stringstream ss("r_um,force_pN\n0.1,0.5\n0.2,oops\n");
    try {
        read_samples_csv(ss);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
}

TEST(SampleCsv, RejectsWrongHeaderAndNegativeDisplacement) {
    std::stringstream bad_header("r,f\n0.1,0.5\n");
    EXPECT_THROW(read_samples_csv(bad_header), ParseError);
    std::stringstream negative("r_um,force_pN\n-0.1,0.5\n");
    EXPECT_THROW(read_samples_csv(negative), ParseError);
}

TEST(ParamsJson, RoundTripAndKeys) {
    const OpticalForceParams p{5.0, 1.0, 2.0, 3.0, 4.0};
    const auto j = to_json(p);
    for (const char* k : {"K", "delta", "A", "C", "r_max"}) EXPECT_TRUE(j.contains(k)) << k;
    EXPECT_EQ(params_from_json(nlohmann::json::parse(j.dump())), p);
}

TEST(ParamsJson, MissingKeyNamesField) {
    auto j = to_json(OpticalForceParams{5.0, 1.0, 2.0, 3.0, 4.0});
    j.erase("A");
    try {
        params_from_json(j);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_EQ(e.field(), "force_params.A");
    }
}
