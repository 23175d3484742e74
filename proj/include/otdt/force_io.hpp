#pragma once

// File formats for the force model: sample tables as CSV (`r_um,force_pN`)
// and fitted coefficients as a JSON object with keys K, delta, A, C, r_max.

#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "otdt/error.hpp"
#include "otdt/force_model.hpp"

namespace otdt {

inline constexpr std::string_view kSampleCsvHeader = "r_um,force_pN";

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline double parse_double(std::string_view field, int line) {
    field = trim(field);
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (ec != std::errc{} || ptr != end)
        throw ParseError(line, "not a number: '" + std::string(field) + "'");
    return v;
}

}  // namespace detail

inline std::vector<ForceSample> read_samples_csv(std::istream& in) {
    std::vector<ForceSample> out;
    std::string line;
    int lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        const auto view = detail::trim(line);
        if (view.empty()) continue;
        if (!header_seen) {
            if (view != kSampleCsvHeader)
                throw ParseError(lineno, "expected header '" + std::string(kSampleCsvHeader) + "'");
            header_seen = true;
            continue;
        }
        const auto comma = view.find(',');
        if (comma == std::string_view::npos || view.find(',', comma + 1) != std::string_view::npos)
            throw ParseError(lineno, "expected two comma-separated columns");
        ForceSample s{detail::parse_double(view.substr(0, comma), lineno),
                      detail::parse_double(view.substr(comma + 1), lineno)};
        if (s.displacement_r < 0.0) throw ParseError(lineno, "r_um must be >= 0");
        out.push_back(s);
    }
    if (!header_seen) throw ParseError(lineno == 0 ? 1 : lineno, "empty sample file");
    return out;
}

inline std::vector<ForceSample> read_samples_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open sample file " + path);
    return read_samples_csv(in);
}

inline void write_samples_csv(std::ostream& out, std::span<const ForceSample> samples) {
    out << kSampleCsvHeader << '\n';
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    for (const auto& s : samples) out << s.displacement_r << ',' << s.force_magnitude << '\n';
}

inline nlohmann::json to_json(const OpticalForceParams& p) {
    return {{"K", p.stiffness_k}, {"delta", p.delta}, {"A", p.far_a}, {"C", p.far_c},
            {"r_max", p.cutoff_r_max}};
}

/// Parses and validates a parameter object.
inline OpticalForceParams params_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("force_params", "expected an object");
    auto get = [&](const char* key) {
        if (!j.contains(key) || !j.at(key).is_number())
            throw ValidationError(std::string("force_params.") + key, "missing or not a number");
        return j.at(key).get<double>();
    };
    OpticalForceParams p{get("K"), get("delta"), get("A"), get("C"), get("r_max")};
    try {
        p.validate();
    } catch (const ParameterError& e) {
        throw ValidationError("force_params", e.what());
    }
    return p;
}

inline OpticalForceParams read_params_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open params file " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(1, e.what());
    }
    return params_from_json(j);
}

}  // namespace otdt
