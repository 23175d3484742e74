#pragma once

#include <stdexcept>
#include <string>

namespace otdt {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Force-model coefficients violate their invariants.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Piecewise fit could not be performed on the given samples.
class FitError : public Error {
public:
    using Error::Error;
};

/// A document or configuration field is missing or out of range. `field()` names
/// the offending path, e.g. "goal.radius".
class ValidationError : public Error {
public:
    ValidationError(std::string field, const std::string& what)
        : Error(field + ": " + what), field_(std::move(field)) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

/// Structured text could not be parsed. Carries a 1-based line when known.
class ParseError : public Error {
public:
    ParseError(int line, const std::string& what)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    int line() const noexcept { return line_; }

private:
    int line_;
};

/// Explicit integrator produced an implausibly large step.
class IntegrationError : public Error {
public:
    IntegrationError(std::string body, const std::string& what)
        : Error("integration blow-up on " + body + ": " + what), body_(std::move(body)) {}

    const std::string& body() const noexcept { return body_; }

private:
    std::string body_;
};

/// A trial log does not belong to the scenario it is replayed against.
class HashMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace otdt
