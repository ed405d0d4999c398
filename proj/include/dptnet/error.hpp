#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dptnet {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Clock arithmetic produced a negative timestamp.
class ClockError : public Error {
public:
    using Error::Error;
};

// Invalid time range or ternary pattern.
class RangeError : public Error {
public:
    using Error::Error;
};

class PipelineError : public Error {
public:
    using Error::Error;
};

class TopologyError : public Error {
public:
    using Error::Error;
};

// Controller plan rejected before any message was sent.
class PlanError : public Error {
public:
    using Error::Error;
};

// A run-time invariant (conservation, consistency, telemetry alignment) failed.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

struct ConfigDiagnostic {
    int line = 0;
    std::string message;
};

// Carries every problem found while parsing, not only the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<ConfigDiagnostic> diags);

    const std::vector<ConfigDiagnostic>& diagnostics() const noexcept { return diags_; }

private:
    std::vector<ConfigDiagnostic> diags_;
};

}  // namespace dptnet
