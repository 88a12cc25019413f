#pragma once

#include <stdexcept>
#include <string>

namespace wastetwin {

/// Root of every error raised by the library. Callers that only need to
/// report a failure can catch this; tests and the CLI dispatch on the
/// concrete kinds below.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration and input validation.
class ConfigError : public Error { using Error::Error; };
class InputError : public Error { using Error::Error; };
class StateError : public Error { using Error::Error; };

// Numerical failures.
class EvaluationError : public Error { using Error::Error; };
class FitError : public Error { using Error::Error; };
class MetricError : public Error { using Error::Error; };

// Geometry and kinematics.
class DegeneracyError : public Error { using Error::Error; };
class HorizonError : public Error { using Error::Error; };
class LimitError : public Error { using Error::Error; };
class ReachabilityError : public Error { using Error::Error; };

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double best_residual)
        : Error(what), best_residual_(best_residual) {}
    double best_residual() const noexcept { return best_residual_; }

private:
    double best_residual_;
};

// Control.
class SensorFaultError : public Error { using Error::Error; };

// Telemetry persistence.
class OrderingError : public Error { using Error::Error; };
class SchemaError : public Error { using Error::Error; };

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace wastetwin
