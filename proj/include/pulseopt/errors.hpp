#pragma once

#include <stdexcept>
#include <string>

namespace pulseopt {

/// Invalid configuration: bad parameter values, dimension mismatches,
/// malformed or missing config files.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reading or writing an output file failed.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Non-finite values encountered during evaluation.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Adaptive integration could not reach the end of the time span.
/// `t_last` is the last time for which a valid state exists.
struct IntegrationError : std::runtime_error {
    double t_last;
    IntegrationError(const std::string& msg, double t)
        : std::runtime_error(msg), t_last(t) {}
};

}  // namespace pulseopt
