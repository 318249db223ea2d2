#pragma once

#include <stdexcept>
#include <string>

namespace dppc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid scenario, design parameters or integrator settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

class NotSignDefiniteError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class InfeasibleDelayError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Lookup before the start of the history or beyond the last committed sample.
class MissingHistoryError : public Error {
public:
    MissingHistoryError(double query, double t_start, double t_current);

    double query;
    double t_start;
    double t_current;
};

/// A normalized error left the open unit interval (or unit ball for z_n).
/// `row` and `level` are 1-based; `row == 0` marks the vector z_n.
class FunnelViolation : public Error {
public:
    FunnelViolation(int row, int level, double value, double t = 0.0);

    FunnelViolation at_time(double t) const { return FunnelViolation(row, level, value, t); }

    int row;
    int level;
    double value;
    double time;
};

}  // namespace dppc
