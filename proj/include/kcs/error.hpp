#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kcs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (e.g. negative distance).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A state that violates a structural invariant (negative density, NaN coordinates, ...).
class InvalidStateError : public Error {
public:
    using Error::Error;
};

/// Field evaluation requested outside the sampled extent.
class ExtrapolationError : public Error {
public:
    using Error::Error;
};

/// A time step that violates the CFL constraint of a sub-step.
class StepSizeError : public Error {
public:
    using Error::Error;
};

/// Non-finite state produced by a time step.
class BlowUpError : public Error {
public:
    BlowUpError(double t, const std::string& what)
        : Error(what + " (t = " + std::to_string(t) + ")"), time_(t) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Two grids whose geometry differs where identical geometry is required.
class GeometryMismatchError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration. Carries the 1-based line and column when known (0 otherwise).
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        if (line == 0) return what;
        std::string s = "line " + std::to_string(line);
        if (column != 0) s += ", column " + std::to_string(column);
        return s + ": " + what;
    }
    std::size_t line_;
    std::size_t column_;
};

/// A well-formed configuration that violates a physical or numerical constraint.
class ValidationError : public ConfigError {
public:
    ValidationError(std::string constraint, const std::string& detail, std::size_t line = 0)
        : ConfigError("violates constraint \"" + constraint + "\": " + detail, line),
          constraint_(std::move(constraint)), detail_(detail) {}

    const std::string& constraint() const noexcept { return constraint_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string constraint_;
    std::string detail_;
};

/// Unreadable, truncated, or inconsistent snapshot file.
class SnapshotError : public Error {
public:
    using Error::Error;
};

}  // namespace kcs
