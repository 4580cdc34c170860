#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lqmfg
{

enum class ErrorKind
{
    structural,
    validation,
    singularity,
    divergence,
    usage,
    non_convergence,
    consistency,
    io,
    parse
};

inline const char* to_string(ErrorKind kind)
{
    switch (kind)
    {
    case ErrorKind::structural: return "structural";
    case ErrorKind::validation: return "validation";
    case ErrorKind::singularity: return "singularity";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::usage: return "usage";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::consistency: return "consistency";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
    }
    return "unknown";
}

/// Base of every error thrown by the library. The kind is what the CLI
/// reports in its machine-readable error record.
class Error : public std::runtime_error
{
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Shape mismatch or non-finite data in a model.
class StructuralError : public Error
{
public:
    explicit StructuralError(const std::string& what) : Error(ErrorKind::structural, what) {}
};

/// A model failed one of its assumption checks.
class ValidationError : public Error
{
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class UsageError : public Error
{
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

/// Sigma(t) = R + D'PD + D0'PD0 fell below r_min * I.
class SingularityError : public Error
{
public:
    SingularityError(const std::string& what, double time)
        : Error(ErrorKind::singularity, what), time_(time)
    {
    }

    [[nodiscard]] double time() const noexcept { return time_; }

private:
    double time_;
};

/// A trajectory left the admissible set (non-finite, or lost PSD).
class DivergenceError : public Error
{
public:
    DivergenceError(const std::string& what, std::size_t node, double value)
        : Error(ErrorKind::divergence, what), node_(node), value_(value)
    {
    }

    [[nodiscard]] std::size_t node() const noexcept { return node_; }
    [[nodiscard]] double value() const noexcept { return value_; }

private:
    std::size_t node_;
    double value_;
};

class NonConvergenceError : public Error
{
public:
    NonConvergenceError(const std::string& what, double residual, int iterations)
        : Error(ErrorKind::non_convergence, what), residual_(residual), iterations_(iterations)
    {
    }

    [[nodiscard]] double residual() const noexcept { return residual_; }
    [[nodiscard]] int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// An internal invariant (e.g. monotone iteration) was violated.
class ConsistencyError : public Error
{
public:
    explicit ConsistencyError(const std::string& what) : Error(ErrorKind::consistency, what) {}
};

class IoError : public Error
{
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

/// Malformed scenario text. Line and column are 1-based; 0 means unknown.
class ParseError : public Error
{
public:
    explicit ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
        : Error(ErrorKind::parse, what), line_(line), column_(column)
    {
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_; }
    [[nodiscard]] std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace lqmfg
