#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace surfspline {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad user input: invalid parameters, unparsable files, inconsistent configuration.
/// The CLI maps this family to exit code 2.
class InputError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed on otherwise well-formed input (exit code 1).
class NumericalError : public Error {
public:
    using Error::Error;
};

class ParameterError : public InputError {
public:
    using InputError::InputError;
};

class DimensionError : public InputError {
public:
    using InputError::InputError;
};

class ChartError : public InputError {
public:
    using InputError::InputError;
};

class DomainError : public InputError {
public:
    using InputError::InputError;
};

class LoadError : public InputError {
public:
    LoadError(const std::string& what, std::size_t line)
        : InputError(what + (line > 0 ? " (line " + std::to_string(line) + ")" : std::string{}))
        , line_(line)
    {
    }

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A free observation point could not be attached to any triangle.
class LocationError : public InputError {
public:
    LocationError(const std::string& what, std::size_t point_index)
        : InputError(what)
        , point_index_(point_index)
    {
    }

    std::size_t point_index() const { return point_index_; }

private:
    std::size_t point_index_;
};

class AssemblyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotPositiveDefiniteError : public NumericalError {
public:
    NotPositiveDefiniteError(const std::string& what, long pivot)
        : NumericalError(what)
        , pivot_(pivot)
    {
    }

    /// Position of the failing pivot in the factorization order.
    long pivot() const { return pivot_; }

private:
    long pivot_;
};

/// Power iteration ran out of iterations. The best iterate is kept so callers
/// that only need a bracket can still use it.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double best_value, Eigen::VectorXd best_vector)
        : NumericalError(what)
        , best_value_(best_value)
        , best_vector_(std::move(best_vector))
    {
    }

    double best_value() const { return best_value_; }
    const Eigen::VectorXd& best_vector() const { return best_vector_; }

private:
    double best_value_;
    Eigen::VectorXd best_vector_;
};

class SingularTransformError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Likelihood evaluation hit a degenerate intermediate; `value()` carries it so an
/// optimizer can penalize the candidate instead of aborting.
class DegenerateLikelihoodError : public NumericalError {
public:
    DegenerateLikelihoodError(const std::string& what, double value)
        : NumericalError(what)
        , value_(value)
    {
    }

    double value() const { return value_; }

private:
    double value_;
};

class ConditioningError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ModelError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

} // namespace surfspline
