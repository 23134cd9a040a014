#pragma once

#include <stdexcept>
#include <string>

namespace divswitch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration; the message names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Quadrature or arithmetic failure (non-finite values, non-convergence).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Value iteration hit its sweep cap before meeting the tolerance.
class NonConvergenceError : public Error {
public:
    using Error::Error;
};

/// Grid too large to address.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Filesystem read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace divswitch
