#pragma once

#include <stdexcept>
#include <string>

namespace stkg {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments supplied by the caller.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Input lies outside the declared space-time domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Numerical failure (factorization, non-finite values, non-convergence).
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or unreadable file content.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace stkg
