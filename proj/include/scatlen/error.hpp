#pragma once

#include <stdexcept>
#include <string>

namespace scatlen {

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Two objects that must share a grid do not.
class GridMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class NegativePotential : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// A potential extends outside the region an operation requires it to live in.
class SupportViolation : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// An iterative or factorization-based numerical method failed.
class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration file problem; `key()` is the dotted path of the offending entry.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

}  // namespace scatlen
