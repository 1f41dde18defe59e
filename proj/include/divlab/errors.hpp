#pragma once

#include <stdexcept>
#include <string>

namespace divlab {

/// Malformed or out-of-range user configuration (config files, CLI values, input records).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Filesystem or stream failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A numerical run that could not complete (divergence, non-finite state, no convergence).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace divlab
