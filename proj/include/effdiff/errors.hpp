#pragma once

#include <stdexcept>
#include <string>

namespace effdiff {

/// Invalid configuration, unknown catalog entry, malformed config file.
/// CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Failure while running (non-finite state, I/O on outputs, checkpoint
/// mismatch). CLI maps this to exit code 2.
struct RunError : std::runtime_error {
    explicit RunError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace effdiff
