#pragma once

#include <stdexcept>
#include <string>

namespace ftlab {

// Bad flags, missing files, invalid model shapes. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Well-formed request that cannot be satisfied by the data ("empty corpus",
// provenance mismatch, corrupt checkpoint). CLI maps this to exit code 1.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ftlab
