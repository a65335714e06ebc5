#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dnpu {

// Error taxonomy mirrors the CLI exit codes:
//   ConfigError -> 1, PhysicsError -> 2, ValidationError -> 3.

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

class PhysicsError : public std::runtime_error {
public:
    explicit PhysicsError(const std::string& msg) : std::runtime_error(msg) {}
};

class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Total event rate reached zero: no transition can fire.
class AbsorbingStateError : public PhysicsError {
public:
    AbsorbingStateError(const std::string& msg, std::int64_t step)
        : PhysicsError(msg + " (at step " + std::to_string(step) + ")"), step_index(step) {}
    std::int64_t step_index;
};

}  // namespace dnpu
