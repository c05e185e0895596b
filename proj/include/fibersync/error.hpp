#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace fibersync {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A precondition on an operation's inputs was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// The simulation could not continue (NaN in the loop, persistent saturation, ...).
class SimulationError : public Error {
public:
    using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// One or more configuration entries are invalid; all problems are collected
/// before anything runs.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> issues)
        : Error(join(issues)), issues_(std::move(issues)) {}

    const std::vector<std::string>& issues() const noexcept { return issues_; }

private:
    static std::string join(const std::vector<std::string>& issues) {
        std::string out = "invalid configuration:";
        for (const auto& s : issues) {
            out += "\n  - ";
            out += s;
        }
        return out;
    }

    std::vector<std::string> issues_;
};

}  // namespace fibersync
