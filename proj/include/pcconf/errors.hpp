#pragma once

#include <stdexcept>
#include <string>

namespace pcconf {

// Error taxonomy mirrors the CLI exit codes: bad config -> 1, missing
// prerequisite artifact -> 2, numerical failure -> 3. Everything else
// (std::invalid_argument etc.) is a programming/contract error.

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace pcconf
