#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace qlink {

// Malformed or out-of-range scenario input. `path` is the dotted JSON path
// of the offending key (empty when the problem is not tied to one key).
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string path, const std::string& message)
        : std::runtime_error(path.empty() ? message : path + ": " + message),
          path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// A simulation could not produce a usable estimate (no coincidences in a
// setting pair, a loop that diverged, a degenerate histogram).
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace qlink
