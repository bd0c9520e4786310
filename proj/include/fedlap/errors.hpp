#pragma once

#include <stdexcept>
#include <string>

namespace fedlap {

// Error taxonomy matching the CLI exit codes: 2 config, 3 numeric, 4 missing artifact.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct MissingArtifactError : std::runtime_error {
  explicit MissingArtifactError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fedlap
