#pragma once

#include <stdexcept>
#include <string>

namespace f2 {

// Bad shapes or out-of-range indices handed to a numeric op.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files (datasets, topology specs, configs).
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Caller asked for something unsupported or inconsistent. Maps to exit code 2.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training diverged or an experiment could not finish. Maps to exit code 1.
struct TrainingError : std::runtime_error {
  explicit TrainingError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace f2
