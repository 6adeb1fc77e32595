#pragma once

#include <stdexcept>
#include <string>

namespace evidentia {

// Input, config or file-format problems the caller can fix.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failures during computation (divergence, broken internal state).
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace evidentia
