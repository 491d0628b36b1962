#pragma once

#include <stdexcept>
#include <string>

namespace eivglm {

// Base class for all library errors so callers can catch one type.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid arguments, shapes, or configuration values.
class domain_error : public error {
 public:
  explicit domain_error(const std::string& msg) : error(msg) {}
};

// Data is structurally valid but statistically unusable
// (zero noise variance, response collapse, sigma-hat underflow, ...).
class degenerate_error : public error {
 public:
  explicit degenerate_error(const std::string& msg) : error(msg) {}
};

}  // namespace eivglm
