#pragma once

#include <stdexcept>
#include <string>

namespace metasense {

// Bad argument values (negative variance, non-finite matrix entries, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Dimension mismatch between collaborating objects.
class ShapeError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Configuration problems; carries the dotted field path when known.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, std::string field = {})
      : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Non-finite gradients, zero probabilities and similar numeric failures.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not allowed in the current state (e.g. transition out of a terminal state).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Threshold detector cannot be formed because the two hypotheses share a variance.
class DegenerateDetector : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

}  // namespace metasense
