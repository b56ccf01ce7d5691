#pragma once

#include <stdexcept>
#include <string>

namespace mripp {

/// Raised for values that violate a documented invariant or precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Candidate sampling produced no valid action.
class TrappedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A planner returned an index that is masked or out of range.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Experiment configuration failed validation. Carries the offending field
/// path and, when known, the source line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, int line, const std::string& what)
      : std::runtime_error(format(field, line, what)), field_(std::move(field)), line_(line) {}

  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  static std::string format(const std::string& field, int line, const std::string& what) {
    std::string s = field.empty() ? std::string("config") : field;
    if (line > 0) s += " (line " + std::to_string(line) + ")";
    return s + ": " + what;
  }

  std::string field_;
  int line_;
};

}  // namespace mripp
