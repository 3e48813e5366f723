#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace tramfl {

// Violated precondition on an argument (bad sizes, mismatched layouts, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation is not possible in the current state (empty shard, no candidates).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed dataset file. Carries the 1-based line number of the offending row.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Invalid experiment configuration. `field()` is the dotted key path, e.g. "run.T".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace tramfl
