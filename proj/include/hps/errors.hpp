#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hps {

/// Malformed input: unreadable config, unknown keys, bad parameter values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A mathematical invariant that should hold for the given input does not.
/// Carries a JSON witness describing the offending quantities.
class InvariantViolation : public std::runtime_error {
 public:
  explicit InvariantViolation(const std::string& what, std::string witness_json = "{}")
      : std::runtime_error(what), witness_(std::move(witness_json)) {}

  const std::string& witness() const { return witness_; }

 private:
  std::string witness_;
};

}  // namespace hps
