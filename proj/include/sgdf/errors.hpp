#pragma once

#include <stdexcept>
#include <string>

namespace sgdf {

/// Caller broke a documented precondition (shape mismatch, bad size, ...).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

/// A runtime monitor fired: J or det(grad xi) dropped below the floor.
struct PositivityFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The requested step exceeds a stability bound (CFL, hyperviscous, ...).
struct StabilityRejection : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Semantic or syntactic problem in a run configuration.
struct ConfigError : std::runtime_error {
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// File could not be read or written, or is not a valid SGDF1 snapshot.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace sgdf
