#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace bridgesim {

enum class ErrorKind {
  InvalidConfiguration,
  InvalidObservation,
  InvalidInput,
  EllipticityViolation,
  NumericalBlowup,
  WeightOverflow,
  DegenerateEnsemble,
  DegenerateConditioning,
  UnstableRun,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfiguration: return "invalid-configuration";
    case ErrorKind::InvalidObservation: return "invalid-observation";
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::EllipticityViolation: return "ellipticity-violation";
    case ErrorKind::NumericalBlowup: return "numerical-blowup";
    case ErrorKind::WeightOverflow: return "weight-overflow";
    case ErrorKind::DegenerateEnsemble: return "degenerate-ensemble";
    case ErrorKind::DegenerateConditioning: return "degenerate-conditioning";
    case ErrorKind::UnstableRun: return "unstable-run";
  }
  return "unknown";
}

/// Single exception type for every library failure. `kind()` classifies it;
/// `step()` carries the grid step index for blowup and overflow errors and
/// `field()` the config location for configuration errors.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  Error(ErrorKind kind, const std::string& message, std::size_t step)
      : std::runtime_error(message), kind_(kind), step_(step) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> step() const noexcept { return step_; }

  const std::string& field() const noexcept { return field_; }

  /// Returns a copy whose field path is prefixed with `prefix`.
  Error at(std::string_view prefix) const {
    Error e = *this;
    if (e.field_.empty()) {
      e.field_ = std::string(prefix);
    } else if (e.field_.front() == '[') {
      e.field_ = std::string(prefix) + e.field_;
    } else {
      e.field_ = std::string(prefix) + "." + e.field_;
    }
    return e;
  }

 private:
  ErrorKind kind_;
  std::optional<std::size_t> step_;
  std::string field_;
};

}  // namespace bridgesim
