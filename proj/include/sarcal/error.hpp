#pragma once

#include <stdexcept>
#include <string>

namespace sarcal {

/// Invalid configuration value. `field()` names the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Caller violated an operation precondition (bad index, bad argument).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Measurement could not be made from the supplied data (e.g. a histogram
/// capture that never reaches both rails).
class MeasurementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(int epoch, const std::string& what)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class QuantizationError : public std::runtime_error {
 public:
  QuantizationError(std::string tensor, const std::string& what)
      : std::runtime_error(tensor + ": " + what), tensor_(std::move(tensor)) {}
  const std::string& tensor() const noexcept { return tensor_; }

 private:
  std::string tensor_;
};

}  // namespace sarcal
