#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace shillbench {

using UserIndex = std::int32_t;
using ItemIndex = std::int32_t;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent interaction data.
class DataError : public Error {
 public:
  using Error::Error;
};

class AttackError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or parameter.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int last_finite_epoch)
      : Error(what), last_finite_epoch_(last_finite_epoch) {}
  int last_finite_epoch() const noexcept { return last_finite_epoch_; }

 private:
  int last_finite_epoch_;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace shillbench
