#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace qns {

/// Density dropped below the positivity floor (or became non-finite).
class FloorViolation : public std::runtime_error {
 public:
  FloorViolation(const std::string& what, double value, std::size_t point)
      : std::runtime_error(what), value_(value), point_(point) {}
  double value() const { return value_; }
  std::size_t point() const { return point_; }

 private:
  double value_;
  std::size_t point_;
};

/// NaN/Inf detected during time integration.
class NumericalAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checked identity or bound failed.
class InvariantViolation : public std::runtime_error {
 public:
  InvariantViolation(std::string invariant, const std::string& detail)
      : std::runtime_error(invariant + ": " + detail), invariant_(std::move(invariant)) {}
  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

}  // namespace qns
