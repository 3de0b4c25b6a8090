#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cespectra {

/// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : std::invalid_argument("dimension mismatch: expected " + std::to_string(expected) +
                              ", got " + std::to_string(got)) {}
  explicit DimensionMismatch(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative kernel did not reach its tolerance within its iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cholesky factorization hit a pivot below tolerance. `pivot()` is 1-based.
class NotPositiveDefinite : public std::runtime_error {
 public:
  explicit NotPositiveDefinite(std::size_t pivot)
      : std::runtime_error("matrix not positive definite at pivot " + std::to_string(pivot)),
        pivot_(pivot) {}
  std::size_t pivot() const noexcept { return pivot_; }

 private:
  std::size_t pivot_;
};

/// A weighted sample cannot support the requested estimate (e.g. no hits).
class DegenerateSample : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A projected covariance collapsed: every variance fell below the floor.
class CollapsedProjection : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cespectra
