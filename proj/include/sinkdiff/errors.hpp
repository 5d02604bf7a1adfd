#pragma once

#include <stdexcept>
#include <string>

namespace sinkdiff {

// Bad input data: schema violations, broken invariants, rejected sizes.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation outside the admissible parameter domain.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure: kernel underflow, non-convergence, degenerate spectrum.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sinkdiff
