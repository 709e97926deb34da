#pragma once

#include <stdexcept>
#include <string>

namespace bslab {

/// A search or enumeration ran past its configured work budget.
class BudgetExceeded : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative solver did not reach its tolerance.
class NotConverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A Monte Carlo run was configured with too few batches for error bars.
class InsufficientBatches : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace bslab
