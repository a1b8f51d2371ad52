#pragma once

#include <stdexcept>
#include <string>

namespace stratcox {

// Input or model-convention violation (bad CSV, tied event times, shape mismatch).
class validation_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Singular or unusable linear system; message names the offending block.
class linalg_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numeric failure during estimation (degenerate E-step row, zero risk mass).
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Monte Carlo study aborted because more than half the replications failed.
class mc_failure_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stratcox
