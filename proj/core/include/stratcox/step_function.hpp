#pragma once

#include <cstddef>
#include <vector>

namespace stratcox {

// Nondecreasing right-continuous step function on [0, tau] with value 0 at 0.
// Used for cumulative baseline intensities: value(t) sums the jumps at times
// <= t. Jump times are strictly increasing; sizes are nonnegative (zero sizes
// are kept so jump indices stay aligned with the support set).
class StepFunction {
 public:
  StepFunction() = default;
  StepFunction(std::vector<double> jump_times, std::vector<double> jump_sizes);

  double value(double t) const;
  double value_before(double t) const;  // left limit, sum of jumps at times < t
  double jump_at(double t) const;       // exact-match jump size, 0 elsewhere

  std::size_t size() const { return times_.size(); }
  const std::vector<double>& jump_times() const { return times_; }
  const std::vector<double>& jump_sizes() const { return sizes_; }
  const std::vector<double>& cumulative() const { return cum_; }

 private:
  std::vector<double> times_;
  std::vector<double> sizes_;
  std::vector<double> cum_;
};

}  // namespace stratcox
