#include "stratcox/step_function.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stratcox/errors.hpp"

namespace stratcox {

StepFunction::StepFunction(std::vector<double> jump_times, std::vector<double> jump_sizes)
    : times_(std::move(jump_times)), sizes_(std::move(jump_sizes)) {
  if (times_.size() != sizes_.size()) {
    throw validation_error("StepFunction: jump_times and jump_sizes differ in length");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || times_[i] <= 0.0) {
      throw validation_error("StepFunction: jump times must be finite and positive");
    }
    if (i > 0 && times_[i] <= times_[i - 1]) {
      throw validation_error("StepFunction: jump times must be strictly increasing");
    }
    if (!std::isfinite(sizes_[i]) || sizes_[i] < 0.0) {
      throw validation_error("StepFunction: jump sizes must be finite and nonnegative");
    }
  }
  cum_.resize(times_.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < times_.size(); ++i) {
    acc += sizes_[i];
    cum_[i] = acc;
  }
}

double StepFunction::value(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0.0;
  return cum_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::value_before(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0.0;
  return cum_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::jump_at(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it != times_.end() && *it == t) {
    return sizes_[static_cast<std::size_t>(it - times_.begin())];
  }
  return 0.0;
}

}  // namespace stratcox
