#include <doctest.h>

#include <vector>

#include "stratcox/errors.hpp"
#include "stratcox/rng.hpp"
#include "stratcox/step_function.hpp"

using stratcox::StepFunction;

TEST_CASE("step function evaluation and jumps") {
  StepFunction f({0.5, 1.0, 2.0}, {0.1, 0.2, 0.3});
  CHECK(f.value(0.0) == 0.0);
  CHECK(f.value(0.4999) == 0.0);
  CHECK(f.value(0.5) == doctest::Approx(0.1));  // right continuous
  CHECK(f.value(1.5) == doctest::Approx(0.1 + 0.2));
  CHECK(f.value(2.0) == doctest::Approx(0.6));
  CHECK(f.value(100.0) == doctest::Approx(0.6));

  CHECK(f.jump_at(1.0) == 0.2);
  CHECK(f.jump_at(1.0000001) == 0.0);
  CHECK(f.value_before(1.0) == doctest::Approx(0.1));
  CHECK(f.value(1.0) - f.value_before(1.0) == doctest::Approx(0.2));
}

TEST_CASE("step function rejects bad input") {
  CHECK_THROWS_AS(StepFunction({1.0, 1.0}, {0.1, 0.1}), stratcox::validation_error);
  CHECK_THROWS_AS(StepFunction({2.0, 1.0}, {0.1, 0.1}), stratcox::validation_error);
  CHECK_THROWS_AS(StepFunction({0.0}, {0.1}), stratcox::validation_error);
  CHECK_THROWS_AS(StepFunction({1.0}, {-0.1}), stratcox::validation_error);
  CHECK_THROWS_AS(StepFunction({1.0}, {0.1, 0.2}), stratcox::validation_error);
  CHECK_NOTHROW(StepFunction({1.0}, {0.0}));  // zero jumps kept for alignment
}

TEST_CASE("step function monotone and consistent with its jumps") {
  stratcox::Rng rng(77);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> times;
    std::vector<double> sizes;
    double t = 0.0;
    const int count = 1 + static_cast<int>(rng.uniform(0.0, 20.0));
    for (int i = 0; i < count; ++i) {
      t += rng.uniform(0.01, 0.5);
      times.push_back(t);
      sizes.push_back(rng.uniform(0.0, 0.4));
    }
    StepFunction f(times, sizes);
    double prev = -1.0;
    for (double u = 0.0; u < t + 1.0; u += 0.01) {
      const double v = f.value(u);
      CHECK(v >= prev);
      prev = v;
    }
    for (std::size_t i = 0; i < times.size(); ++i) {
      CHECK(f.value(times[i]) - f.value_before(times[i]) ==
            doctest::Approx(sizes[i]).epsilon(1e-12));
      CHECK(f.jump_at(times[i]) == sizes[i]);
    }
  }
}
