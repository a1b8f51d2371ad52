#pragma once

#include <Eigen/Core>
#include <vector>

#include "stratcox/dataset.hpp"
#include "stratcox/params.hpp"
#include "stratcox/step_function.hpp"

namespace stratcox {

// Stratified partial-likelihood fit on the known-stratum subjects, with the
// Breslow baselines at beta_pl. Used as the EM initializer and as the
// full-data reduction oracle.
struct CompleteFit {
  Eigen::VectorXd beta_pl;
  std::vector<StepFunction> breslow;  // K; jumps only at known-stratum event times
  bool converged = false;
  bool capped = false;  // ||beta|| hit the cap: monotone likelihood
  int iterations = 0;
};

CompleteFit fit_complete_case(const Dataset& data, const FitConfig& cfg = {});

struct GammaFit {
  Eigen::MatrixXd gamma;  // (K-1) x m
  bool converged = false;
  bool separated = false;  // ||gamma|| hit the cap
  int iterations = 0;
};

// Multinomial logistic MLE of gamma over the known-stratum subjects.
GammaFit fit_complete_gamma(const Dataset& data, const FitConfig& cfg = {});

}  // namespace stratcox
