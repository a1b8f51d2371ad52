#pragma once

#include <Eigen/Core>

#include "stratcox/dataset.hpp"
#include "stratcox/params.hpp"

namespace stratcox {

// pi_{k,gamma}(w) = exp(gamma_k'w) / sum_j exp(gamma_j'w) with gamma_K = 0.
// Max-subtracted softmax; components are positive and sum to 1.
Eigen::VectorXd stratum_probs(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& w);
Eigen::VectorXd log_stratum_probs(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& w);

// Observed-data log-likelihood over the step-function parameter space.
// Known-stratum subjects contribute the stratified Cox term plus the logistic
// term; unknown-stratum subjects contribute a log mixture over strata
// (log-sum-exp). Returns -infinity when a known-stratum event sits on a zero
// jump of its baseline.
double observed_log_likelihood(const Params& theta, const Dataset& data);

}  // namespace stratcox
