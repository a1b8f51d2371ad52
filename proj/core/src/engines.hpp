#pragma once

// Internal solvers shared by the complete-case fits and the EM M-steps.
// Weights are arbitrary nonnegative per-subject stratum masses: indicator
// rows reproduce the complete-case estimators, posterior rows give the
// weighted updates.

#include <Eigen/Dense>
#include <vector>

#include "stratcox/dataset.hpp"
#include "stratcox/params.hpp"
#include "stratcox/step_function.hpp"

namespace stratcox::detail {

// Descending-time traversal grouped by distinct time value, so that every
// subject with T >= t is in the running sums before events at t are read.
struct RiskSweepOrder {
  explicit RiskSweepOrder(const Eigen::VectorXd& time);
  std::vector<Eigen::Index> order;        // subject indices, time descending
  std::vector<std::size_t> group_offset;  // boundaries of equal-time groups, ends with order.size()
};

struct CoxResult {
  Eigen::VectorXd beta;
  double loglik = 0.0;
  bool converged = false;
  bool capped = false;  // ||beta|| hit the cap (monotone likelihood)
  int iterations = 0;
};

// Maximizes sum_i sum_k Q_ik Delta_i [beta'X_i - log sum_j Q_jk e^{beta'X_j} Y_j(T_i)]
// by Newton with step-halving.
CoxResult weighted_cox_newton(const Eigen::MatrixXd& weights, const Dataset& data,
                              Eigen::VectorXd beta0, const FitConfig& cfg);

double weighted_cox_objective(const Eigen::MatrixXd& weights, const Dataset& data,
                              const Eigen::VectorXd& beta);

struct MultinomialResult {
  Eigen::MatrixXd gamma;  // (K-1) x m
  double loglik = 0.0;
  bool converged = false;
  bool capped = false;  // ||gamma||_F hit the cap (separation)
  int iterations = 0;
};

// Maximizes sum_i sum_k Q_ik log pi_{k,gamma}(W_i).
MultinomialResult weighted_multinomial_newton(const Eigen::MatrixXd& weights,
                                              const Eigen::MatrixXd& w_covariates,
                                              Eigen::MatrixXd gamma0, const FitConfig& cfg);

double weighted_multinomial_objective(const Eigen::MatrixXd& weights,
                                      const Eigen::MatrixXd& w_covariates,
                                      const Eigen::MatrixXd& gamma);

// Jump update at fixed beta: the stratum-k jump at a support event time T_i is
// Q_ik / sum_j Q_jk e^{beta'X_j} Y_j(T_i). Zero-mass jumps are kept as zeros
// so jump indices stay aligned with the support sets.
std::vector<StepFunction> lambda_update(
    const Eigen::MatrixXd& weights, const Eigen::VectorXd& beta, const Dataset& data,
    const std::vector<std::vector<Eigen::Index>>& support_subjects);

}  // namespace stratcox::detail
