#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stratcox/dataset.hpp"
#include "stratcox/params.hpp"
#include "stratcox/step_function.hpp"

namespace stratcox {

// n x K posterior stratum masses Q(O_i, k, theta): indicator rows for
// known-stratum subjects, normalized posteriors otherwise.
using WeightMatrix = Eigen::MatrixXd;

// Asserts the weight-matrix contract: entries in [0,1], rows sum to 1 within
// 1e-12, indicator rows where the stratum is observed.
void check_weight_matrix(const WeightMatrix& weights, const Dataset& data);

WeightMatrix e_step(const Params& theta, const Dataset& data);

std::vector<StepFunction> m_step_lambda(const WeightMatrix& weights, const Eigen::VectorXd& beta,
                                        const Dataset& data);

Eigen::MatrixXd m_step_gamma(const WeightMatrix& weights, const Dataset& data,
                             const Eigen::MatrixXd& gamma_init, const FitConfig& cfg,
                             bool* separated = nullptr);

// Maximizes the profile objective with Lambda eliminated via the jump update,
// i.e. sum_i sum_k Q_ik Delta_i [beta'X_i - log sum_j Q_jk e^{beta'X_j} Y_j(T_i)].
Eigen::VectorXd m_step_beta(const WeightMatrix& weights, const Dataset& data,
                            const Eigen::VectorXd& beta_init, const FitConfig& cfg,
                            bool* capped = nullptr);

struct FitResult {
  Params theta_hat;
  std::vector<double> loglik_trace;  // observed-data log-likelihood, init + per iteration
  int em_iterations = 0;
  bool converged = false;
  std::map<std::string, double> score_residuals;  // canonical directions at theta_hat
  double score_lambda_time = 0.0;                 // the t used for the lambda directions
  std::vector<std::string> warnings;
};

// NPMLE via EM. One iteration: E-step, then gamma and (beta, Lambda) updates
// at the current weights; the complete-data objective separates in gamma vs
// (beta, Lambda) and Lambda is profiled inside the beta step, so this is an
// exact M-step and the observed log-likelihood is nondecreasing.
FitResult fit(const Dataset& data, const FitConfig& cfg = {},
              const std::optional<Params>& init = {});

// Direction h for the score functional. The Lambda components are restricted
// to indicators 1{. <= t} and constants.
struct LambdaDirection {
  enum class Kind { zero, indicator, constant };
  Kind kind = Kind::zero;
  double t = 0.0;
  double value = 1.0;

  static LambdaDirection none() { return {}; }
  static LambdaDirection indicator_leq(double t) { return {Kind::indicator, t, 1.0}; }
  static LambdaDirection constant(double c) { return {Kind::constant, 0.0, c}; }
};

struct Direction {
  Eigen::VectorXd h_beta;                 // p (or empty for zero)
  Eigen::VectorXd h_gamma;                // q flattened (or empty for zero)
  std::vector<LambdaDirection> h_lambda;  // K (or empty for all-zero)
};

// S_n(theta)(h): the empirical score along the submodel
// (beta + eta h_beta, gamma + eta h_gamma, int (1 + eta h_Lambda_k) dLambda_k).
double score_at(const Params& theta, const Dataset& data, const Direction& h);

struct ScoreResiduals {
  std::map<std::string, double> values;
  double lambda_time = 0.0;  // median event time
};

// Scores along every coordinate of beta and gamma plus, per stratum, the
// indicator direction at the median event time.
ScoreResiduals canonical_score_residuals(const Params& theta, const Dataset& data);

}  // namespace stratcox
