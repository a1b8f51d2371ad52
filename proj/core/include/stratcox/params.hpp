#pragma once

#include <Eigen/Core>
#include <vector>

#include "stratcox/step_function.hpp"

namespace stratcox {

// Full parameter theta = (beta, gamma, Lambda_1..Lambda_K). gamma is the
// (K-1) x m logistic coefficient matrix with the last stratum as reference
// (gamma_K = 0); its flattened length is q = (K-1)*m, row-major by stratum.
struct Params {
  Eigen::VectorXd beta;                  // p
  Eigen::MatrixXd gamma;                 // (K-1) x m
  std::vector<StepFunction> baselines;   // K

  int k_strata() const { return static_cast<int>(baselines.size()); }
  int q() const { return static_cast<int>(gamma.rows() * gamma.cols()); }
};

inline Eigen::VectorXd flatten_gamma(const Eigen::MatrixXd& gamma) {
  Eigen::VectorXd out(gamma.rows() * gamma.cols());
  for (Eigen::Index k = 0; k < gamma.rows(); ++k) {
    out.segment(k * gamma.cols(), gamma.cols()) = gamma.row(k).transpose();
  }
  return out;
}

inline Eigen::MatrixXd unflatten_gamma(const Eigen::VectorXd& flat, Eigen::Index k_minus_1,
                                       Eigen::Index m) {
  Eigen::MatrixXd out(k_minus_1, m);
  for (Eigen::Index k = 0; k < k_minus_1; ++k) {
    out.row(k) = flat.segment(k * m, m).transpose();
  }
  return out;
}

struct FitConfig {
  int max_em_iters = 500;
  double em_tol = 1e-8;     // relative observed-log-likelihood change
  double param_tol = 1e-6;  // max componentwise parameter change
  int newton_max_iters = 50;
  double newton_tol = 1e-9;  // sup-norm of the (unnormalized) gradient
  double coef_cap = 50.0;    // ||beta||, ||gamma||_F bound; hitting it flags divergence
  // Reference threshold for the converged score residuals reported in
  // FitResult; exceeding it adds a warning but does not fail the fit.
  double score_residual_tol = 1e-6;
  enum class Init { complete_case, user_supplied };
  Init init = Init::complete_case;
};

void validate_config(const FitConfig& cfg);

}  // namespace stratcox
