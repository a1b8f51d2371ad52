#pragma once

#include <Eigen/Core>
#include <limits>
#include <string>
#include <vector>

#include "stratcox/dataset.hpp"
#include "stratcox/params.hpp"

namespace stratcox {

// Score kernels at theta_hat:
//   psi_i = Delta_i - sum_k Q_ik e^{beta'X_i} Lambda_k(T_i)
//   phi(u, i, k) = Y_i(u) Q_ik e^{beta'X_i}
//   s_gamma row i = stacked W_i (Q_ik - pi_k(W_i)), k = 1..K-1
struct ScoreKernels {
  Eigen::VectorXd psi;          // n
  Eigen::VectorXd exp_bx;       // n
  Eigen::MatrixXd s_gamma;      // n x q
  Eigen::MatrixXd weights;      // n x K
  Eigen::MatrixXd lambda_at_t;  // n x K, Lambda_k(T_i)
  Eigen::MatrixXd jump_at_t;    // n x K, jump of Lambda_k at exactly T_i
  Eigen::VectorXd time;         // n

  double phi(double u, Eigen::Index i, int k) const {
    return time(i) >= u ? weights(i, k) * exp_bx(i) : 0.0;
  }
};

ScoreKernels score_kernels(const Params& theta_hat, const Dataset& data);

// Empirical information block matrix of order p + q + K*n. The Lambda blocks
// are indexed stratum-major, then by subject (columns correspond to the
// observation times T_1..T_n in subject order, censored times included).
// Lower off-diagonal Lambda blocks (j < k) are identically zero.
struct BlockMatrix {
  Eigen::MatrixXd a;
  int p = 0;
  int q = 0;
  int k_strata = 0;
  Eigen::Index n = 0;

  Eigen::Index dim() const { return p + q + static_cast<Eigen::Index>(k_strata) * n; }
  Eigen::Index lambda_offset(int k) const { return p + q + static_cast<Eigen::Index>(k) * n; }

  auto beta_beta() const { return a.block(0, 0, p, p); }
  auto beta_gamma() const { return a.block(0, p, p, q); }
  auto gamma_beta() const { return a.block(p, 0, q, p); }
  auto gamma_gamma() const { return a.block(p, p, q, q); }
  auto beta_lambda() const { return a.block(0, p + q, p, k_strata * n); }
  auto gamma_lambda() const { return a.block(p, p + q, q, k_strata * n); }
  auto lambda_beta() const { return a.block(p + q, 0, k_strata * n, p); }
  auto lambda_gamma() const { return a.block(p + q, p, k_strata * n, q); }
  auto lambda_lambda() const { return a.block(p + q, p + q, k_strata * n, k_strata * n); }
};

BlockMatrix build_block_matrix(const Params& theta_hat, const Dataset& data);

struct VarianceDiagnostics {
  double sigma_beta_asymmetry = 0.0;
  double sigma_gamma_asymmetry = 0.0;
  // max relative gap between Sigma_beta e_r and the beta block of the
  // solution of A_n x = (e_r; 0; 0)
  double system_check_rel_err = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

// Plug-in variance estimates for the sqrt(n)-scaled estimators. Reported
// standard errors are sqrt(diag(Sigma)/n); the SE of Lambda_j(t) is
// sqrt(v_squared(j, t)/n).
struct VarianceResult {
  Eigen::MatrixXd sigma_beta;    // p x p
  Eigen::MatrixXd sigma_gamma;   // q x q
  Eigen::MatrixXd sigma_lambda;  // Kn x Kn
  Eigen::VectorXd se_beta;
  Eigen::VectorXd se_gamma;
  Eigen::VectorXd time;        // observation times, subject order
  Eigen::MatrixXd jump_at_t;   // n x K
  Eigen::Index n = 0;
  int k_strata = 0;
  double tau = 0.0;
  VarianceDiagnostics diagnostics;
};

// The three Schur-complement expressions, computed verbatim, plus the
// system-solve diagnostic. Throws linalg_error when an inner block is
// numerically singular; near-singularity adds a warning.
VarianceResult schur_variances(const BlockMatrix& a, const Params& theta_hat,
                               const Dataset& data);

// v^2_j(t) = Xi'_{(j,t)} Sigma_Lambda U_{(j,t)} with Xi the jump sizes and U
// the at-or-before-t indicators in the j-th Lambda block. j is 0-based.
double v_squared(const VarianceResult& result, int j, double t);

}  // namespace stratcox
