#pragma once

// Test-only oracles, kept independent of the implementation paths they check:
// direct-formula evaluations, brute-force optimizers, and shared test
// configurations.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "stratcox/dataset.hpp"
#include "stratcox/em.hpp"
#include "stratcox/params.hpp"
#include "stratcox/simulate.hpp"

namespace oracles {

// Weighted stratified partial log-likelihood by direct double loops:
// sum_i sum_k Q_ik Delta_i [beta'X_i - log sum_{j: T_j >= T_i} Q_jk e^{beta'X_j}].
double naive_profile_loglik(const Eigen::MatrixXd& weights, const stratcox::Dataset& data,
                            const Eigen::VectorXd& beta);

// Coordinate-wise golden-section maximizer of the naive objective.
Eigen::VectorXd grid_polish_cox(const Eigen::MatrixXd& weights, const stratcox::Dataset& data,
                                double lo = -4.0, double hi = 4.0, int sweeps = 60);

// Weighted binary-logistic IRLS (K = 2): maximizes
// sum_i [q_i log pi(w_i) + (1 - q_i) log(1 - pi(w_i))] with pi = expit(gamma'w).
Eigen::VectorXd irls_binary_logistic(const Eigen::MatrixXd& w_covariates,
                                     const Eigen::VectorXd& target_weight,
                                     int iters = 200);

// Posterior stratum masses recomputed directly from the density formula.
Eigen::MatrixXd naive_posterior_weights(const stratcox::Params& theta,
                                        const stratcox::Dataset& data);

// The empirical information matrix assembled entry by entry from the printed
// block formulas (triple loops, no shared risk-set sweeps).
Eigen::MatrixXd naive_block_matrix(const stratcox::Params& theta, const stratcox::Dataset& data);

// Central finite difference of the observed log-likelihood along the
// submodel (beta + eta h_beta, gamma + eta h_gamma, (1 + eta h_k) dLambda_k),
// divided by n.
double finite_diff_score(const stratcox::Params& theta, const stratcox::Dataset& data,
                         const stratcox::Direction& h, double eps = 1e-6);

double gauss_legendre(const std::function<double(double)>& f, double a, double b,
                      int panels = 64);

// Canonical simulation configs shared by tests and the acceptance suite:
// p = 2 (uniform, bernoulli), m = 2 (intercept, uniform), exponential
// baselines, exponential censoring plus the administrative cutoff.
stratcox::SimConfig test_config(int n, int k_strata, std::uint64_t seed,
                                double missing_intercept = 0.85);

// Same family with no missingness.
stratcox::SimConfig full_data_config(int n, int k_strata, std::uint64_t seed);

// Tight tolerances so converged fits have score residuals near solver
// precision.
stratcox::FitConfig tight_fit_config();

// Draws datasets from the config family, skipping seeds that violate the
// positivity checks; deterministic given the base seed.
stratcox::Dataset valid_dataset(stratcox::SimConfig config, int max_tries = 200);

}  // namespace oracles
