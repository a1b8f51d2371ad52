#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "stratcox/dataset.hpp"

namespace stratcox {

// Component distributions for X and W. Supports are bounded; an X component
// may copy a W component so the two vectors can share covariates.
struct CovariateSpec {
  enum class Dist { uniform, bernoulli, constant, copy_w };
  Dist dist = Dist::uniform;
  double low = -1.0, high = 1.0;  // uniform
  double prob = 0.5;              // bernoulli
  double value = 1.0;             // constant
  int index = 0;                  // copy_w: 0-based W component

  double support_min(const std::vector<CovariateSpec>& w_spec) const;
  double support_max(const std::vector<CovariateSpec>& w_spec) const;
};

// Per-stratum baseline with closed-form cumulative intensity and inverse.
struct BaselineSpec {
  enum class Family { exponential, weibull };
  Family family = Family::exponential;
  double rate = 1.0;                // exponential: Lambda(t) = rate * t
  double shape = 1.0, scale = 1.0;  // weibull: Lambda(t) = (t/scale)^shape

  double cumulative(double t) const;
  double inverse_cumulative(double h) const;  // t with Lambda(t) = h
};

struct CensoringSpec {
  enum class Model { none, uniform, exponential };
  Model model = Model::none;
  double max = 1.0;   // uniform on (0, max)
  double rate = 1.0;  // exponential
};

struct SimConfig {
  int n = 100;
  int k_strata = 2;
  Eigen::VectorXd beta_true;   // p
  Eigen::MatrixXd gamma_true;  // (K-1) x m
  std::vector<BaselineSpec> baselines;
  std::vector<CovariateSpec> x_spec;
  std::vector<CovariateSpec> w_spec;
  CensoringSpec censoring;
  double tau = 1.0;  // administrative cutoff on top of random censoring
  // P(R = 1 | W) = expit(missing_intercept + missing_coef'W); MAR: R depends
  // on W only.
  double missing_intercept = 10.0;  // effectively no missingness by default
  Eigen::VectorXd missing_coef;     // m (empty means zero)
  double missing_eps = 0.0;         // warn when P(R=1|W) can leave (eps, 1-eps)
  std::uint64_t seed = 1;
};

void validate_sim_config(const SimConfig& config);

// Draws per subject, in this fixed order: W components, fresh X components,
// S, the event draw for T0, the censoring draw, R. Deterministic given the
// seed. Tied event times (double collisions) are broken by the dataset
// jitter rule.
Dataset generate(const SimConfig& config);

// Empirical rates and the per-stratum counts behind the positivity checks:
// observed events (nonempty jump support) and observed subjects still at
// risk at tau.
struct SimMonitor {
  double event_rate = 0.0;
  double missing_rate = 0.0;
  std::vector<int> stratum_counts;          // among r = 1 subjects
  std::vector<int> observed_event_counts;   // r = 1, event, per stratum
  std::vector<int> observed_at_risk_tau;    // r = 1, T >= tau, per stratum
  bool positivity_ok = false;               // both counts positive in every stratum
};

SimMonitor monitor(const Dataset& data);

}  // namespace stratcox
