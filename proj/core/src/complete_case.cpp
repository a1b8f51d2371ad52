#include "stratcox/complete_case.hpp"

#include <algorithm>

#include "engines.hpp"
#include "stratcox/errors.hpp"

namespace stratcox {

namespace {

// Indicator rows for known-stratum subjects, zero rows otherwise.
Eigen::MatrixXd complete_case_weights(const Dataset& data) {
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(data.n(), data.k_strata);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.observed(i) == 1) w(i, data.stratum(i)) = 1.0;
  }
  return w;
}

}  // namespace

CompleteFit fit_complete_case(const Dataset& data, const FitConfig& cfg) {
  validate_config(cfg);
  const Eigen::MatrixXd w = complete_case_weights(data);
  detail::CoxResult cox = detail::weighted_cox_newton(
      w, data, Eigen::VectorXd::Zero(data.p()), cfg);

  // Breslow support: event times of subjects known to be in each stratum.
  std::vector<std::vector<Eigen::Index>> support(static_cast<std::size_t>(data.k_strata));
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.observed(i) == 1 && data.status(i) == 1) {
      support[static_cast<std::size_t>(data.stratum(i))].push_back(i);
    }
  }
  for (auto& s : support) {
    std::sort(s.begin(), s.end(),
              [&](Eigen::Index a, Eigen::Index b) { return data.time(a) < data.time(b); });
  }

  CompleteFit fit;
  fit.beta_pl = cox.beta;
  fit.breslow = detail::lambda_update(w, cox.beta, data, support);
  fit.converged = cox.converged;
  fit.capped = cox.capped;
  fit.iterations = cox.iterations;
  return fit;
}

GammaFit fit_complete_gamma(const Dataset& data, const FitConfig& cfg) {
  validate_config(cfg);
  const Eigen::MatrixXd w = complete_case_weights(data);
  detail::MultinomialResult mn = detail::weighted_multinomial_newton(
      w, data.w, Eigen::MatrixXd::Zero(data.k_strata - 1, data.m()), cfg);

  GammaFit fit;
  fit.gamma = mn.gamma;
  fit.converged = mn.converged;
  fit.separated = mn.capped;
  fit.iterations = mn.iterations;
  return fit;
}

}  // namespace stratcox
