#include "stratcox/em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "engines.hpp"
#include "stratcox/complete_case.hpp"
#include "stratcox/errors.hpp"
#include "stratcox/model.hpp"

namespace stratcox {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void validate_config(const FitConfig& cfg) {
  if (cfg.max_em_iters < 1 || cfg.newton_max_iters < 1) {
    throw validation_error("FitConfig: iteration caps must be >= 1");
  }
  if (!(cfg.em_tol > 0.0) || !(cfg.param_tol > 0.0) || !(cfg.newton_tol > 0.0) ||
      !(cfg.coef_cap > 0.0) || !(cfg.score_residual_tol > 0.0)) {
    throw validation_error("FitConfig: tolerances must be positive");
  }
}

void check_weight_matrix(const WeightMatrix& weights, const Dataset& data) {
  if (weights.rows() != data.n() || weights.cols() != data.k_strata) {
    throw validation_error("WeightMatrix: shape must be n x K");
  }
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    double row_sum = 0.0;
    for (Eigen::Index k = 0; k < weights.cols(); ++k) {
      const double q = weights(i, k);
      if (!(q >= 0.0 && q <= 1.0)) {
        throw validation_error("WeightMatrix: entry outside [0,1] at row " + std::to_string(i + 1));
      }
      row_sum += q;
    }
    if (std::abs(row_sum - 1.0) > 1e-12) {
      throw validation_error("WeightMatrix: row " + std::to_string(i + 1) +
                             " does not sum to 1");
    }
    if (data.observed(i) == 1) {
      for (Eigen::Index k = 0; k < weights.cols(); ++k) {
        const double want = (k == data.stratum(i)) ? 1.0 : 0.0;
        if (weights(i, k) != want) {
          throw validation_error("WeightMatrix: row " + std::to_string(i + 1) +
                                 " is not the indicator of the observed stratum");
        }
      }
    }
  }
}

WeightMatrix e_step(const Params& theta, const Dataset& data) {
  const int K = data.k_strata;
  WeightMatrix out = WeightMatrix::Zero(data.n(), K);
  Eigen::VectorXd logmass(K);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.observed(i) == 1) {
      out(i, data.stratum(i)) = 1.0;
      continue;
    }
    const double ebx = theta.beta.size() > 0 ? std::exp(theta.beta.dot(data.x.row(i))) : 1.0;
    const Eigen::VectorXd logpi = log_stratum_probs(theta.gamma, data.w.row(i).transpose());
    const double t = data.time(i);
    // the common factor e^{Delta * beta'X} cancels in the normalization
    for (int k = 0; k < K; ++k) {
      const StepFunction& L = theta.baselines[static_cast<std::size_t>(k)];
      double a = -ebx * L.value(t) + logpi(k);
      if (data.status(i) == 1) {
        const double jump = L.jump_at(t);
        a = jump > 0.0 ? a + std::log(jump) : kNegInf;
      }
      logmass(k) = a;
    }
    const double mx = logmass.maxCoeff();
    if (mx == kNegInf) {
      throw numeric_error("e_step: subject " + std::to_string(i + 1) +
                          " has zero posterior mass in every stratum");
    }
    Eigen::VectorXd mass = (logmass.array() - mx).exp();
    out.row(i) = mass.transpose() / mass.sum();
  }
  return out;
}

std::vector<StepFunction> m_step_lambda(const WeightMatrix& weights, const Eigen::VectorXd& beta,
                                        const Dataset& data) {
  std::vector<std::vector<Eigen::Index>> support(static_cast<std::size_t>(data.k_strata));
  for (int k = 0; k < data.k_strata; ++k) {
    support[static_cast<std::size_t>(k)] = jump_support_subjects(data, k);
  }
  return detail::lambda_update(weights, beta, data, support);
}

Eigen::MatrixXd m_step_gamma(const WeightMatrix& weights, const Dataset& data,
                             const Eigen::MatrixXd& gamma_init, const FitConfig& cfg,
                             bool* separated) {
  detail::MultinomialResult mn =
      detail::weighted_multinomial_newton(weights, data.w, gamma_init, cfg);
  if (separated) *separated = mn.capped;
  return mn.gamma;
}

Eigen::VectorXd m_step_beta(const WeightMatrix& weights, const Dataset& data,
                            const Eigen::VectorXd& beta_init, const FitConfig& cfg,
                            bool* capped) {
  detail::CoxResult cox = detail::weighted_cox_newton(weights, data, beta_init, cfg);
  if (capped) *capped = cox.capped;
  return cox.beta;
}

double score_at(const Params& theta, const Dataset& data, const Direction& h) {
  const int K = data.k_strata;
  const int p = data.p();
  const int q = (K - 1) * data.m();
  if (h.h_beta.size() != 0 && h.h_beta.size() != p) {
    throw validation_error("score_at: h_beta length != p");
  }
  if (h.h_gamma.size() != 0 && h.h_gamma.size() != q) {
    throw validation_error("score_at: h_gamma length != q");
  }
  if (!h.h_lambda.empty() && static_cast<int>(h.h_lambda.size()) != K) {
    throw validation_error("score_at: h_lambda must have one entry per stratum");
  }

  const WeightMatrix weights = e_step(theta, data);
  const Eigen::Index m = data.m();
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double d = data.status(i);
    const double t = data.time(i);
    const double ebx = p > 0 ? std::exp(theta.beta.dot(data.x.row(i))) : 1.0;

    if (h.h_beta.size() > 0) {
      // S_beta = psi * X with psi = Delta - sum_k Q_k e^{beta'X} Lambda_k(T)
      double lam_mix = 0.0;
      for (int k = 0; k < K; ++k) {
        lam_mix += weights(i, k) * theta.baselines[static_cast<std::size_t>(k)].value(t);
      }
      total += (d - ebx * lam_mix) * h.h_beta.dot(data.x.row(i));
    }
    if (h.h_gamma.size() > 0) {
      const Eigen::VectorXd pi = stratum_probs(theta.gamma, data.w.row(i).transpose());
      for (int k = 0; k < K - 1; ++k) {
        total += (weights(i, k) - pi(k)) * h.h_gamma.segment(k * m, m).dot(data.w.row(i));
      }
    }
    for (std::size_t k = 0; k < h.h_lambda.size(); ++k) {
      const LambdaDirection& dir = h.h_lambda[k];
      if (dir.kind == LambdaDirection::Kind::zero) continue;
      const StepFunction& L = theta.baselines[k];
      const double qw = weights(i, static_cast<Eigen::Index>(k));
      if (qw == 0.0) continue;
      if (dir.kind == LambdaDirection::Kind::indicator) {
        // h(T)Delta - e^{beta'X} int_0^T 1{s<=t} dLambda = d 1{T<=t} - e^{bx} Lambda(min(T,t))
        total += qw * (d * (t <= dir.t ? 1.0 : 0.0) - ebx * L.value(std::min(t, dir.t)));
      } else {
        total += qw * dir.value * (d - ebx * L.value(t));
      }
    }
  }
  return total / static_cast<double>(data.n());
}

ScoreResiduals canonical_score_residuals(const Params& theta, const Dataset& data) {
  const int K = data.k_strata;
  const int p = data.p();
  const int q = (K - 1) * data.m();

  std::vector<double> event_times;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.status(i) == 1) event_times.push_back(data.time(i));
  }
  std::sort(event_times.begin(), event_times.end());
  // lower median, so the direction's t is an actual event time
  const double t_med = event_times.empty() ? data.tau / 2
                                           : event_times[(event_times.size() - 1) / 2];

  ScoreResiduals out;
  out.lambda_time = t_med;
  for (int r = 0; r < p; ++r) {
    Direction h;
    h.h_beta = Eigen::VectorXd::Unit(p, r);
    out.values["beta[" + std::to_string(r + 1) + "]"] = score_at(theta, data, h);
  }
  for (int s = 0; s < q; ++s) {
    Direction h;
    h.h_gamma = Eigen::VectorXd::Unit(q, s);
    out.values["gamma[" + std::to_string(s + 1) + "]"] = score_at(theta, data, h);
  }
  for (int j = 0; j < K; ++j) {
    Direction h;
    h.h_lambda.assign(static_cast<std::size_t>(K), LambdaDirection::none());
    h.h_lambda[static_cast<std::size_t>(j)] = LambdaDirection::indicator_leq(t_med);
    out.values["lambda[" + std::to_string(j + 1) + "]"] = score_at(theta, data, h);
  }
  return out;
}

namespace {

double max_param_change(const Params& a, const Params& b) {
  double change = 0.0;
  if (a.beta.size() > 0) change = (a.beta - b.beta).lpNorm<Eigen::Infinity>();
  if (a.gamma.size() > 0) {
    change = std::max(change, (a.gamma - b.gamma).lpNorm<Eigen::Infinity>());
  }
  for (std::size_t k = 0; k < a.baselines.size(); ++k) {
    const auto& ja = a.baselines[k].jump_sizes();
    const auto& jb = b.baselines[k].jump_sizes();
    for (std::size_t i = 0; i < ja.size(); ++i) {
      change = std::max(change, std::abs(ja[i] - jb[i]));
    }
  }
  return change;
}

}  // namespace

FitResult fit(const Dataset& data, const FitConfig& cfg, const std::optional<Params>& init) {
  validate_config(cfg);
  const int K = data.k_strata;
  const int p = data.p();
  const int m = data.m();

  FitResult res;
  Params theta;
  if (cfg.init == FitConfig::Init::user_supplied || init.has_value()) {
    if (!init.has_value()) {
      throw validation_error("fit: user_supplied initialization requires explicit Params");
    }
    theta = *init;
    if (theta.beta.size() != p || theta.k_strata() != K) {
      throw validation_error("fit: initializer shape mismatch");
    }
  } else {
    Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd gamma0 = Eigen::MatrixXd::Zero(K - 1, m);
    CompleteFit cc = fit_complete_case(data, cfg);
    if (cc.converged && !cc.capped) {
      beta0 = cc.beta_pl;
    } else {
      res.warnings.push_back("complete-case beta initializer unstable; starting from zero");
    }
    if (K > 1) {
      GammaFit gf = fit_complete_gamma(data, cfg);
      if (gf.converged && !gf.separated) {
        gamma0 = gf.gamma;
      } else {
        res.warnings.push_back("complete-case gamma initializer unstable; starting from zero");
      }
    }
    // Initial weights: indicators where observed, model probabilities where
    // not, so every support time starts with positive jump mass.
    WeightMatrix w0 = WeightMatrix::Zero(data.n(), K);
    for (Eigen::Index i = 0; i < data.n(); ++i) {
      if (data.observed(i) == 1) {
        w0(i, data.stratum(i)) = 1.0;
      } else {
        w0.row(i) = stratum_probs(gamma0, data.w.row(i).transpose()).transpose();
      }
    }
    theta.beta = beta0;
    theta.gamma = gamma0;
    theta.baselines = m_step_lambda(w0, beta0, data);
  }

  double ll = observed_log_likelihood(theta, data);
  if (!std::isfinite(ll)) {
    throw numeric_error("fit: initial observed log-likelihood is not finite");
  }
  res.loglik_trace.push_back(ll);

  bool warned_gamma = false;
  bool warned_beta = false;
  for (int iter = 1; iter <= cfg.max_em_iters; ++iter) {
    res.em_iterations = iter;
    const WeightMatrix weights = e_step(theta, data);

    bool separated = false;
    bool capped = false;
    Params next;
    next.gamma = m_step_gamma(weights, data, theta.gamma, cfg, &separated);
    next.beta = m_step_beta(weights, data, theta.beta, cfg, &capped);
    next.baselines = m_step_lambda(weights, next.beta, data);
    if (separated && !warned_gamma) {
      res.warnings.push_back("gamma hit the coefficient cap during an M-step (separation?)");
      warned_gamma = true;
    }
    if (capped && !warned_beta) {
      res.warnings.push_back("beta hit the coefficient cap during an M-step");
      warned_beta = true;
    }

    const double ll_next = observed_log_likelihood(next, data);
    res.loglik_trace.push_back(ll_next);
    const double rel_change = std::abs(ll_next - ll) / (std::abs(ll) + 1.0);
    const double change = max_param_change(next, theta);
    theta = std::move(next);
    ll = ll_next;
    if (rel_change < cfg.em_tol && change < cfg.param_tol) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged) {
    res.warnings.push_back("EM did not meet the convergence criteria within max_em_iters");
  }

  res.theta_hat = std::move(theta);
  ScoreResiduals sr = canonical_score_residuals(res.theta_hat, data);
  res.score_residuals = std::move(sr.values);
  res.score_lambda_time = sr.lambda_time;
  double max_resid = 0.0;
  for (const auto& [label, value] : res.score_residuals) {
    max_resid = std::max(max_resid, std::abs(value));
  }
  if (max_resid > cfg.score_residual_tol) {
    std::ostringstream os;
    os << "max canonical score residual " << max_resid << " exceeds "
       << cfg.score_residual_tol;
    res.warnings.push_back(os.str());
  }
  return res;
}

}  // namespace stratcox
