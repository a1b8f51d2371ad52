#include "engines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "stratcox/errors.hpp"

namespace stratcox::detail {

RiskSweepOrder::RiskSweepOrder(const Eigen::VectorXd& time) {
  const Eigen::Index n = time.size();
  order.resize(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return time(a) > time(b); });
  group_offset.push_back(0);
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (time(order[i]) != time(order[i - 1])) group_offset.push_back(i);
  }
  group_offset.push_back(order.size());
}

namespace {

Eigen::VectorXd linear_predictor(const Dataset& data, const Eigen::VectorXd& beta) {
  if (beta.size() == 0) return Eigen::VectorXd::Zero(data.n());
  return data.x * beta;
}

// Objective, gradient, and Hessian of the weighted stratified profile
// likelihood in one descending risk-set sweep.
struct CoxEval {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hess;
};

CoxEval cox_eval(const Eigen::MatrixXd& weights, const Dataset& data,
                 const Eigen::VectorXd& beta, bool derivatives) {
  const int p = data.p();
  const int K = data.k_strata;
  const Eigen::VectorXd bx = linear_predictor(data, beta);
  const Eigen::VectorXd ebx = bx.array().exp();

  CoxEval ev;
  ev.grad = Eigen::VectorXd::Zero(p);
  ev.hess = Eigen::MatrixXd::Zero(p, p);

  Eigen::VectorXd denom = Eigen::VectorXd::Zero(K);               // s0(beta,k,t)
  Eigen::MatrixXd dsum1 = Eigen::MatrixXd::Zero(p, K);            // s1(beta,k,t)
  std::vector<Eigen::MatrixXd> dsum2;                             // s2(beta,k,t)
  if (derivatives) dsum2.assign(static_cast<std::size_t>(K), Eigen::MatrixXd::Zero(p, p));

  RiskSweepOrder sweep(data.time);
  for (std::size_t g = 0; g + 1 < sweep.group_offset.size(); ++g) {
    // everyone at this time enters the risk set first
    for (std::size_t j = sweep.group_offset[g]; j < sweep.group_offset[g + 1]; ++j) {
      const Eigen::Index i = sweep.order[j];
      for (int k = 0; k < K; ++k) {
        const double q = weights(i, k);
        if (q <= 0.0) continue;
        const double weta = q * ebx(i);
        denom(k) += weta;
        if (derivatives && p > 0) {
          dsum1.col(k) += weta * data.x.row(i).transpose();
          dsum2[static_cast<std::size_t>(k)].noalias() +=
              weta * data.x.row(i).transpose() * data.x.row(i);
        }
      }
    }
    for (std::size_t j = sweep.group_offset[g]; j < sweep.group_offset[g + 1]; ++j) {
      const Eigen::Index i = sweep.order[j];
      if (data.status(i) != 1) continue;
      for (int k = 0; k < K; ++k) {
        const double q = weights(i, k);
        if (q <= 0.0) continue;
        ev.loglik += q * (bx(i) - std::log(denom(k)));
        if (derivatives && p > 0) {
          const Eigen::VectorXd mean = dsum1.col(k) / denom(k);
          ev.grad += q * (data.x.row(i).transpose() - mean);
          ev.hess.noalias() -=
              q * (dsum2[static_cast<std::size_t>(k)] / denom(k) - mean * mean.transpose());
        }
      }
    }
  }
  return ev;
}

}  // namespace

double weighted_cox_objective(const Eigen::MatrixXd& weights, const Dataset& data,
                              const Eigen::VectorXd& beta) {
  return cox_eval(weights, data, beta, false).loglik;
}

CoxResult weighted_cox_newton(const Eigen::MatrixXd& weights, const Dataset& data,
                              Eigen::VectorXd beta0, const FitConfig& cfg) {
  const int p = data.p();
  CoxResult res;
  res.beta = std::move(beta0);
  if (res.beta.size() != p) throw validation_error("cox: beta initializer length != p");
  if (p == 0) {
    res.converged = true;
    res.loglik = weighted_cox_objective(weights, data, res.beta);
    return res;
  }

  CoxEval ev = cox_eval(weights, data, res.beta, true);
  res.loglik = ev.loglik;
  for (int it = 1; it <= cfg.newton_max_iters; ++it) {
    res.iterations = it;
    if (ev.grad.lpNorm<Eigen::Infinity>() < cfg.newton_tol) {
      res.converged = true;
      return res;
    }
    Eigen::MatrixXd neg_hess = -ev.hess;
    Eigen::VectorXd step = neg_hess.ldlt().solve(ev.grad);
    if (!step.allFinite()) {
      neg_hess.diagonal().array() += 1e-8 * (1.0 + neg_hess.diagonal().cwiseAbs().maxCoeff());
      step = neg_hess.ldlt().solve(ev.grad);
      if (!step.allFinite()) throw numeric_error("cox: Newton step is not finite");
    }
    // When the predicted gain is below objective roundoff, step-halving can
    // only churn on ties; take the pure Newton step (the gradient is still
    // accurate) and let the gradient test terminate.
    const bool micro = 0.5 * ev.grad.dot(step) < 1e-15 * (1.0 + std::abs(res.loglik));

    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 30 && !accepted; ++half) {
      Eigen::VectorXd trial = res.beta + scale * step;
      if (trial.norm() > cfg.coef_cap) {
        trial *= cfg.coef_cap / trial.norm();
        const double ll_cap = weighted_cox_objective(weights, data, trial);
        // non-strict: near the boundary a monotone likelihood is flat to
        // double precision
        if (ll_cap >= res.loglik || micro) {
          res.beta = trial;
          res.loglik = ll_cap;
          res.capped = true;
          return res;
        }
        scale *= 0.5;
        continue;
      }
      const double ll_try = weighted_cox_objective(weights, data, trial);
      if (ll_try >= res.loglik || micro) {
        res.beta = trial;
        res.loglik = ll_try;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) return res;  // flat to machine precision, leave converged unset
    ev = cox_eval(weights, data, res.beta, true);
  }
  res.converged = ev.grad.lpNorm<Eigen::Infinity>() < cfg.newton_tol;
  return res;
}

double weighted_multinomial_objective(const Eigen::MatrixXd& weights,
                                      const Eigen::MatrixXd& w_covariates,
                                      const Eigen::MatrixXd& gamma) {
  const Eigen::Index n = weights.rows();
  const Eigen::Index K = weights.cols();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd eta(K);
    if (gamma.rows() > 0) eta.head(K - 1) = gamma * w_covariates.row(i).transpose();
    eta(K - 1) = 0.0;
    const double mx = eta.maxCoeff();
    const double lse = mx + std::log((eta.array() - mx).exp().sum());
    for (Eigen::Index k = 0; k < K; ++k) {
      const double q = weights(i, k);
      if (q > 0.0) ll += q * (eta(k) - lse);
    }
  }
  return ll;
}

MultinomialResult weighted_multinomial_newton(const Eigen::MatrixXd& weights,
                                              const Eigen::MatrixXd& w_covariates,
                                              Eigen::MatrixXd gamma0, const FitConfig& cfg) {
  const Eigen::Index n = weights.rows();
  const Eigen::Index K = weights.cols();
  const Eigen::Index m = w_covariates.cols();
  const Eigen::Index q_dim = (K - 1) * m;

  MultinomialResult res;
  res.gamma = std::move(gamma0);
  if (res.gamma.rows() != K - 1 || (K > 1 && res.gamma.cols() != m)) {
    throw validation_error("multinomial: gamma initializer must be (K-1) x m");
  }
  if (q_dim == 0) {
    res.converged = true;
    res.loglik = weighted_multinomial_objective(weights, w_covariates, res.gamma);
    return res;
  }

  res.loglik = weighted_multinomial_objective(weights, w_covariates, res.gamma);
  for (int it = 1; it <= cfg.newton_max_iters; ++it) {
    res.iterations = it;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(q_dim);
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(q_dim, q_dim);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double mass = weights.row(i).sum();  // 1 for posterior rows, 0 for excluded
      if (mass <= 0.0) continue;
      const Eigen::VectorXd wi = w_covariates.row(i).transpose();
      Eigen::VectorXd eta(K);
      eta.head(K - 1) = res.gamma * wi;
      eta(K - 1) = 0.0;
      const double mx = eta.maxCoeff();
      Eigen::VectorXd pi = (eta.array() - mx).exp();
      pi /= pi.sum();
      for (Eigen::Index k = 0; k < K - 1; ++k) {
        grad.segment(k * m, m) += (weights(i, k) - mass * pi(k)) * wi;
        for (Eigen::Index l = 0; l < K - 1; ++l) {
          const double coef = mass * pi(k) * ((k == l ? 1.0 : 0.0) - pi(l));
          hess.block(k * m, l * m, m, m).noalias() -= coef * wi * wi.transpose();
        }
      }
    }
    if (grad.lpNorm<Eigen::Infinity>() < cfg.newton_tol) {
      res.converged = true;
      return res;
    }
    Eigen::MatrixXd neg_hess = -hess;
    Eigen::VectorXd step = neg_hess.ldlt().solve(grad);
    if (!step.allFinite()) {
      neg_hess.diagonal().array() += 1e-8 * (1.0 + neg_hess.diagonal().cwiseAbs().maxCoeff());
      step = neg_hess.ldlt().solve(grad);
      if (!step.allFinite()) throw numeric_error("multinomial: Newton step is not finite");
    }
    const bool micro = 0.5 * grad.dot(step) < 1e-15 * (1.0 + std::abs(res.loglik));

    double scale = 1.0;
    bool accepted = false;
    for (int half = 0; half < 30 && !accepted; ++half) {
      Eigen::MatrixXd trial = res.gamma + scale * unflatten_gamma(step, K - 1, m);
      if (trial.norm() > cfg.coef_cap) {
        trial *= cfg.coef_cap / trial.norm();
        const double ll_cap = weighted_multinomial_objective(weights, w_covariates, trial);
        if (ll_cap >= res.loglik || micro) {
          res.gamma = trial;
          res.loglik = ll_cap;
          res.capped = true;  // separation: likelihood rising at the boundary
          return res;
        }
        scale *= 0.5;
        continue;
      }
      const double ll_try = weighted_multinomial_objective(weights, w_covariates, trial);
      if (ll_try >= res.loglik || micro) {
        res.gamma = trial;
        res.loglik = ll_try;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) return res;
  }
  return res;
}

std::vector<StepFunction> lambda_update(
    const Eigen::MatrixXd& weights, const Eigen::VectorXd& beta, const Dataset& data,
    const std::vector<std::vector<Eigen::Index>>& support_subjects) {
  const int K = data.k_strata;
  const Eigen::VectorXd ebx = linear_predictor(data, beta).array().exp();
  RiskSweepOrder sweep(data.time);

  std::vector<StepFunction> out;
  out.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) {
    const std::vector<Eigen::Index>& supp = support_subjects[static_cast<std::size_t>(k)];
    std::vector<double> times(supp.size());
    std::vector<double> jumps(supp.size(), 0.0);

    double denom = 0.0;
    std::size_t next = 0;  // into sweep.order
    for (std::size_t pos = supp.size(); pos-- > 0;) {
      const Eigen::Index s = supp[pos];
      const double t = data.time(s);
      while (next < sweep.order.size() && data.time(sweep.order[next]) >= t) {
        const Eigen::Index i = sweep.order[next];
        denom += weights(i, k) * ebx(i);
        ++next;
      }
      times[pos] = t;
      const double q = weights(s, k);
      if (q > 0.0) {
        if (!(denom > 0.0)) {
          std::ostringstream os;
          os << "zero risk-set mass for stratum " << (k + 1) << " at event time " << t;
          throw numeric_error(os.str());
        }
        jumps[pos] = q / denom;
      }
    }
    out.emplace_back(std::move(times), std::move(jumps));
  }
  return out;
}

}  // namespace stratcox::detail
