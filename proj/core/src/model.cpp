#include "stratcox/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "stratcox/errors.hpp"

namespace stratcox {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

Eigen::VectorXd log_stratum_probs(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& w) {
  const Eigen::Index K = gamma.rows() + 1;
  if (gamma.rows() > 0 && gamma.cols() != w.size()) {
    throw validation_error("stratum_probs: gamma has " + std::to_string(gamma.cols()) +
                           " columns but w has length " + std::to_string(w.size()));
  }
  Eigen::VectorXd eta(K);
  if (gamma.rows() > 0) eta.head(K - 1) = gamma * w;
  eta(K - 1) = 0.0;  // reference stratum
  const double mx = eta.maxCoeff();
  const double lse = mx + std::log((eta.array() - mx).exp().sum());
  return eta.array() - lse;
}

Eigen::VectorXd stratum_probs(const Eigen::MatrixXd& gamma, const Eigen::VectorXd& w) {
  return log_stratum_probs(gamma, w).array().exp();
}

double observed_log_likelihood(const Params& theta, const Dataset& data) {
  const int K = data.k_strata;
  if (theta.k_strata() != K) {
    throw validation_error("observed_log_likelihood: baseline count != k_strata");
  }
  if (theta.beta.size() != data.p()) {
    throw validation_error("observed_log_likelihood: beta length != p");
  }
  if (K > 1 && (theta.gamma.rows() != K - 1 || theta.gamma.cols() != data.m())) {
    throw validation_error("observed_log_likelihood: gamma must be (K-1) x m");
  }

  double total = 0.0;
  Eigen::VectorXd term(K);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    const double bx = theta.beta.size() > 0 ? theta.beta.dot(data.x.row(i)) : 0.0;
    const double ebx = std::exp(bx);
    const Eigen::VectorXd logpi = log_stratum_probs(theta.gamma, data.w.row(i).transpose());
    const double t = data.time(i);
    const int d = data.status(i);

    if (data.observed(i) == 1) {
      const int k = data.stratum(i);
      const StepFunction& L = theta.baselines[static_cast<std::size_t>(k)];
      double v = -ebx * L.value(t) + logpi(k);
      if (d == 1) {
        const double jump = L.jump_at(t);
        if (jump <= 0.0) return kNegInf;  // log of a zero jump
        v += std::log(jump) + bx;
      }
      total += v;
    } else {
      // log sum_k jump_k^d * exp(d*bx - ebx*Lambda_k(t)) * pi_k
      for (int k = 0; k < K; ++k) {
        const StepFunction& L = theta.baselines[static_cast<std::size_t>(k)];
        double a = -ebx * L.value(t) + logpi(k);
        if (d == 1) {
          const double jump = L.jump_at(t);
          a = jump > 0.0 ? a + std::log(jump) + bx : kNegInf;
        }
        term(k) = a;
      }
      const double mx = term.maxCoeff();
      if (mx == kNegInf) return kNegInf;
      total += mx + std::log((term.array() - mx).exp().sum());
    }
  }
  return total;
}

}  // namespace stratcox
