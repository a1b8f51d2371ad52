#include "stratcox/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "stratcox/errors.hpp"
#include "stratcox/model.hpp"
#include "stratcox/rng.hpp"

namespace stratcox {

double CovariateSpec::support_min(const std::vector<CovariateSpec>& w_spec) const {
  switch (dist) {
    case Dist::uniform: return low;
    case Dist::bernoulli: return 0.0;
    case Dist::constant: return value;
    case Dist::copy_w: return w_spec[static_cast<std::size_t>(index)].support_min(w_spec);
  }
  return 0.0;
}

double CovariateSpec::support_max(const std::vector<CovariateSpec>& w_spec) const {
  switch (dist) {
    case Dist::uniform: return high;
    case Dist::bernoulli: return 1.0;
    case Dist::constant: return value;
    case Dist::copy_w: return w_spec[static_cast<std::size_t>(index)].support_max(w_spec);
  }
  return 0.0;
}

double BaselineSpec::cumulative(double t) const {
  if (t <= 0.0) return 0.0;
  return family == Family::exponential ? rate * t : std::pow(t / scale, shape);
}

double BaselineSpec::inverse_cumulative(double h) const {
  return family == Family::exponential ? h / rate : scale * std::pow(h, 1.0 / shape);
}

void validate_sim_config(const SimConfig& config) {
  if (config.n < 1) throw validation_error("sim config: n must be >= 1");
  if (config.k_strata < 1) throw validation_error("sim config: k_strata must be >= 1");
  if (!(config.tau > 0.0) || !std::isfinite(config.tau)) {
    throw validation_error("sim config: tau must be positive and finite");
  }
  if (static_cast<int>(config.baselines.size()) != config.k_strata) {
    throw validation_error("sim config: baselines must list one entry per stratum");
  }
  for (const BaselineSpec& b : config.baselines) {
    if (b.family == BaselineSpec::Family::exponential && !(b.rate > 0.0)) {
      throw validation_error("sim config: exponential baseline rate must be positive");
    }
    if (b.family == BaselineSpec::Family::weibull && (!(b.shape > 0.0) || !(b.scale > 0.0))) {
      throw validation_error("sim config: weibull baseline shape and scale must be positive");
    }
  }
  if (config.beta_true.size() != static_cast<Eigen::Index>(config.x_spec.size())) {
    throw validation_error("sim config: beta length must match the X spec");
  }
  const Eigen::Index m = static_cast<Eigen::Index>(config.w_spec.size());
  if (config.k_strata > 1 &&
      (config.gamma_true.rows() != config.k_strata - 1 || config.gamma_true.cols() != m)) {
    throw validation_error("sim config: gamma must be (K-1) x m");
  }
  if (config.missing_coef.size() != 0 && config.missing_coef.size() != m) {
    throw validation_error("sim config: missing-model coefficients must match the W spec");
  }
  for (const CovariateSpec& s : config.x_spec) {
    if (s.dist == CovariateSpec::Dist::copy_w &&
        (s.index < 0 || s.index >= static_cast<int>(config.w_spec.size()))) {
      throw validation_error("sim config: copy_w index out of range");
    }
  }
  for (const CovariateSpec& s : config.w_spec) {
    if (s.dist == CovariateSpec::Dist::copy_w) {
      throw validation_error("sim config: W components cannot copy X; declare shared "
                             "components in X as copy_w instead");
    }
    if (s.dist == CovariateSpec::Dist::uniform && !(s.low < s.high)) {
      throw validation_error("sim config: uniform support must have low < high");
    }
    if (s.dist == CovariateSpec::Dist::bernoulli && !(s.prob >= 0.0 && s.prob <= 1.0)) {
      throw validation_error("sim config: bernoulli probability must lie in [0,1]");
    }
  }
  for (const CovariateSpec& s : config.x_spec) {
    if (s.dist == CovariateSpec::Dist::uniform && !(s.low < s.high)) {
      throw validation_error("sim config: uniform support must have low < high");
    }
    if (s.dist == CovariateSpec::Dist::bernoulli && !(s.prob >= 0.0 && s.prob <= 1.0)) {
      throw validation_error("sim config: bernoulli probability must lie in [0,1]");
    }
  }
  if (config.censoring.model == CensoringSpec::Model::uniform && !(config.censoring.max > 0.0)) {
    throw validation_error("sim config: uniform censoring bound must be positive");
  }
  if (config.censoring.model == CensoringSpec::Model::exponential &&
      !(config.censoring.rate > 0.0)) {
    throw validation_error("sim config: exponential censoring rate must be positive");
  }
  if (config.missing_eps > 0.0) {
    // worst-case P(R=1|W) over the declared covariate supports
    double lo = config.missing_intercept;
    double hi = config.missing_intercept;
    for (Eigen::Index j = 0; j < config.missing_coef.size(); ++j) {
      const CovariateSpec& s = config.w_spec[static_cast<std::size_t>(j)];
      const double a = config.missing_coef(j) * s.support_min(config.w_spec);
      const double b = config.missing_coef(j) * s.support_max(config.w_spec);
      lo += std::min(a, b);
      hi += std::max(a, b);
    }
    const double pmin = 1.0 / (1.0 + std::exp(-lo));
    const double pmax = 1.0 / (1.0 + std::exp(-hi));
    if (pmin <= config.missing_eps || pmax >= 1.0 - config.missing_eps) {
      std::ostringstream os;
      os << "sim config: P(R=1|W) can reach [" << pmin << ", " << pmax
         << "], outside (" << config.missing_eps << ", " << 1.0 - config.missing_eps << ")";
      throw validation_error(os.str());
    }
  }
}

namespace {

double draw_component(const CovariateSpec& spec, Rng& rng) {
  switch (spec.dist) {
    case CovariateSpec::Dist::uniform: return rng.uniform(spec.low, spec.high);
    case CovariateSpec::Dist::bernoulli: return rng.bernoulli(spec.prob) ? 1.0 : 0.0;
    case CovariateSpec::Dist::constant: return spec.value;
    case CovariateSpec::Dist::copy_w: return 0.0;  // filled from W afterwards
  }
  return 0.0;
}

}  // namespace

Dataset generate(const SimConfig& config) {
  validate_sim_config(config);
  const int K = config.k_strata;
  const Eigen::Index n = config.n;
  const Eigen::Index p = static_cast<Eigen::Index>(config.x_spec.size());
  const Eigen::Index m = static_cast<Eigen::Index>(config.w_spec.size());

  Dataset d;
  d.time.resize(n);
  d.status.resize(n);
  d.x.resize(n, p);
  d.w.resize(n, m);
  d.observed.resize(n);
  d.stratum.resize(n);
  d.k_strata = K;
  d.tau = config.tau;

  Rng rng(config.seed);
  const Eigen::MatrixXd gamma =
      K > 1 ? config.gamma_true : Eigen::MatrixXd::Zero(0, m);

  for (Eigen::Index i = 0; i < n; ++i) {
    // fixed draw order per subject: W, X, S, T0, C, R
    for (Eigen::Index j = 0; j < m; ++j) {
      d.w(i, j) = draw_component(config.w_spec[static_cast<std::size_t>(j)], rng);
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      const CovariateSpec& spec = config.x_spec[static_cast<std::size_t>(j)];
      d.x(i, j) = spec.dist == CovariateSpec::Dist::copy_w
                      ? d.w(i, spec.index)
                      : draw_component(spec, rng);
    }

    const Eigen::VectorXd pi = stratum_probs(gamma, d.w.row(i).transpose());
    const double us = rng.uniform01();
    int s = K - 1;
    double acc = 0.0;
    for (int k = 0; k < K; ++k) {
      acc += pi(k);
      if (us < acc) {
        s = k;
        break;
      }
    }

    // T0 via inverse transform: Lambda_s(T0) e^{beta'X} ~ Exp(1)
    const double bx = p > 0 ? config.beta_true.dot(d.x.row(i)) : 0.0;
    const double e = rng.exponential(1.0);
    const double t0 =
        config.baselines[static_cast<std::size_t>(s)].inverse_cumulative(e * std::exp(-bx));

    double c = std::numeric_limits<double>::infinity();
    if (config.censoring.model == CensoringSpec::Model::uniform) {
      c = rng.uniform(0.0, config.censoring.max);
    } else if (config.censoring.model == CensoringSpec::Model::exponential) {
      c = rng.exponential(config.censoring.rate);
    }
    const double horizon = std::min(c, config.tau);
    d.time(i) = std::min(t0, horizon);
    d.status(i) = t0 <= horizon ? 1 : 0;

    double lin = config.missing_intercept;
    if (config.missing_coef.size() > 0) lin += config.missing_coef.dot(d.w.row(i));
    const bool observed = rng.bernoulli(1.0 / (1.0 + std::exp(-lin)));
    d.observed(i) = observed ? 1 : 0;
    d.stratum(i) = observed ? s : -1;
  }

  // double collisions among event times are possible in principle; break them
  // with the deterministic jitter rule rather than failing
  ValidationOptions opts;
  opts.jitter_ties = true;
  opts.jitter_seed = splitmix64(config.seed);
  std::map<double, int> counts;
  bool tied = false;
  for (Eigen::Index i = 0; i < n && !tied; ++i) {
    if (d.status(i) == 1 && ++counts[d.time(i)] > 1) tied = true;
  }
  if (tied) {
    // leaves non-tied data untouched; throws only on pathological configs
    validate_dataset(d, opts);
  }
  return d;
}

SimMonitor monitor(const Dataset& data) {
  SimMonitor mon;
  const int K = data.k_strata;
  mon.stratum_counts.assign(static_cast<std::size_t>(K), 0);
  mon.observed_event_counts.assign(static_cast<std::size_t>(K), 0);
  mon.observed_at_risk_tau.assign(static_cast<std::size_t>(K), 0);
  int events = 0;
  int missing = 0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    events += data.status(i);
    if (data.observed(i) == 1) {
      const auto k = static_cast<std::size_t>(data.stratum(i));
      ++mon.stratum_counts[k];
      if (data.status(i) == 1) ++mon.observed_event_counts[k];
      if (data.time(i) >= data.tau) ++mon.observed_at_risk_tau[k];
    } else {
      ++missing;
    }
  }
  mon.event_rate = static_cast<double>(events) / static_cast<double>(data.n());
  mon.missing_rate = static_cast<double>(missing) / static_cast<double>(data.n());
  mon.positivity_ok = true;
  for (int k = 0; k < K; ++k) {
    if (mon.observed_event_counts[static_cast<std::size_t>(k)] == 0 ||
        mon.observed_at_risk_tau[static_cast<std::size_t>(k)] == 0) {
      mon.positivity_ok = false;
    }
  }
  return mon;
}

}  // namespace stratcox
