#include "stratcox/monte_carlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <limits>
#include <sstream>
#include <thread>

#include "stratcox/em.hpp"
#include "stratcox/errors.hpp"
#include "stratcox/rng.hpp"
#include "stratcox/variance.hpp"

namespace stratcox {

namespace {

constexpr double kZ95 = 1.959963984540054;

struct RepOutcome {
  bool ok = false;
  std::string reason;
  Eigen::VectorXd estimate;  // beta, gamma(flat), Lambda_j(t) stacked
  Eigen::VectorXd se;
};

std::vector<double> pilot_lambda_times(const SimConfig& sim) {
  SimConfig pilot = sim;
  pilot.seed = splitmix64(sim.seed ^ 0xa11ce5eedull);
  const Dataset d = generate(pilot);
  std::vector<double> events;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    if (d.status(i) == 1) events.push_back(d.time(i));
  }
  std::sort(events.begin(), events.end());
  if (events.empty()) return {sim.tau * 0.25, sim.tau * 0.5, sim.tau * 0.75};
  auto quartile = [&](double f) {
    const auto idx = static_cast<std::size_t>(f * (static_cast<double>(events.size()) - 1.0));
    return events[idx];
  };
  return {quartile(0.25), quartile(0.5), quartile(0.75)};
}

RepOutcome run_one(const McConfig& config, const std::vector<double>& times, int rep) {
  RepOutcome out;
  SimConfig sim = config.sim;
  sim.seed = splitmix64(config.sim.seed ^ static_cast<std::uint64_t>(rep));
  try {
    Dataset data = generate(sim);
    const SimMonitor mon = monitor(data);
    for (int k = 0; k < data.k_strata; ++k) {
      if (mon.observed_event_counts[static_cast<std::size_t>(k)] == 0) {
        out.reason = "generate: stratum " + std::to_string(k + 1) + " has no observed event";
        return out;
      }
      if (mon.observed_at_risk_tau[static_cast<std::size_t>(k)] == 0) {
        out.reason = "generate: stratum " + std::to_string(k + 1) +
                     " has no observed subject at risk at tau";
        return out;
      }
    }
    validate_dataset(data);

    const FitResult fr = fit(data, config.fit);
    if (!fr.converged) {
      out.reason = "fit: EM did not converge";
      return out;
    }
    const BlockMatrix bm = build_block_matrix(fr.theta_hat, data);
    const VarianceResult vr = schur_variances(bm, fr.theta_hat, data);

    const int p = data.p();
    const int q = (data.k_strata - 1) * data.m();
    const int K = data.k_strata;
    const auto tcount = static_cast<int>(times.size());
    out.estimate.resize(p + q + K * tcount);
    out.se.resize(p + q + K * tcount);
    out.estimate.head(p) = fr.theta_hat.beta;
    out.se.head(p) = vr.se_beta;
    if (q > 0) {
      out.estimate.segment(p, q) = flatten_gamma(fr.theta_hat.gamma);
      out.se.segment(p, q) = vr.se_gamma;
    }
    for (int j = 0; j < K; ++j) {
      for (int ti = 0; ti < tcount; ++ti) {
        const double t = times[static_cast<std::size_t>(ti)];
        const int pos = p + q + j * tcount + ti;
        out.estimate(pos) = fr.theta_hat.baselines[static_cast<std::size_t>(j)].value(t);
        const double v2 = v_squared(vr, j, t);
        out.se(pos) = v2 >= 0.0 ? std::sqrt(v2 / static_cast<double>(data.n()))
                                : std::numeric_limits<double>::quiet_NaN();
      }
    }
    if (!out.estimate.allFinite() || !out.se.allFinite()) {
      out.reason = "variance: nonfinite estimate or standard error";
      return out;
    }
    out.ok = true;
  } catch (const std::exception& ex) {
    out.reason = ex.what();
  }
  return out;
}

}  // namespace

McSummary run_monte_carlo(const McConfig& config, int reps) {
  if (reps < 2) throw validation_error("run_monte_carlo: reps must be >= 2");
  validate_sim_config(config.sim);
  validate_config(config.fit);

  McSummary summary;
  summary.reps = reps;
  summary.lambda_times =
      config.lambda_times.empty() ? pilot_lambda_times(config.sim) : config.lambda_times;

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(reps));
  const int workers = std::clamp(config.workers, 1, reps);
  if (workers == 1) {
    for (int r = 0; r < reps; ++r) {
      outcomes[static_cast<std::size_t>(r)] = run_one(config, summary.lambda_times, r);
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < reps; r = next.fetch_add(1)) {
          outcomes[static_cast<std::size_t>(r)] = run_one(config, summary.lambda_times, r);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  // aggregation runs in replication order, so results do not depend on the
  // thread schedule
  std::vector<Eigen::VectorXd> estimates;
  std::vector<Eigen::VectorXd> ses;
  for (int r = 0; r < reps; ++r) {
    const RepOutcome& o = outcomes[static_cast<std::size_t>(r)];
    if (o.ok) {
      estimates.push_back(o.estimate);
      ses.push_back(o.se);
    } else {
      summary.failures.emplace_back(r + 1, o.reason);
    }
  }
  summary.used = static_cast<int>(estimates.size());
  if (summary.used * 2 < reps) {
    throw mc_failure_error("more than half of the replications failed (" +
                           std::to_string(reps - summary.used) + " of " +
                           std::to_string(reps) + ")");
  }

  // truth vector and labels in the same stacked order
  const int p = static_cast<int>(config.sim.beta_true.size());
  const int K = config.sim.k_strata;
  const int m = static_cast<int>(config.sim.w_spec.size());
  const int q = (K - 1) * m;
  const auto tcount = static_cast<int>(summary.lambda_times.size());
  const int dim = p + q + K * tcount;

  Eigen::VectorXd truth(dim);
  std::vector<std::string> labels(static_cast<std::size_t>(dim));
  for (int r = 0; r < p; ++r) {
    truth(r) = config.sim.beta_true(r);
    labels[static_cast<std::size_t>(r)] = "beta[" + std::to_string(r + 1) + "]";
  }
  for (int k = 0; k < K - 1; ++k) {
    for (int j = 0; j < m; ++j) {
      truth(p + k * m + j) = config.sim.gamma_true(k, j);
      labels[static_cast<std::size_t>(p + k * m + j)] =
          "gamma[" + std::to_string(k + 1) + "][" + std::to_string(j + 1) + "]";
    }
  }
  for (int j = 0; j < K; ++j) {
    for (int ti = 0; ti < tcount; ++ti) {
      const double t = summary.lambda_times[static_cast<std::size_t>(ti)];
      const int pos = p + q + j * tcount + ti;
      truth(pos) = config.sim.baselines[static_cast<std::size_t>(j)].cumulative(t);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "lambda[%d](t=%.6g)", j + 1, t);
      labels[static_cast<std::size_t>(pos)] = buf;
    }
  }

  const double used = static_cast<double>(summary.used);
  for (int c = 0; c < dim; ++c) {
    ParamSummary row;
    row.param = labels[static_cast<std::size_t>(c)];
    row.truth = truth(c);
    double sum = 0.0;
    for (const auto& est : estimates) sum += est(c);
    row.mean = sum / used;
    row.bias = row.mean - row.truth;
    double ss = 0.0;
    for (const auto& est : estimates) ss += (est(c) - row.mean) * (est(c) - row.mean);
    row.emp_sd = summary.used > 1 ? std::sqrt(ss / (used - 1.0)) : 0.0;
    double se_sum = 0.0;
    int covered = 0;
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      const double se = ses[i](c);
      se_sum += se;
      if (std::abs(estimates[i](c) - row.truth) <= kZ95 * se) ++covered;
    }
    row.mean_se = se_sum / used;
    row.coverage = static_cast<double>(covered) / used;
    summary.rows.push_back(std::move(row));
  }
  return summary;
}

void write_summary_csv(const McSummary& summary, std::ostream& os) {
  os << "param,true,mean,bias,emp_sd,mean_se,coverage\n";
  char buf[256];
  for (const ParamSummary& row : summary.rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  row.param.c_str(), row.truth, row.mean, row.bias, row.emp_sd, row.mean_se,
                  row.coverage);
    os << buf;
  }
}

void write_summary_table(const McSummary& summary, std::ostream& os) {
  os << std::left << std::setw(22) << "param" << std::right << std::setw(10) << "true"
     << std::setw(11) << "mean" << std::setw(11) << "bias" << std::setw(10) << "emp_sd"
     << std::setw(10) << "mean_se" << std::setw(10) << "coverage" << '\n';
  for (const ParamSummary& row : summary.rows) {
    os << std::left << std::setw(22) << row.param << std::right << std::fixed
       << std::setprecision(4) << std::setw(10) << row.truth << std::setw(11) << row.mean
       << std::setw(11) << row.bias << std::setw(10) << row.emp_sd << std::setw(10)
       << row.mean_se << std::setw(10) << std::setprecision(3) << row.coverage << '\n';
    os.unsetf(std::ios::fixed);
  }
  os << summary.used << " of " << summary.reps << " replications used";
  if (!summary.failures.empty()) {
    os << " (" << summary.failures.size() << " failed)";
  }
  os << '\n';
}

}  // namespace stratcox
