#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "oracles.hpp"
#include "stratcox/csv.hpp"
#include "stratcox/dataset.hpp"
#include "stratcox/errors.hpp"
#include "stratcox/monte_carlo.hpp"
#include "stratcox/simulate.hpp"

using stratcox::Dataset;
using stratcox::SimConfig;
using stratcox::SimMonitor;

TEST_CASE("generator contracts: ranges, missingness pattern, determinism") {
  SimConfig cfg = oracles::test_config(500, 2, 42, 0.6);
  const Dataset a = stratcox::generate(cfg);
  const Dataset b = stratcox::generate(cfg);

  std::ostringstream sa;
  std::ostringstream sb;
  stratcox::write_dataset_csv(a, sa);
  stratcox::write_dataset_csv(b, sb);
  CHECK(sa.str() == sb.str());  // byte-identical for a fixed seed

  int missing = 0;
  for (Eigen::Index i = 0; i < a.n(); ++i) {
    CHECK(a.time(i) >= 0.0);
    CHECK(a.time(i) <= cfg.tau);
    CHECK((a.status(i) == 0 || a.status(i) == 1));
    CHECK((a.observed(i) == 1) == (a.stratum(i) >= 0));
    if (a.observed(i) == 0) ++missing;
    // covariates within declared bounds
    CHECK(a.x(i, 0) >= -1.0);
    CHECK(a.x(i, 0) <= 1.0);
    CHECK((a.x(i, 1) == 0.0 || a.x(i, 1) == 1.0));
    CHECK(a.w(i, 0) == 1.0);
    CHECK(std::abs(a.w(i, 1)) <= 1.0);
  }
  CHECK(missing > 0);

  // different seed, different draw
  cfg.seed = 43;
  const Dataset c = stratcox::generate(cfg);
  std::ostringstream sc;
  stratcox::write_dataset_csv(c, sc);
  CHECK(sc.str() != sa.str());
}

TEST_CASE("no missingness when P(R=1) is forced to 1") {
  SimConfig cfg = oracles::full_data_config(200, 2, 7);
  const Dataset d = stratcox::generate(cfg);
  for (Eigen::Index i = 0; i < d.n(); ++i) CHECK(d.observed(i) == 1);
}

TEST_CASE("intercept-only stratum model hits the binomial target") {
  // P(S = 1) = 0.6 via gamma = logit(0.6) on the intercept column
  SimConfig cfg = oracles::full_data_config(5000, 2, 99);
  cfg.gamma_true(0, 0) = std::log(0.6 / 0.4);
  cfg.gamma_true(0, 1) = 0.0;
  const Dataset d = stratcox::generate(cfg);
  int s1 = 0;
  for (Eigen::Index i = 0; i < d.n(); ++i) s1 += d.stratum(i) == 0 ? 1 : 0;
  const double freq = static_cast<double>(s1) / static_cast<double>(d.n());
  CHECK(std::abs(freq - 0.6) <= 3.0 * std::sqrt(0.24 / 5000.0));
}

TEST_CASE("exponential baseline with no censoring has mean 1 event times") {
  SimConfig cfg;
  cfg.n = 5000;
  cfg.k_strata = 1;
  cfg.seed = 1234;
  cfg.tau = 60.0;
  cfg.beta_true = Eigen::VectorXd::Zero(1);
  cfg.gamma_true = Eigen::MatrixXd::Zero(0, 1);
  stratcox::BaselineSpec b;
  b.rate = 1.0;
  cfg.baselines = {b};
  stratcox::CovariateSpec x;
  x.low = -1.0;
  x.high = 1.0;
  cfg.x_spec = {x};
  stratcox::CovariateSpec w;
  w.dist = stratcox::CovariateSpec::Dist::constant;
  cfg.w_spec = {w};
  cfg.censoring.model = stratcox::CensoringSpec::Model::none;
  cfg.missing_intercept = 30.0;
  const Dataset d = stratcox::generate(cfg);
  double sum = 0.0;
  int events = 0;
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    sum += d.time(i);
    events += d.status(i);
  }
  CHECK(events == 5000);  // tau = 60 truncates nothing in practice
  CHECK(std::abs(sum / 5000.0 - 1.0) <= 3.0 / std::sqrt(5000.0));
}

TEST_CASE("X can share a W component") {
  SimConfig cfg = oracles::test_config(50, 2, 77, 0.7);
  stratcox::CovariateSpec shared;
  shared.dist = stratcox::CovariateSpec::Dist::copy_w;
  shared.index = 1;
  cfg.x_spec.push_back(shared);
  cfg.beta_true.conservativeResize(3);
  cfg.beta_true(2) = 0.2;
  const Dataset d = stratcox::generate(cfg);
  for (Eigen::Index i = 0; i < d.n(); ++i) CHECK(d.x(i, 2) == d.w(i, 1));
}

TEST_CASE("MAR by construction: R independent of S within W cells") {
  // discretize W by the sign of its uniform component, compare R rates by
  // stratum within each cell via a chi-square statistic (flaky-tolerant:
  // fixed seed, generous critical value)
  SimConfig cfg = oracles::test_config(8000, 2, 2718, 0.5);
  const Dataset d0 = stratcox::generate(cfg);
  // need the true strata: regenerate with no missingness and identical seed
  // so the draws match, then use d0's R pattern
  SimConfig full = cfg;
  full.missing_intercept = 30.0;
  full.missing_coef.setZero();
  const Dataset dt = stratcox::generate(full);

  double chi2 = 0.0;
  int df = 0;
  for (int cell = 0; cell < 2; ++cell) {
    double count[2][2] = {{0, 0}, {0, 0}};
    for (Eigen::Index i = 0; i < d0.n(); ++i) {
      if ((d0.w(i, 1) >= 0.0) != (cell == 1)) continue;
      const int s = dt.stratum(i);
      const int r = d0.observed(i);
      count[s][r] += 1.0;
    }
    const double total = count[0][0] + count[0][1] + count[1][0] + count[1][1];
    for (int s = 0; s < 2; ++s) {
      for (int r = 0; r < 2; ++r) {
        const double row = count[s][0] + count[s][1];
        const double col = count[0][r] + count[1][r];
        const double expected = row * col / total;
        chi2 += (count[s][r] - expected) * (count[s][r] - expected) / expected;
      }
    }
    df += 1;
  }
  // chi-square(2) 0.999 quantile is 13.8
  CHECK(chi2 < 13.8);
}

TEST_CASE("inverse transform: Nelson-Aalen tracks the true cumulative hazard") {
  auto run = [&](int n) {
    SimConfig cfg;
    cfg.n = n;
    cfg.k_strata = 2;
    cfg.seed = 31415;
    cfg.tau = 50.0;
    cfg.beta_true = Eigen::VectorXd::Zero(1);
    cfg.gamma_true = Eigen::MatrixXd::Zero(1, 1);
    stratcox::BaselineSpec b1;
    b1.rate = 1.0;
    stratcox::BaselineSpec b2;
    b2.family = stratcox::BaselineSpec::Family::weibull;
    b2.shape = 1.5;
    b2.scale = 1.0;
    cfg.baselines = {b1, b2};
    stratcox::CovariateSpec x;
    cfg.x_spec = {x};
    stratcox::CovariateSpec w;
    w.dist = stratcox::CovariateSpec::Dist::constant;
    cfg.w_spec = {w};
    cfg.censoring.model = stratcox::CensoringSpec::Model::none;
    cfg.missing_intercept = 30.0;
    const Dataset d = stratcox::generate(cfg);

    double worst = 0.0;
    for (int k = 0; k < 2; ++k) {
      std::vector<double> times;
      for (Eigen::Index i = 0; i < d.n(); ++i) {
        if (d.stratum(i) == k) times.push_back(d.time(i));
      }
      std::sort(times.begin(), times.end());
      // Nelson-Aalen on the uncensored sample, compared on [0, 1.2]
      double na = 0.0;
      std::size_t at_risk = times.size();
      for (const double t : times) {
        na += 1.0 / static_cast<double>(at_risk);
        --at_risk;
        if (t > 1.2) break;
        const double truth = cfg.baselines[static_cast<std::size_t>(k)].cumulative(t);
        worst = std::max(worst, std::abs(na - truth));
      }
    }
    return worst;
  };
  const double d3 = run(1000);
  const double d4 = run(10000);
  CHECK(d4 < d3);
  CHECK(d4 < 0.1);
}

TEST_CASE("monitor reports positivity failures") {
  SimConfig cfg = oracles::test_config(12, 2, 5, 0.85);
  int saw_failure = 0;
  int saw_ok = 0;
  for (std::uint64_t s = 0; s < 60; ++s) {
    cfg.seed = 1000 + s;
    const Dataset d = stratcox::generate(cfg);
    const SimMonitor mon = stratcox::monitor(d);
    (mon.positivity_ok ? saw_ok : saw_failure) += 1;
  }
  CHECK(saw_failure > 0);  // n = 12 cannot always cover both strata at tau
  CHECK(saw_ok > 0);
}

TEST_CASE("run_monte_carlo: deterministic, in-range coverage, null-model bias") {
  stratcox::McConfig mc;
  mc.sim = oracles::test_config(120, 2, 9090, 1.2);
  mc.sim.beta_true << 0.0, 0.0;  // null model
  mc.fit = stratcox::FitConfig{};
  mc.fit.em_tol = 1e-10;
  mc.fit.param_tol = 1e-7;
  mc.workers = 2;

  const stratcox::McSummary s1 = stratcox::run_monte_carlo(mc, 16);
  const stratcox::McSummary s2 = stratcox::run_monte_carlo(mc, 16);
  std::ostringstream c1;
  std::ostringstream c2;
  stratcox::write_summary_csv(s1, c1);
  stratcox::write_summary_csv(s2, c2);
  CHECK(c1.str() == c2.str());  // bit-identical summaries, threaded run

  for (const auto& row : s1.rows) {
    CHECK(row.coverage >= 0.0);
    CHECK(row.coverage <= 1.0);
  }
  // null-model symmetry: mean(beta_hat) within 3 SD/sqrt(reps) of 0
  for (int c = 0; c < 2; ++c) {
    const auto& row = s1.rows[static_cast<std::size_t>(c)];
    CHECK(std::abs(row.mean) <=
          3.0 * row.emp_sd / std::sqrt(static_cast<double>(s1.used)) + 1e-12);
  }
  CHECK(s1.lambda_times.size() == 3);

  CHECK_THROWS_AS(stratcox::run_monte_carlo(mc, 1), stratcox::validation_error);
}
