#include <benchmark/benchmark.h>

#include "stratcox/complete_case.hpp"
#include "stratcox/rng.hpp"
#include "stratcox/em.hpp"
#include "stratcox/monte_carlo.hpp"
#include "stratcox/simulate.hpp"
#include "stratcox/variance.hpp"

namespace {

stratcox::SimConfig bench_config(int n) {
  stratcox::SimConfig cfg;
  cfg.n = n;
  cfg.k_strata = 2;
  cfg.seed = 20260809;
  cfg.tau = 1.2;
  cfg.beta_true = Eigen::VectorXd(2);
  cfg.beta_true << 0.5, -0.5;
  cfg.gamma_true = Eigen::MatrixXd(1, 2);
  cfg.gamma_true << 0.4, -0.8;
  stratcox::BaselineSpec b1;
  b1.rate = 0.8;
  stratcox::BaselineSpec b2;
  b2.rate = 1.2;
  cfg.baselines = {b1, b2};
  stratcox::CovariateSpec xu;
  xu.low = -1.0;
  xu.high = 1.0;
  stratcox::CovariateSpec xb;
  xb.dist = stratcox::CovariateSpec::Dist::bernoulli;
  cfg.x_spec = {xu, xb};
  stratcox::CovariateSpec w1;
  w1.dist = stratcox::CovariateSpec::Dist::constant;
  stratcox::CovariateSpec w2;
  w2.dist = stratcox::CovariateSpec::Dist::uniform;
  w2.low = -1.0;
  w2.high = 1.0;
  cfg.w_spec = {w1, w2};
  cfg.censoring.model = stratcox::CensoringSpec::Model::exponential;
  cfg.censoring.rate = 0.25;
  cfg.missing_intercept = 0.85;
  cfg.missing_coef = Eigen::VectorXd(2);
  cfg.missing_coef << 0.0, -0.3;
  return cfg;
}

stratcox::Dataset bench_dataset(int n) {
  auto cfg = bench_config(n);
  for (int tries = 0; tries < 100; ++tries) {
    stratcox::Dataset d = stratcox::generate(cfg);
    if (stratcox::monitor(d).positivity_ok) return d;
    cfg.seed = stratcox::splitmix64(cfg.seed);
  }
  return stratcox::generate(cfg);
}

}  // namespace

static void BM_generate(benchmark::State& state) {
  auto cfg = bench_config(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(stratcox::generate(cfg));
    cfg.seed = stratcox::splitmix64(cfg.seed);
  }
}
BENCHMARK(BM_generate)->Arg(100)->Arg(1000);

static void BM_complete_case(benchmark::State& state) {
  const auto d = bench_dataset(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(stratcox::fit_complete_case(d));
  }
}
BENCHMARK(BM_complete_case)->Arg(100)->Arg(400);

static void BM_em_fit(benchmark::State& state) {
  const auto d = bench_dataset(static_cast<int>(state.range(0)));
  stratcox::FitConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stratcox::fit(d, cfg));
  }
}
BENCHMARK(BM_em_fit)->Unit(benchmark::kMillisecond)->Arg(100)->Arg(400);

static void BM_block_matrix(benchmark::State& state) {
  const auto d = bench_dataset(static_cast<int>(state.range(0)));
  const auto fr = stratcox::fit(d);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stratcox::build_block_matrix(fr.theta_hat, d));
  }
}
BENCHMARK(BM_block_matrix)->Unit(benchmark::kMillisecond)->Arg(100)->Arg(400);

static void BM_schur_variances(benchmark::State& state) {
  const auto d = bench_dataset(static_cast<int>(state.range(0)));
  const auto fr = stratcox::fit(d);
  const auto bm = stratcox::build_block_matrix(fr.theta_hat, d);
  for (auto _ : state) {
    benchmark::DoNotOptimize(stratcox::schur_variances(bm, fr.theta_hat, d));
  }
}
BENCHMARK(BM_schur_variances)->Unit(benchmark::kMillisecond)->Arg(100)->Arg(400);

BENCHMARK_MAIN();
