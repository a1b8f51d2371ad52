#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <vector>

#include "oracles.hpp"
#include "stratcox/dataset.hpp"
#include "stratcox/em.hpp"
#include "stratcox/errors.hpp"
#include "stratcox/variance.hpp"

using stratcox::BlockMatrix;
using stratcox::Dataset;
using stratcox::FitResult;
using stratcox::Observation;
using stratcox::Params;
using stratcox::StepFunction;
using stratcox::VarianceResult;

namespace {

Observation obs(double time, int status, std::vector<double> x, std::vector<double> w,
                bool observed, int stratum_1based = 0) {
  Observation o;
  o.time = time;
  o.status = status;
  o.x = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  o.w = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  o.observed = observed;
  o.stratum = observed ? stratum_1based - 1 : -1;
  return o;
}

FitResult fitted(const Dataset& d) { return stratcox::fit(d, oracles::tight_fit_config()); }

}  // namespace

TEST_CASE("score kernels: psi vanishes for a censored subject with zero hazard") {
  std::vector<Observation> rows = {
      obs(0.5, 1, {0.2}, {1.0}, true, 1),
      obs(0.1, 0, {0.4}, {1.0}, true, 1),  // censored before the first jump
  };
  Dataset d = Dataset::from_observations(rows, 1);
  Params theta;
  theta.beta = Eigen::VectorXd(1);
  theta.beta << 0.7;
  theta.gamma = Eigen::MatrixXd::Zero(0, 1);
  theta.baselines = {StepFunction({0.5}, {0.3})};
  const stratcox::ScoreKernels kr = stratcox::score_kernels(theta, d);
  CHECK(kr.psi(1) == 0.0);
  // phi bounds and monotonicity in u
  for (double u = 0.05; u < 0.8; u += 0.05) {
    const double v = kr.phi(u, 0, 0);
    CHECK(v >= 0.0);
    CHECK(v <= kr.exp_bx(0));
    CHECK(kr.phi(u + 0.05, 0, 0) <= v);
  }
}

TEST_CASE("block matrix: micro-instance entries by hand") {
  // two subjects, K = 1, p = 1: event at 0.5 (x = 1), censored at 1.0 (x = 0.5)
  std::vector<Observation> rows = {
      obs(0.5, 1, {1.0}, {1.0}, true, 1),
      obs(1.0, 0, {0.5}, {1.0}, true, 1),
  };
  Dataset d = Dataset::from_observations(rows, 1);
  Params theta;
  theta.beta = Eigen::VectorXd(1);
  theta.beta << 0.2;
  theta.gamma = Eigen::MatrixXd::Zero(0, 1);
  theta.baselines = {StepFunction({0.5}, {0.4})};

  const BlockMatrix bm = stratcox::build_block_matrix(theta, d);
  REQUIRE(bm.dim() == 3);  // p=1, q=0, K*n=2

  const double e1 = std::exp(0.2);
  const double e2 = std::exp(0.1);
  const double psi1 = 1.0 - e1 * 0.4;
  const double psi2 = 0.0 - e2 * 0.4;
  // A^{beta beta} = 1/2 sum psi_i^2 x_i^2
  CHECK(bm.a(0, 0) ==
        doctest::Approx(0.5 * (psi1 * psi1 * 1.0 + psi2 * psi2 * 0.25)).epsilon(1e-14));
  // A^{beta Lambda}: column s gets 2/n x_s delta_s psi_s Q_s
  CHECK(bm.a(0, 1) == doctest::Approx(psi1).epsilon(1e-14));  // 2/2 * 1 * 1 * psi1
  CHECK(bm.a(0, 2) == 0.0);                                   // censored subject
  // A^{Lambda beta}: row r = -2/n sum_i x_i psi_i e^{bx_i} Y_i(T_r)
  CHECK(bm.a(1, 0) ==
        doctest::Approx(-(1.0 * psi1 * e1 + 0.5 * psi2 * e2)).epsilon(1e-14));
  CHECK(bm.a(2, 0) == doctest::Approx(-(0.5 * psi2 * e2)).epsilon(1e-14));
  // A^{Lambda Lambda} diagonal: 1/n sum_i Q^2 e^{bx_i} Y_i(T_r)
  CHECK(bm.a(1, 1) == doctest::Approx(0.5 * (e1 + e2)).epsilon(1e-14));
  CHECK(bm.a(2, 2) == doctest::Approx(0.5 * e2).epsilon(1e-14));
  CHECK(bm.a(1, 2) == 0.0);
  CHECK(bm.a(2, 1) == 0.0);
}

TEST_CASE("block matrix matches the per-entry brute-force oracle") {
  for (std::uint64_t seed : {101ull, 202ull}) {
    const int K = seed == 101 ? 2 : 3;
    Dataset d = oracles::valid_dataset(oracles::test_config(18, K, seed, 0.85));
    const FitResult fr = fitted(d);
    const BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, d);
    const Eigen::MatrixXd naive = oracles::naive_block_matrix(fr.theta_hat, d);
    REQUIRE(bm.a.rows() == naive.rows());
    CHECK((bm.a - naive).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("block matrix invariants: transpose relation and zero lower blocks") {
  Dataset d = oracles::valid_dataset(oracles::test_config(15, 2, 77, 0.4));
  const FitResult fr = fitted(d);
  const BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, d);

  // A^{gamma beta} == (A^{beta gamma})' exactly
  const Eigen::MatrixXd bg = bm.beta_gamma();
  const Eigen::MatrixXd gb = bm.gamma_beta();
  CHECK((gb - bg.transpose()).cwiseAbs().maxCoeff() == 0.0);

  // A^{Lambda_k Lambda_j} == 0 for j < k
  const Eigen::Index n = d.n();
  const Eigen::MatrixXd lower =
      bm.a.block(bm.lambda_offset(1), bm.lambda_offset(0), n, n);
  CHECK(lower.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("block matrix: K = 1 has a diagonal Lambda block") {
  auto cfg = oracles::full_data_config(10, 1, 5);
  Dataset d = oracles::valid_dataset(cfg);
  const FitResult fr = fitted(d);
  const BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, d);
  const Eigen::Index n = d.n();
  const Eigen::MatrixXd ll = bm.lambda_lambda();
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index s = 0; s < n; ++s) {
      if (r != s) CHECK(ll(r, s) == 0.0);
    }
  }
  CHECK(ll.diagonal().minCoeff() > 0.0);
}

TEST_CASE("determinism: identical inputs give bit-identical matrices") {
  Dataset d = oracles::valid_dataset(oracles::test_config(15, 2, 88, 0.5));
  const FitResult fr = fitted(d);
  const BlockMatrix a = stratcox::build_block_matrix(fr.theta_hat, d);
  const BlockMatrix b = stratcox::build_block_matrix(fr.theta_hat, d);
  REQUIRE(a.a.size() == b.a.size());
  CHECK(std::memcmp(a.a.data(), b.a.data(),
                    sizeof(double) * static_cast<std::size_t>(a.a.size())) == 0);
}

TEST_CASE("schur variances agree with the full inverse of A_n") {
  int done = 0;
  std::uint64_t seed = 4000;
  while (done < 3) {
    Dataset d;
    try {
      d = oracles::valid_dataset(oracles::test_config(20, 2, seed++, 0.6), 50);
    } catch (...) {
      continue;
    }
    const FitResult fr = fitted(d);
    if (!fr.converged) continue;
    const BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, d);
    const VarianceResult vr = stratcox::schur_variances(bm, fr.theta_hat, d);

    const Eigen::MatrixXd full_inv = bm.a.fullPivLu().inverse();
    const int p = bm.p;
    const int q = bm.q;
    const Eigen::Index kn = static_cast<Eigen::Index>(bm.k_strata) * bm.n;

    const Eigen::MatrixXd sb_ref = full_inv.block(0, 0, p, p);
    CHECK((vr.sigma_beta - sb_ref).cwiseAbs().maxCoeff() /
              sb_ref.cwiseAbs().maxCoeff() <
          1e-8);
    const Eigen::MatrixXd sg_ref = full_inv.block(p, p, q, q);
    CHECK((vr.sigma_gamma - sg_ref).cwiseAbs().maxCoeff() /
              sg_ref.cwiseAbs().maxCoeff() <
          1e-8);
    const Eigen::MatrixXd sl_ref = full_inv.block(p + q, p + q, kn, kn);
    CHECK((vr.sigma_lambda - sl_ref).cwiseAbs().maxCoeff() /
              sl_ref.cwiseAbs().maxCoeff() <
          1e-8);

    // v^2 via the stored Sigma_Lambda vs the full-inverse block
    const double t = d.time.mean();
    for (int j = 0; j < d.k_strata; ++j) {
      Eigen::VectorXd xi = Eigen::VectorXd::Zero(kn);
      Eigen::VectorXd u = Eigen::VectorXd::Zero(kn);
      for (Eigen::Index i = 0; i < d.n(); ++i) {
        if (d.time(i) <= t) {
          xi(j * d.n() + i) = vr.jump_at_t(i, j);
          u(j * d.n() + i) = 1.0;
        }
      }
      const double ref = xi.dot(sl_ref * u);
      const double got = stratcox::v_squared(vr, j, t);
      CHECK(got == doctest::Approx(ref).epsilon(1e-8));
    }

    // the built-in system diagnostic measures the same equivalence
    CHECK(vr.diagnostics.system_check_rel_err < 1e-8);
    ++done;
  }
}

TEST_CASE("schur variances: K = 1 collapses to the two-block formula") {
  Dataset d = oracles::valid_dataset(oracles::full_data_config(12, 1, 9));
  const FitResult fr = fitted(d);
  const BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, d);
  const VarianceResult vr = stratcox::schur_variances(bm, fr.theta_hat, d);
  const Eigen::MatrixXd abb = bm.beta_beta();
  const Eigen::MatrixXd abl = bm.beta_lambda();
  const Eigen::MatrixXd alb = bm.lambda_beta();
  const Eigen::MatrixXd all = bm.lambda_lambda();
  const Eigen::MatrixXd expected =
      (abb - abl * all.partialPivLu().solve(alb)).inverse();
  CHECK((vr.sigma_beta - expected).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(vr.sigma_gamma.size() == 0);
}

TEST_CASE("v_squared: domain checks and the zero-before-first-jump rule") {
  Dataset d = oracles::valid_dataset(oracles::test_config(15, 2, 66, 0.7));
  const FitResult fr = fitted(d);
  const BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, d);
  const VarianceResult vr = stratcox::schur_variances(bm, fr.theta_hat, d);

  CHECK_THROWS_AS(stratcox::v_squared(vr, 0, 0.0), stratcox::validation_error);
  CHECK_THROWS_AS(stratcox::v_squared(vr, 0, d.tau), stratcox::validation_error);
  CHECK_THROWS_AS(stratcox::v_squared(vr, 5, 0.5), stratcox::validation_error);

  for (int j = 0; j < d.k_strata; ++j) {
    const double first = fr.theta_hat.baselines[static_cast<std::size_t>(j)].jump_times().front();
    // below the first jump of Lambda_j (and of every observation time) the
    // Xi vector is empty
    const double t = std::min(first, d.time.minCoeff()) * 0.5;
    if (t > 0.0) CHECK(stratcox::v_squared(vr, j, t) == 0.0);
  }
}

TEST_CASE("v_squared micro-instance: scalar product by hand") {
  std::vector<Observation> rows = {
      obs(0.3, 1, {0.5}, {1.0}, true, 1),
      obs(0.6, 1, {-0.5}, {1.0}, true, 1),
      obs(1.0, 0, {0.0}, {1.0}, true, 1),
  };
  Dataset d = Dataset::from_observations(rows, 1);
  const FitResult fr = fitted(d);
  const BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, d);
  const VarianceResult vr = stratcox::schur_variances(bm, fr.theta_hat, d);

  const double t = 0.7;  // covers both events
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
  const StepFunction& L = fr.theta_hat.baselines[0];
  xi(0) = L.jump_at(0.3);
  xi(1) = L.jump_at(0.6);
  u(0) = 1.0;
  u(1) = 1.0;
  double expected = 0.0;
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) expected += xi(a) * vr.sigma_lambda(a, b) * u(b);
  }
  CHECK(stratcox::v_squared(vr, 0, t) == doctest::Approx(expected).epsilon(1e-12));
}
