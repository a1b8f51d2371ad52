#include "stratcox/variance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "stratcox/em.hpp"
#include "stratcox/errors.hpp"
#include "stratcox/model.hpp"

namespace stratcox {

namespace {

constexpr double kRcondFail = 1e-15;
constexpr double kRcondWarn = 1e-10;

// Suffix sums over the risk set: query(t) = sum of rows with T_i >= t.
class RiskSums {
 public:
  RiskSums(const Eigen::VectorXd& time, const Eigen::MatrixXd& rows) {
    const Eigen::Index n = time.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return time(a) < time(b); });
    sorted_times_.resize(static_cast<std::size_t>(n));
    suffix_ = Eigen::MatrixXd::Zero(n + 1, rows.cols());
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      suffix_.row(i) = suffix_.row(i + 1) + rows.row(order[static_cast<std::size_t>(i)]);
      sorted_times_[static_cast<std::size_t>(i)] = time(order[static_cast<std::size_t>(i)]);
    }
  }

  Eigen::RowVectorXd at(double t) const {
    const auto it = std::lower_bound(sorted_times_.begin(), sorted_times_.end(), t);
    return suffix_.row(it - sorted_times_.begin());
  }

 private:
  std::vector<double> sorted_times_;
  Eigen::MatrixXd suffix_;
};

struct CheckedLU {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  double rcond = 1.0;
};

CheckedLU checked_lu(const Eigen::MatrixXd& mat, const std::string& name,
                     std::vector<std::string>& warnings) {
  CheckedLU out;
  if (mat.rows() == 0) return out;
  out.lu.compute(mat);
  out.rcond = out.lu.rcond();
  if (!(out.rcond > kRcondFail)) {
    throw linalg_error("variance: block " + name + " is numerically singular");
  }
  if (out.rcond < kRcondWarn) {
    std::ostringstream os;
    os << "block " << name << " is ill-conditioned (rcond estimate " << out.rcond << ")";
    warnings.push_back(os.str());
  }
  return out;
}

// B - C * lu^{-1} * D with empty-block shortcuts.
Eigen::MatrixXd knockout(const Eigen::MatrixXd& b, const Eigen::MatrixXd& c,
                         const CheckedLU& lu, const Eigen::MatrixXd& d) {
  if (c.cols() == 0 || d.rows() == 0) return b;
  return b - c * lu.lu.solve(d);
}

}  // namespace

ScoreKernels score_kernels(const Params& theta_hat, const Dataset& data) {
  const Eigen::Index n = data.n();
  const int K = data.k_strata;
  const int q = (K - 1) * data.m();
  const Eigen::Index m = data.m();

  ScoreKernels kr;
  kr.weights = e_step(theta_hat, data);
  kr.time = data.time;
  kr.exp_bx.resize(n);
  kr.lambda_at_t.resize(n, K);
  kr.jump_at_t.resize(n, K);
  kr.psi.resize(n);
  kr.s_gamma.resize(n, q);

  for (Eigen::Index i = 0; i < n; ++i) {
    kr.exp_bx(i) =
        theta_hat.beta.size() > 0 ? std::exp(theta_hat.beta.dot(data.x.row(i))) : 1.0;
    const double t = data.time(i);
    double mix = 0.0;
    for (int k = 0; k < K; ++k) {
      const StepFunction& L = theta_hat.baselines[static_cast<std::size_t>(k)];
      kr.lambda_at_t(i, k) = L.value(t);
      kr.jump_at_t(i, k) = L.jump_at(t);
      mix += kr.weights(i, k) * kr.lambda_at_t(i, k);
    }
    kr.psi(i) = data.status(i) - kr.exp_bx(i) * mix;
    if (q > 0) {
      const Eigen::VectorXd pi = stratum_probs(theta_hat.gamma, data.w.row(i).transpose());
      for (int k = 0; k < K - 1; ++k) {
        kr.s_gamma.row(i).segment(k * m, m) =
            (kr.weights(i, k) - pi(k)) * data.w.row(i);
      }
    }
  }
  return kr;
}

BlockMatrix build_block_matrix(const Params& theta_hat, const Dataset& data) {
  const Eigen::Index n = data.n();
  const int K = data.k_strata;
  const int p = data.p();
  const int q = (K - 1) * data.m();
  const double inv_n = 1.0 / static_cast<double>(n);

  const ScoreKernels kr = score_kernels(theta_hat, data);

  BlockMatrix bm;
  bm.p = p;
  bm.q = q;
  bm.k_strata = K;
  bm.n = n;
  bm.a = Eigen::MatrixXd::Zero(bm.dim(), bm.dim());

  // finite-dimensional corner: outer products of the per-subject scores
  for (Eigen::Index i = 0; i < n; ++i) {
    const double psi = kr.psi(i);
    if (p > 0) {
      bm.a.block(0, 0, p, p).noalias() +=
          inv_n * psi * psi * data.x.row(i).transpose() * data.x.row(i);
      if (q > 0) {
        bm.a.block(0, p, p, q).noalias() +=
            inv_n * psi * data.x.row(i).transpose() * kr.s_gamma.row(i);
      }
    }
    if (q > 0) {
      bm.a.block(p, p, q, q).noalias() +=
          inv_n * kr.s_gamma.row(i).transpose() * kr.s_gamma.row(i);
    }
  }
  if (p > 0 && q > 0) {
    bm.a.block(p, 0, q, p) = bm.a.block(0, p, p, q).transpose();
  }

  for (int k = 0; k < K; ++k) {
    const Eigen::Index off = bm.lambda_offset(k);

    // columns: 2/n X_s Delta_s psi_s Q_sk and 2/n S_gamma_s Delta_s Q_sk
    for (Eigen::Index s = 0; s < n; ++s) {
      if (data.status(s) != 1) continue;
      const double c = 2.0 * inv_n * kr.weights(s, k);
      if (c == 0.0) continue;
      if (p > 0) bm.a.block(0, off + s, p, 1) = c * kr.psi(s) * data.x.row(s).transpose();
      if (q > 0) bm.a.block(p, off + s, q, 1) = c * kr.s_gamma.row(s).transpose();
    }

    // rows: -2/n sums over the risk set at T_r
    Eigen::MatrixXd xrows(n, p);
    Eigen::MatrixXd grows(n, q);
    Eigen::MatrixXd drow(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double qe = kr.weights(i, k) * kr.exp_bx(i);
      if (p > 0) xrows.row(i) = 2.0 * kr.psi(i) * qe * data.x.row(i);
      if (q > 0) grows.row(i) = 2.0 * qe * kr.s_gamma.row(i);
      drow(i, 0) = kr.weights(i, k) * qe;  // Q_ik * phi(., i, k)
    }
    const RiskSums xsums(data.time, xrows);
    const RiskSums gsums(data.time, grows);
    const RiskSums dsums(data.time, drow);
    for (Eigen::Index r = 0; r < n; ++r) {
      const double t_r = data.time(r);
      if (p > 0) bm.a.block(off + r, 0, 1, p) = -inv_n * xsums.at(t_r);
      if (q > 0) bm.a.block(off + r, p, 1, q) = -inv_n * gsums.at(t_r);
      bm.a(off + r, off + r) = inv_n * dsums.at(t_r)(0);
    }

    // cross blocks j > k
    for (int j = k + 1; j < K; ++j) {
      const Eigen::Index joff = bm.lambda_offset(j);
      Eigen::MatrixXd pair(n, 2);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double base = kr.weights(i, k) * kr.weights(i, j) * kr.exp_bx(i);
        pair(i, 0) = base;                 // for the shared-jump diagonal term
        pair(i, 1) = base * kr.exp_bx(i);  // carries the extra e^{beta'X_i}
      }
      const RiskSums pair_sums(data.time, pair);
      for (Eigen::Index s = 0; s < n; ++s) {
        const double t_s = data.time(s);
        const Eigen::RowVectorXd sums = pair_sums.at(t_s);
        const double diag_v = 2.0 * inv_n * sums(0);
        const double jump_v = 2.0 * inv_n * kr.jump_at_t(s, j) * sums(1);
        const double event_v =
            2.0 * inv_n * kr.weights(s, k) * kr.exp_bx(s) * kr.weights(s, j) * data.status(s);
        for (Eigen::Index r = 0; r < n; ++r) {
          double v = 0.0;
          if (r == s) v += diag_v;
          if (t_s > data.time(r)) v += jump_v;
          if (t_s >= data.time(r)) v -= event_v;  // phi(T_r, O_s, k) carries Y_s(T_r)
          if (v != 0.0) bm.a(off + r, joff + s) = v;
        }
      }
    }
  }
  return bm;
}

VarianceResult schur_variances(const BlockMatrix& bm, const Params& theta_hat,
                               const Dataset& data) {
  const int p = bm.p;
  const int q = bm.q;
  const double n = static_cast<double>(bm.n);

  VarianceResult out;
  out.n = bm.n;
  out.k_strata = bm.k_strata;
  out.tau = data.tau;
  out.time = data.time;
  const ScoreKernels kr = score_kernels(theta_hat, data);
  out.jump_at_t = kr.jump_at_t;

  const Eigen::MatrixXd abb = bm.beta_beta();
  const Eigen::MatrixXd abg = bm.beta_gamma();
  const Eigen::MatrixXd agb = bm.gamma_beta();
  const Eigen::MatrixXd agg = bm.gamma_gamma();
  const Eigen::MatrixXd abl = bm.beta_lambda();
  const Eigen::MatrixXd agl = bm.gamma_lambda();
  const Eigen::MatrixXd alb = bm.lambda_beta();
  const Eigen::MatrixXd alg = bm.lambda_gamma();
  const Eigen::MatrixXd all = bm.lambda_lambda();

  auto& warnings = out.diagnostics.warnings;

  // Sigma_beta = {Abb - Abg Agg^-1 Agb
  //               - (AbL - Abg Agg^-1 AgL)(ALL - ALg Agg^-1 AgL)^-1 (ALb - ALg Agg^-1 Agb)}^-1
  const CheckedLU lu_gg = checked_lu(agg, "A^{gamma gamma}", warnings);
  if (p > 0) {
    const Eigen::MatrixXd t1 = knockout(abb, abg, lu_gg, agb);
    const Eigen::MatrixXd u1 = knockout(abl, abg, lu_gg, agl);
    const Eigen::MatrixXd v1 = knockout(alb, alg, lu_gg, agb);
    const Eigen::MatrixXd s1 = knockout(all, alg, lu_gg, agl);
    const CheckedLU lu_s1 =
        checked_lu(s1, "A^{Lambda Lambda} - A^{Lambda gamma}(A^{gamma gamma})^-1 A^{gamma Lambda}",
                   warnings);
    const Eigen::MatrixXd m1 = t1 - u1 * lu_s1.lu.solve(v1);
    out.sigma_beta = checked_lu(m1, "Sigma_beta inner matrix", warnings).lu.inverse();
  } else {
    out.sigma_beta.resize(0, 0);
  }

  const CheckedLU lu_bb = checked_lu(abb, "A^{beta beta}", warnings);
  const Eigen::MatrixXd t2 = knockout(agg, agb, lu_bb, abg);
  const Eigen::MatrixXd u2 = knockout(agl, agb, lu_bb, abl);
  const Eigen::MatrixXd v2 = knockout(alg, alb, lu_bb, abg);
  const Eigen::MatrixXd s2 = knockout(all, alb, lu_bb, abl);

  if (q > 0) {
    const CheckedLU lu_s2 = checked_lu(
        s2, "A^{Lambda Lambda} - A^{Lambda beta}(A^{beta beta})^-1 A^{beta Lambda}", warnings);
    const Eigen::MatrixXd m2 = t2 - u2 * lu_s2.lu.solve(v2);
    out.sigma_gamma = checked_lu(m2, "Sigma_gamma inner matrix", warnings).lu.inverse();
  } else {
    out.sigma_gamma.resize(0, 0);
  }

  Eigen::MatrixXd m3 = s2;
  if (q > 0) {
    const CheckedLU lu_t2 =
        checked_lu(t2, "A^{gamma gamma} - A^{gamma beta}(A^{beta beta})^-1 A^{beta gamma}",
                   warnings);
    m3 -= v2 * lu_t2.lu.solve(u2);
  }
  out.sigma_lambda = checked_lu(m3, "Sigma_Lambda inner matrix", warnings).lu.inverse();

  out.se_beta.resize(p);
  for (int r = 0; r < p; ++r) {
    const double v = out.sigma_beta(r, r);
    out.se_beta(r) = v >= 0.0 ? std::sqrt(v / n) : std::numeric_limits<double>::quiet_NaN();
    if (v < 0.0) warnings.push_back("negative variance estimate for beta[" +
                                    std::to_string(r + 1) + "]");
  }
  out.se_gamma.resize(q);
  for (int s = 0; s < q; ++s) {
    const double v = out.sigma_gamma(s, s);
    out.se_gamma(s) = v >= 0.0 ? std::sqrt(v / n) : std::numeric_limits<double>::quiet_NaN();
    if (v < 0.0) warnings.push_back("negative variance estimate for gamma[" +
                                    std::to_string(s + 1) + "]");
  }

  if (p > 0) {
    out.diagnostics.sigma_beta_asymmetry =
        (out.sigma_beta - out.sigma_beta.transpose()).cwiseAbs().maxCoeff();
  }
  if (q > 0) {
    out.diagnostics.sigma_gamma_asymmetry =
        (out.sigma_gamma - out.sigma_gamma.transpose()).cwiseAbs().maxCoeff();
  }

  // Diagnostic: Sigma_beta h must solve A_n (h_beta; h_gamma; h_Lambda) = (h; 0; 0).
  if (p > 0) {
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_full(bm.a);
    const double rc = lu_full.rcond();
    if (rc > kRcondFail) {
      double err = 0.0;
      for (int r = 0; r < p; ++r) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(bm.dim());
        rhs(r) = 1.0;
        const Eigen::VectorXd sol = lu_full.solve(rhs);
        const Eigen::VectorXd ref = out.sigma_beta.col(r);
        err = std::max(err, (sol.head(p) - ref).lpNorm<Eigen::Infinity>() /
                                (ref.lpNorm<Eigen::Infinity>() + 1e-30));
      }
      out.diagnostics.system_check_rel_err = err;
    } else {
      warnings.push_back("full A_n matrix numerically singular; system diagnostic skipped");
    }
  }
  return out;
}

double v_squared(const VarianceResult& result, int j, double t) {
  if (j < 0 || j >= result.k_strata) {
    throw validation_error("v_squared: stratum index out of range");
  }
  if (!(t > 0.0) || !(t < result.tau)) {
    throw validation_error("v_squared: t must lie in (0, tau)");
  }
  const Eigen::Index n = result.n;
  const Eigen::Index kn = static_cast<Eigen::Index>(result.k_strata) * n;
  Eigen::VectorXd xi = Eigen::VectorXd::Zero(kn);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(kn);
  const Eigen::Index off = static_cast<Eigen::Index>(j) * n;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (result.time(i) <= t) {
      xi(off + i) = result.jump_at_t(i, j);
      u(off + i) = 1.0;
    }
  }
  return xi.dot(result.sigma_lambda * u);
}

}  // namespace stratcox
