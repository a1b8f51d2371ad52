#include "stratcox/serialize.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "stratcox/errors.hpp"
#include "stratcox/version.hpp"

namespace stratcox {

using nlohmann::json;

namespace {

const json& require(const json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end()) {
    throw validation_error(std::string("config: missing field '") + key + "'");
  }
  return *it;
}

template <typename T>
T field(const json& j, const char* key) {
  try {
    return require(j, key).get<T>();
  } catch (const json::exception&) {
    throw validation_error(std::string("config: field '") + key + "' has the wrong type");
  }
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw validation_error(std::string("config: field '") + key + "' has the wrong type");
  }
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& j, const char* key) {
  if (!j.is_array()) {
    throw validation_error(std::string("config: field '") + key + "' must be an array");
  }
  Eigen::VectorXd out(j.size());
  Eigen::Index i = 0;
  for (const json& x : j) {
    if (!x.is_number()) {
      throw validation_error(std::string("config: field '") + key + "' must hold numbers");
    }
    out(i++) = x.get<double>();
  }
  return out;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.push_back(vector_to_json(m.row(r).transpose()));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* key, Eigen::Index cols_hint = -1) {
  if (!j.is_array()) {
    throw validation_error(std::string("config: field '") + key + "' must be an array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, std::max<Eigen::Index>(cols_hint, 0));
  Eigen::MatrixXd out;
  Eigen::Index r = 0;
  for (const json& row : j) {
    const Eigen::VectorXd v = vector_from_json(row, key);
    if (r == 0) out.resize(rows, v.size());
    if (v.size() != out.cols()) {
      throw validation_error(std::string("config: field '") + key + "' rows differ in length");
    }
    out.row(r++) = v.transpose();
  }
  return out;
}

}  // namespace

json params_to_json(const Params& params) {
  json baselines = json::array();
  for (std::size_t k = 0; k < params.baselines.size(); ++k) {
    const StepFunction& L = params.baselines[k];
    json jumps = json::array();
    for (std::size_t i = 0; i < L.size(); ++i) {
      jumps.push_back(json::array({L.jump_times()[i], L.jump_sizes()[i]}));
    }
    baselines.push_back(json{{"stratum", k + 1}, {"jumps", jumps}});
  }
  return json{{"beta", vector_to_json(params.beta)},
              {"gamma", matrix_to_json(params.gamma)},
              {"baselines", baselines}};
}

Params params_from_json(const json& j) {
  Params out;
  out.beta = vector_from_json(require(j, "beta"), "beta");
  out.gamma = matrix_from_json(require(j, "gamma"), "gamma");
  const json& baselines = require(j, "baselines");
  if (!baselines.is_array()) throw validation_error("config: field 'baselines' must be an array");
  for (const json& b : baselines) {
    const json& jumps = require(b, "jumps");
    std::vector<double> times;
    std::vector<double> sizes;
    for (const json& pair : jumps) {
      if (!pair.is_array() || pair.size() != 2) {
        throw validation_error("config: baseline jumps must be [time, size] pairs");
      }
      times.push_back(pair[0].get<double>());
      sizes.push_back(pair[1].get<double>());
    }
    out.baselines.emplace_back(std::move(times), std::move(sizes));
  }
  return out;
}

json fit_config_to_json(const FitConfig& cfg) {
  return json{{"max_em_iters", cfg.max_em_iters},
              {"em_tol", cfg.em_tol},
              {"param_tol", cfg.param_tol},
              {"newton_max_iters", cfg.newton_max_iters},
              {"newton_tol", cfg.newton_tol},
              {"coef_cap", cfg.coef_cap},
              {"score_residual_tol", cfg.score_residual_tol},
              {"init", cfg.init == FitConfig::Init::complete_case ? "complete_case"
                                                                  : "user_supplied"}};
}

FitConfig fit_config_from_json(const json& j) {
  FitConfig cfg;
  cfg.max_em_iters = field_or(j, "max_em_iters", cfg.max_em_iters);
  cfg.em_tol = field_or(j, "em_tol", cfg.em_tol);
  cfg.param_tol = field_or(j, "param_tol", cfg.param_tol);
  cfg.newton_max_iters = field_or(j, "newton_max_iters", cfg.newton_max_iters);
  cfg.newton_tol = field_or(j, "newton_tol", cfg.newton_tol);
  cfg.coef_cap = field_or(j, "coef_cap", cfg.coef_cap);
  cfg.score_residual_tol = field_or(j, "score_residual_tol", cfg.score_residual_tol);
  const std::string init = field_or<std::string>(j, "init", "complete_case");
  if (init == "complete_case") {
    cfg.init = FitConfig::Init::complete_case;
  } else if (init == "user_supplied") {
    cfg.init = FitConfig::Init::user_supplied;
  } else {
    throw validation_error("config: field 'init' must be complete_case or user_supplied");
  }
  validate_config(cfg);
  return cfg;
}

namespace {

json covariate_to_json(const CovariateSpec& s) {
  switch (s.dist) {
    case CovariateSpec::Dist::uniform:
      return json{{"dist", "uniform"}, {"low", s.low}, {"high", s.high}};
    case CovariateSpec::Dist::bernoulli:
      return json{{"dist", "bernoulli"}, {"p", s.prob}};
    case CovariateSpec::Dist::constant:
      return json{{"dist", "const"}, {"value", s.value}};
    case CovariateSpec::Dist::copy_w:
      return json{{"dist", "copy_w"}, {"index", s.index + 1}};
  }
  return {};
}

CovariateSpec covariate_from_json(const json& j, bool allow_copy) {
  CovariateSpec s;
  const auto dist = field<std::string>(j, "dist");
  if (dist == "uniform") {
    s.dist = CovariateSpec::Dist::uniform;
    s.low = field<double>(j, "low");
    s.high = field<double>(j, "high");
  } else if (dist == "bernoulli") {
    s.dist = CovariateSpec::Dist::bernoulli;
    s.prob = field<double>(j, "p");
  } else if (dist == "const") {
    s.dist = CovariateSpec::Dist::constant;
    s.value = field<double>(j, "value");
  } else if (dist == "copy_w" && allow_copy) {
    s.dist = CovariateSpec::Dist::copy_w;
    s.index = field<int>(j, "index") - 1;  // 1-based in files
  } else {
    throw validation_error("config: covariate dist '" + dist + "' not recognized");
  }
  return s;
}

json baseline_to_json(const BaselineSpec& b) {
  if (b.family == BaselineSpec::Family::exponential) {
    return json{{"family", "exponential"}, {"rate", b.rate}};
  }
  return json{{"family", "weibull"}, {"shape", b.shape}, {"scale", b.scale}};
}

BaselineSpec baseline_from_json(const json& j) {
  BaselineSpec b;
  const auto family = field<std::string>(j, "family");
  if (family == "exponential") {
    b.family = BaselineSpec::Family::exponential;
    b.rate = field<double>(j, "rate");
  } else if (family == "weibull") {
    b.family = BaselineSpec::Family::weibull;
    b.shape = field<double>(j, "shape");
    b.scale = field<double>(j, "scale");
  } else {
    throw validation_error("config: baseline family '" + family + "' not recognized");
  }
  return b;
}

}  // namespace

json sim_config_to_json(const SimConfig& cfg) {
  json x = json::array();
  for (const auto& s : cfg.x_spec) x.push_back(covariate_to_json(s));
  json w = json::array();
  for (const auto& s : cfg.w_spec) w.push_back(covariate_to_json(s));
  json baselines = json::array();
  for (const auto& b : cfg.baselines) baselines.push_back(baseline_to_json(b));

  json censoring;
  switch (cfg.censoring.model) {
    case CensoringSpec::Model::none: censoring = json{{"model", "none"}}; break;
    case CensoringSpec::Model::uniform:
      censoring = json{{"model", "uniform"}, {"max", cfg.censoring.max}};
      break;
    case CensoringSpec::Model::exponential:
      censoring = json{{"model", "exponential"}, {"rate", cfg.censoring.rate}};
      break;
  }
  return json{{"n", cfg.n},
              {"k_strata", cfg.k_strata},
              {"tau", cfg.tau},
              {"seed", cfg.seed},
              {"beta", vector_to_json(cfg.beta_true)},
              {"gamma", matrix_to_json(cfg.gamma_true)},
              {"baselines", baselines},
              {"x", x},
              {"w", w},
              {"censoring", censoring},
              {"missing", json{{"intercept", cfg.missing_intercept},
                               {"coef", vector_to_json(cfg.missing_coef)},
                               {"eps", cfg.missing_eps}}}};
}

SimConfig sim_config_from_json(const json& j) {
  SimConfig cfg;
  cfg.n = field<int>(j, "n");
  cfg.k_strata = field<int>(j, "k_strata");
  cfg.tau = field<double>(j, "tau");
  cfg.seed = field<std::uint64_t>(j, "seed");
  cfg.beta_true = vector_from_json(require(j, "beta"), "beta");
  for (const json& b : require(j, "baselines")) cfg.baselines.push_back(baseline_from_json(b));
  for (const json& s : require(j, "x")) cfg.x_spec.push_back(covariate_from_json(s, true));
  for (const json& s : require(j, "w")) cfg.w_spec.push_back(covariate_from_json(s, false));
  cfg.gamma_true = matrix_from_json(require(j, "gamma"), "gamma",
                                    static_cast<Eigen::Index>(cfg.w_spec.size()));

  const json& cen = require(j, "censoring");
  const auto model = field<std::string>(cen, "model");
  if (model == "none") {
    cfg.censoring.model = CensoringSpec::Model::none;
  } else if (model == "uniform") {
    cfg.censoring.model = CensoringSpec::Model::uniform;
    cfg.censoring.max = field<double>(cen, "max");
  } else if (model == "exponential") {
    cfg.censoring.model = CensoringSpec::Model::exponential;
    cfg.censoring.rate = field<double>(cen, "rate");
  } else {
    throw validation_error("config: censoring model '" + model + "' not recognized");
  }

  if (j.contains("missing")) {
    const json& mis = j.at("missing");
    cfg.missing_intercept = field<double>(mis, "intercept");
    cfg.missing_coef = mis.contains("coef")
                           ? vector_from_json(mis.at("coef"), "missing.coef")
                           : Eigen::VectorXd();
    cfg.missing_eps = field_or(mis, "eps", 0.0);
  }
  validate_sim_config(cfg);
  return cfg;
}

json mc_config_to_json(const McConfig& cfg) {
  json out{{"sim", sim_config_to_json(cfg.sim)},
           {"fit", fit_config_to_json(cfg.fit)},
           {"workers", cfg.workers}};
  if (!cfg.lambda_times.empty()) out["lambda_times"] = cfg.lambda_times;
  return out;
}

McConfig mc_config_from_json(const json& j) {
  McConfig cfg;
  cfg.sim = sim_config_from_json(require(j, "sim"));
  if (j.contains("fit")) cfg.fit = fit_config_from_json(j.at("fit"));
  if (j.contains("lambda_times")) {
    for (const json& t : j.at("lambda_times")) cfg.lambda_times.push_back(t.get<double>());
  }
  cfg.workers = field_or(j, "workers", 1);
  if (cfg.workers < 1) throw validation_error("config: field 'workers' must be >= 1");
  return cfg;
}

json fit_result_document(const FitResult& fit, const FitConfig& cfg, const Dataset& data,
                         const VarianceResult* variance, const std::vector<double>& lambda_grid) {
  json doc;
  doc["tool"] = json{{"name", "stratcox"}, {"version", kVersion}};
  doc["config"] = fit_config_to_json(cfg);
  doc["n"] = data.n();
  doc["p"] = data.p();
  doc["m"] = data.m();
  doc["k_strata"] = data.k_strata;
  doc["tau"] = data.tau;
  doc["converged"] = fit.converged;
  doc["em_iterations"] = fit.em_iterations;
  doc["loglik"] = fit.loglik_trace.empty() ? 0.0 : fit.loglik_trace.back();
  doc["loglik_trace"] = fit.loglik_trace;
  doc["warnings"] = fit.warnings;
  doc["score_residuals"] = fit.score_residuals;
  doc["score_lambda_time"] = fit.score_lambda_time;

  doc["estimates"] = params_to_json(fit.theta_hat);
  // baselines again as (time, jump, cumulative) rows for human consumption
  json tables = json::array();
  for (int k = 0; k < fit.theta_hat.k_strata(); ++k) {
    const StepFunction& L = fit.theta_hat.baselines[static_cast<std::size_t>(k)];
    json rows = json::array();
    for (std::size_t i = 0; i < L.size(); ++i) {
      rows.push_back(json::array(
          {L.jump_times()[i], L.jump_sizes()[i], L.cumulative()[i]}));
    }
    tables.push_back(json{{"stratum", k + 1}, {"rows", rows}});
  }
  doc["baseline_tables"] = tables;

  if (variance != nullptr) {
    json var;
    var["sigma_beta"] = matrix_to_json(variance->sigma_beta);
    var["sigma_gamma"] = matrix_to_json(variance->sigma_gamma);
    var["se_beta"] = vector_to_json(variance->se_beta);
    var["se_gamma"] = vector_to_json(variance->se_gamma);
    json lambda_tables = json::array();
    for (int k = 0; k < fit.theta_hat.k_strata(); ++k) {
      const StepFunction& L = fit.theta_hat.baselines[static_cast<std::size_t>(k)];
      json rows = json::array();
      for (const double t : lambda_grid) {
        const double v2 = v_squared(*variance, k, t);
        const double se = std::sqrt(std::max(v2, 0.0) / static_cast<double>(data.n()));
        rows.push_back(json::array({t, L.value(t), se}));
      }
      lambda_tables.push_back(json{{"stratum", k + 1}, {"rows", rows}});
    }
    var["lambda_tables"] = lambda_tables;
    var["diagnostics"] = json{{"sigma_beta_asymmetry", variance->diagnostics.sigma_beta_asymmetry},
                              {"sigma_gamma_asymmetry",
                               variance->diagnostics.sigma_gamma_asymmetry},
                              {"system_check_rel_err", variance->diagnostics.system_check_rel_err},
                              {"warnings", variance->diagnostics.warnings}};
    doc["variance"] = var;
  } else {
    doc["variance"] = nullptr;  // standard-error placeholder
  }
  return doc;
}

json mc_meta_document(const McConfig& cfg, const McSummary& summary) {
  json failures = json::array();
  for (const auto& [rep, reason] : summary.failures) {
    failures.push_back(json{{"replication", rep}, {"reason", reason}});
  }
  return json{{"tool", json{{"name", "stratcox"}, {"version", kVersion}}},
              {"config", mc_config_to_json(cfg)},
              {"seed", cfg.sim.seed},
              {"reps", summary.reps},
              {"used", summary.used},
              {"lambda_times", summary.lambda_times},
              {"failures", failures}};
}

}  // namespace stratcox
