#pragma once

#include <nlohmann/json.hpp>
#include <vector>

#include "stratcox/dataset.hpp"
#include "stratcox/em.hpp"
#include "stratcox/monte_carlo.hpp"
#include "stratcox/params.hpp"
#include "stratcox/simulate.hpp"
#include "stratcox/variance.hpp"

namespace stratcox {

// JSON round trips for the structured text documents. Keys are emitted in
// alphabetical order and doubles with shortest round-trip precision, so a
// document serializes byte-identically for identical values. Field errors
// raise validation_error naming the offending key.

nlohmann::json params_to_json(const Params& params);
Params params_from_json(const nlohmann::json& j);

nlohmann::json fit_config_to_json(const FitConfig& cfg);
FitConfig fit_config_from_json(const nlohmann::json& j);

nlohmann::json sim_config_to_json(const SimConfig& cfg);
SimConfig sim_config_from_json(const nlohmann::json& j);

nlohmann::json mc_config_to_json(const McConfig& cfg);
McConfig mc_config_from_json(const nlohmann::json& j);

// Fit document: tool version, resolved config, estimates with SE columns,
// log-likelihood trace, per-stratum baselines as (time, jump, cumulative)
// rows, score residuals, and (when present) the variance tables
// (t, Lambda_j(t), SE) on the given grid.
nlohmann::json fit_result_document(const FitResult& fit, const FitConfig& cfg,
                                   const Dataset& data, const VarianceResult* variance,
                                   const std::vector<double>& lambda_grid);

// Study provenance document written next to the Monte Carlo summary CSV.
nlohmann::json mc_meta_document(const McConfig& cfg, const McSummary& summary);

}  // namespace stratcox
