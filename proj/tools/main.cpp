// stratcox: NPMLE for the stratified proportional intensity model when the
// stratum label is missing for part of the sample.
//
// Exit codes: 0 ok, 2 bad input or config, 3 fit did not converge (output is
// still written and flagged), 4 numeric/linear-algebra failure, 5 more than
// half of the Monte Carlo replications failed.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stratcox/csv.hpp"
#include "stratcox/em.hpp"
#include "stratcox/errors.hpp"
#include "stratcox/monte_carlo.hpp"
#include "stratcox/serialize.hpp"
#include "stratcox/simulate.hpp"
#include "stratcox/variance.hpp"
#include "stratcox/version.hpp"

namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw stratcox::validation_error("cannot open config file: " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& ex) {
    throw stratcox::validation_error("cannot parse " + path + ": " + ex.what());
  }
  return j;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw stratcox::validation_error("cannot open output file: " + path);
  os << text;
}

std::vector<double> parse_grid(const std::string& spec) {
  std::vector<double> out;
  std::string item;
  std::istringstream is(spec);
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw stratcox::validation_error("cannot parse --lambda-grid entry '" + item + "'");
    }
  }
  if (out.empty()) throw stratcox::validation_error("--lambda-grid must list at least one time");
  return out;
}

std::vector<double> event_time_deciles(const stratcox::Dataset& data) {
  std::vector<double> events;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.status(i) == 1) events.push_back(data.time(i));
  }
  std::sort(events.begin(), events.end());
  std::vector<double> grid;
  for (int d = 1; d <= 9; ++d) {
    const auto idx = static_cast<std::size_t>(0.1 * d * (static_cast<double>(events.size()) - 1));
    if (grid.empty() || events[idx] != grid.back()) grid.push_back(events[idx]);
  }
  return grid;
}

int run_simulate(const std::string& config_path, const std::string& out_path,
                 std::optional<std::uint64_t> seed) {
  stratcox::SimConfig cfg = stratcox::sim_config_from_json(load_json(config_path));
  if (seed) cfg.seed = *seed;
  const stratcox::Dataset data = stratcox::generate(cfg);
  stratcox::write_dataset_csv_file(data, out_path);

  const stratcox::SimMonitor mon = stratcox::monitor(data);
  std::printf("wrote %s: n=%d K=%d event_rate=%.4f missing_rate=%.4f\n", out_path.c_str(),
              static_cast<int>(data.n()), data.k_strata, mon.event_rate, mon.missing_rate);
  if (!mon.positivity_ok) {
    std::fprintf(stderr,
                 "warning: some stratum has no observed event or no observed subject at risk "
                 "at tau; fitting this dataset may fail\n");
  }
  return 0;
}

int run_fit(const std::string& data_path, const std::string& out_path, bool with_variance,
            const std::string& grid_spec, std::optional<double> em_tol,
            std::optional<int> max_iters, bool jitter_ties, std::optional<double> tau,
            std::optional<int> k_strata) {
  stratcox::CsvReadOptions opts;
  opts.jitter_ties = jitter_ties;
  opts.tau = tau;
  opts.k_strata = k_strata;
  const stratcox::Dataset data = stratcox::read_dataset_csv_file(data_path, opts);

  stratcox::FitConfig cfg;
  if (em_tol) cfg.em_tol = *em_tol;
  if (max_iters) cfg.max_em_iters = *max_iters;
  const stratcox::FitResult fr = stratcox::fit(data, cfg);

  std::vector<double> grid =
      grid_spec.empty() ? event_time_deciles(data) : parse_grid(grid_spec);

  const stratcox::VarianceResult* vr_ptr = nullptr;
  stratcox::VarianceResult vr;
  int exit_code = fr.converged ? 0 : 3;
  if (with_variance) {
    try {
      const stratcox::BlockMatrix bm = stratcox::build_block_matrix(fr.theta_hat, data);
      vr = stratcox::schur_variances(bm, fr.theta_hat, data);
      vr_ptr = &vr;
    } catch (const stratcox::linalg_error& ex) {
      // keep the fit document, report the failure
      write_text_file(out_path,
                      stratcox::fit_result_document(fr, cfg, data, nullptr, grid).dump(2) + "\n");
      std::fprintf(stderr, "error: %s\n", ex.what());
      return 4;
    }
  }
  write_text_file(out_path,
                  stratcox::fit_result_document(fr, cfg, data, vr_ptr, grid).dump(2) + "\n");

  std::printf("%-14s %12s %12s\n", "param", "estimate", "se");
  for (Eigen::Index r = 0; r < fr.theta_hat.beta.size(); ++r) {
    const std::string label = "beta[" + std::to_string(r + 1) + "]";
    if (vr_ptr) {
      std::printf("%-14s %12.6f %12.6f\n", label.c_str(), fr.theta_hat.beta(r), vr.se_beta(r));
    } else {
      std::printf("%-14s %12.6f %12s\n", label.c_str(), fr.theta_hat.beta(r), "-");
    }
  }
  const Eigen::VectorXd gamma_flat = stratcox::flatten_gamma(fr.theta_hat.gamma);
  for (Eigen::Index s = 0; s < gamma_flat.size(); ++s) {
    const std::string label = "gamma[" + std::to_string(s + 1) + "]";
    if (vr_ptr) {
      std::printf("%-14s %12.6f %12.6f\n", label.c_str(), gamma_flat(s), vr.se_gamma(s));
    } else {
      std::printf("%-14s %12.6f %12s\n", label.c_str(), gamma_flat(s), "-");
    }
  }
  std::printf("loglik %.8f after %d EM iterations (%s)\n", fr.loglik_trace.back(),
              fr.em_iterations, fr.converged ? "converged" : "NOT converged");
  for (const std::string& w : fr.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  return exit_code;
}

int run_mc(const std::string& config_path, int reps, const std::string& out_path,
           std::optional<int> workers, std::optional<std::uint64_t> seed) {
  stratcox::McConfig cfg = stratcox::mc_config_from_json(load_json(config_path));
  if (workers) cfg.workers = *workers;
  if (seed) cfg.sim.seed = *seed;
  if (reps < 2) throw stratcox::validation_error("--reps must be >= 2");

  const stratcox::McSummary summary = stratcox::run_monte_carlo(cfg, reps);

  std::ostringstream csv;
  stratcox::write_summary_csv(summary, csv);
  write_text_file(out_path, csv.str());

  std::ostringstream failures;
  for (const auto& [rep, reason] : summary.failures) {
    failures << "replication " << rep << ": " << reason << '\n';
  }
  write_text_file(out_path + ".failures.txt", failures.str());
  write_text_file(out_path + ".meta.json",
                  stratcox::mc_meta_document(cfg, summary).dump(2) + "\n");

  stratcox::write_summary_table(summary, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stratified proportional intensity model with missing stratum labels"};
  app.set_version_flag("--version", std::string("stratcox ") + stratcox::kVersion);
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a dataset CSV from a config");
  std::string sim_config;
  std::string sim_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--config", sim_config, "simulation config JSON")->required();
  sim->add_option("--out", sim_out, "output dataset CSV path")->required();
  sim->add_option("--seed", sim_seed, "override the config seed");

  // fit
  auto* fit = app.add_subcommand("fit", "fit the model to a dataset CSV");
  std::string fit_data;
  std::string fit_out;
  bool with_variance = false;
  std::string grid_spec;
  std::optional<double> em_tol;
  std::optional<int> max_iters;
  bool jitter_ties = false;
  std::optional<double> tau;
  std::optional<int> k_strata;
  fit->add_option("--data", fit_data, "dataset CSV path")->required();
  fit->add_option("--out", fit_out, "output document path (JSON)")->required();
  fit->add_flag("--variance", with_variance, "compute the plug-in variance estimators");
  fit->add_option("--lambda-grid", grid_spec,
                  "comma-separated times for the baseline SE table "
                  "(default: observed event-time deciles)");
  fit->add_option("--em-tol", em_tol, "relative log-likelihood tolerance");
  fit->add_option("--max-iters", max_iters, "EM iteration cap");
  fit->add_flag("--jitter-ties", jitter_ties, "break tied event times deterministically");
  fit->add_option("--tau", tau, "study horizon override (default: max observed time)");
  fit->add_option("--k-strata", k_strata, "stratum count override");

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo study: generate, fit, summarize");
  std::string mc_config;
  std::string mc_out;
  int reps = 0;
  std::optional<int> workers;
  std::optional<std::uint64_t> mc_seed;
  mc->add_option("--config", mc_config, "study config JSON with sim and fit sections")
      ->required();
  mc->add_option("--reps", reps, "number of replications")->required();
  mc->add_option("--out", mc_out, "summary CSV path")->required();
  mc->add_option("--workers", workers, "parallel replication workers");
  mc->add_option("--seed", mc_seed, "override the master seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(sim_config, sim_out, sim_seed);
    if (fit->parsed()) {
      return run_fit(fit_data, fit_out, with_variance, grid_spec, em_tol, max_iters,
                     jitter_ties, tau, k_strata);
    }
    if (mc->parsed()) return run_mc(mc_config, reps, mc_out, workers, mc_seed);
  } catch (const stratcox::validation_error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 2;
  } catch (const stratcox::mc_failure_error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 5;
  } catch (const stratcox::linalg_error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 4;
  } catch (const stratcox::numeric_error& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 4;
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
