#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace stratcox {

// One subject's record (T, Delta, X, W, R, R*S). Strata are 0-based in memory
// and 1-based in files; stratum == -1 when the label is missing.
struct Observation {
  double time = 0.0;
  int status = 0;  // 1 = event, 0 = censored
  Eigen::VectorXd x;
  Eigen::VectorXd w;
  bool observed = false;
  int stratum = -1;
};

// Column store over n subjects. Treated as immutable once validated.
struct Dataset {
  Eigen::VectorXd time;      // n
  Eigen::VectorXi status;    // n, in {0,1}
  Eigen::MatrixXd x;         // n x p
  Eigen::MatrixXd w;         // n x m
  Eigen::VectorXi observed;  // n, in {0,1}
  Eigen::VectorXi stratum;   // n, 0-based, -1 when missing
  int k_strata = 0;
  double tau = 0.0;          // study horizon; max observed time unless overridden

  Eigen::Index n() const { return time.size(); }
  int p() const { return static_cast<int>(x.cols()); }
  int m() const { return static_cast<int>(w.cols()); }

  Observation observation(Eigen::Index i) const;
  static Dataset from_observations(const std::vector<Observation>& obs, int k_strata,
                                   std::optional<double> tau = {});
};

struct ValidationOptions {
  // Break tied event times by adding multiples of 1e-9 * tau instead of
  // rejecting the dataset. Deterministic given the seed.
  bool jitter_ties = false;
  std::uint64_t jitter_seed = 0;
};

struct ValidationReport {
  std::vector<std::string> warnings;
};

// Checks the model conventions: shapes, ranges, stratum present iff observed,
// distinct event times (jittered when allowed), and for every stratum at least
// one observed event so its jump-support set is nonempty. Throws
// validation_error; may perturb tied event times when jitter_ties is set.
ValidationReport validate_dataset(Dataset& data, const ValidationOptions& opts = {});

// Times where Lambda_k may jump: event times of subjects known to be in
// stratum k plus event times of subjects with unknown stratum. Ascending.
std::vector<double> jump_support(const Dataset& data, int k);

// Same set as subject indices, ascending by time. Internal building block for
// the Breslow-type updates and the variance matrices.
std::vector<Eigen::Index> jump_support_subjects(const Dataset& data, int k);

}  // namespace stratcox
