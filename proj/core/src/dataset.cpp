#include "stratcox/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "stratcox/errors.hpp"
#include "stratcox/rng.hpp"

namespace stratcox {

Observation Dataset::observation(Eigen::Index i) const {
  Observation o;
  o.time = time(i);
  o.status = status(i);
  o.x = x.row(i).transpose();
  o.w = w.row(i).transpose();
  o.observed = observed(i) == 1;
  o.stratum = stratum(i);
  return o;
}

Dataset Dataset::from_observations(const std::vector<Observation>& obs, int k_strata,
                                   std::optional<double> tau) {
  Dataset d;
  const Eigen::Index n = static_cast<Eigen::Index>(obs.size());
  if (n == 0) throw validation_error("Dataset: empty observation list");
  const Eigen::Index p = obs.front().x.size();
  const Eigen::Index m = obs.front().w.size();
  d.time.resize(n);
  d.status.resize(n);
  d.x.resize(n, p);
  d.w.resize(n, m);
  d.observed.resize(n);
  d.stratum.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& o = obs[static_cast<std::size_t>(i)];
    if (o.x.size() != p || o.w.size() != m) {
      throw validation_error("Dataset: covariate vectors must have uniform lengths");
    }
    d.time(i) = o.time;
    d.status(i) = o.status;
    d.x.row(i) = o.x.transpose();
    d.w.row(i) = o.w.transpose();
    d.observed(i) = o.observed ? 1 : 0;
    d.stratum(i) = o.observed ? o.stratum : -1;
  }
  d.k_strata = k_strata;
  d.tau = tau ? *tau : d.time.maxCoeff();
  return d;
}

namespace {

std::string subject_label(Eigen::Index i) {
  std::ostringstream os;
  os << "subject " << (i + 1);
  return os.str();
}

}  // namespace

ValidationReport validate_dataset(Dataset& data, const ValidationOptions& opts) {
  ValidationReport report;
  const Eigen::Index n = data.n();
  if (n == 0) throw validation_error("Dataset: no observations");
  if (data.k_strata < 1) throw validation_error("Dataset: k_strata must be >= 1");
  if (data.status.size() != n || data.observed.size() != n || data.stratum.size() != n ||
      data.x.rows() != n || data.w.rows() != n) {
    throw validation_error("Dataset: column lengths disagree");
  }
  if (!(data.tau > 0.0) || !std::isfinite(data.tau)) {
    throw validation_error("Dataset: tau must be positive and finite");
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(data.time(i)) || data.time(i) < 0.0 || data.time(i) > data.tau) {
      throw validation_error(subject_label(i) + ": time must lie in [0, tau]");
    }
    if (data.status(i) != 0 && data.status(i) != 1) {
      throw validation_error(subject_label(i) + ": status must be 0 or 1");
    }
    if (data.observed(i) != 0 && data.observed(i) != 1) {
      throw validation_error(subject_label(i) + ": r must be 0 or 1");
    }
    if (data.observed(i) == 1) {
      if (data.stratum(i) < 0 || data.stratum(i) >= data.k_strata) {
        throw validation_error(subject_label(i) + ": stratum out of range 1.." +
                               std::to_string(data.k_strata));
      }
    } else if (data.stratum(i) != -1) {
      throw validation_error(subject_label(i) + ": stratum present but r = 0");
    }
    if (!data.x.row(i).allFinite() || !data.w.row(i).allFinite()) {
      throw validation_error(subject_label(i) + ": nonfinite covariate value");
    }
  }

  // Tied event times break the no-ties convention behind the jump updates.
  std::map<double, std::vector<Eigen::Index>> events;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.status(i) == 1) events[data.time(i)].push_back(i);
  }
  bool jittered = false;
  for (auto& [t, ids] : events) {
    if (ids.size() < 2) continue;
    if (!opts.jitter_ties) {
      std::ostringstream os;
      os << "tied event times at t = " << t << " (" << ids.size()
         << " subjects); the model assumes no ties among observed death times"
            " (enable tie jittering to proceed)";
      throw validation_error(os.str());
    }
    // Deterministic tie break: shift the 2nd, 3rd, ... tied event by distinct
    // multiples of 1e-9 * tau, ordered by a seeded permutation of the group.
    const double unit = 1e-9 * data.tau;
    std::vector<Eigen::Index> order(ids.begin(), ids.end());
    std::uint64_t h = opts.jitter_seed;
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return splitmix64(h ^ static_cast<std::uint64_t>(a)) <
             splitmix64(h ^ static_cast<std::uint64_t>(b));
    });
    const double g = static_cast<double>(order.size());
    const bool shift_down = t + g * unit > data.tau;
    for (std::size_t j = 1; j < order.size(); ++j) {
      const double delta = static_cast<double>(j) * unit;
      data.time(order[j]) = shift_down ? t - delta : t + delta;
    }
    jittered = true;
    std::ostringstream os;
    os << "broke " << ids.size() << "-way event-time tie at t = " << t
       << " by multiples of 1e-9 * tau";
    report.warnings.push_back(os.str());
  }
  if (jittered) {
    // Re-check distinctness against previously untied times.
    std::map<double, int> counts;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (data.status(i) == 1 && ++counts[data.time(i)] > 1) {
        throw validation_error("tie jittering collided with an existing event time");
      }
    }
  }

  // Every stratum needs at least one observed event, otherwise its baseline
  // has no legal jump locations.
  std::vector<int> observed_events(static_cast<std::size_t>(data.k_strata), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (data.observed(i) == 1 && data.status(i) == 1) {
      ++observed_events[static_cast<std::size_t>(data.stratum(i))];
    }
  }
  for (int k = 0; k < data.k_strata; ++k) {
    if (observed_events[static_cast<std::size_t>(k)] == 0) {
      throw validation_error("stratum " + std::to_string(k + 1) +
                             " has no observed event subject (r = 1, event); "
                             "its baseline support would be empty");
    }
  }
  return report;
}

std::vector<Eigen::Index> jump_support_subjects(const Dataset& data, int k) {
  if (k < 0 || k >= data.k_strata) {
    throw validation_error("jump_support: stratum index out of range");
  }
  std::vector<Eigen::Index> ids;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.status(i) != 1) continue;
    const bool known_k = data.observed(i) == 1 && data.stratum(i) == k;
    const bool unknown = data.observed(i) == 0;
    if (known_k || unknown) ids.push_back(i);
  }
  std::sort(ids.begin(), ids.end(),
            [&](Eigen::Index a, Eigen::Index b) { return data.time(a) < data.time(b); });
  return ids;
}

std::vector<double> jump_support(const Dataset& data, int k) {
  std::vector<double> times;
  for (Eigen::Index i : jump_support_subjects(data, k)) times.push_back(data.time(i));
  return times;
}

}  // namespace stratcox
