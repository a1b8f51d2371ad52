#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "stratcox/dataset.hpp"

namespace stratcox {

struct CsvReadOptions {
  bool jitter_ties = false;
  std::uint64_t jitter_seed = 0;
  std::optional<double> tau;     // default: max observed time
  std::optional<int> k_strata;   // default: max stratum label among r = 1 rows
};

// Dataset CSV: header `time,status,r,s,x1..xp,w1..wm`, `s` empty when r = 0,
// strata 1-based, '.' decimal separator. Parse errors cite the row number.
// The returned dataset is validated.
Dataset read_dataset_csv(std::istream& is, const CsvReadOptions& opts = {});
Dataset read_dataset_csv_file(const std::string& path, const CsvReadOptions& opts = {});

void write_dataset_csv(const Dataset& data, std::ostream& os);
void write_dataset_csv_file(const Dataset& data, const std::string& path);

}  // namespace stratcox
