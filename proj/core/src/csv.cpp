#include "stratcox/csv.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "stratcox/errors.hpp"

namespace stratcox {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trimmed(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

double parse_double(const std::string& field, int row, const std::string& column) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw validation_error("row " + std::to_string(row) + ": cannot parse '" + field +
                           "' in column " + column);
  }
}

int parse_int(const std::string& field, int row, const std::string& column) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw validation_error("row " + std::to_string(row) + ": cannot parse '" + field +
                           "' in column " + column);
  }
}

}  // namespace

Dataset read_dataset_csv(std::istream& is, const CsvReadOptions& opts) {
  std::string line;
  if (!std::getline(is, line)) throw validation_error("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> header = split_line(line);
  if (header.size() < 4 || trimmed(header[0]) != "time" || trimmed(header[1]) != "status" ||
      trimmed(header[2]) != "r" || trimmed(header[3]) != "s") {
    throw validation_error("header must start with time,status,r,s");
  }
  int p = 0;
  int m = 0;
  for (std::size_t c = 4; c < header.size(); ++c) {
    const std::string name = trimmed(header[c]);
    const std::string want_x = "x" + std::to_string(p + 1);
    const std::string want_w = "w" + std::to_string(m + 1);
    if (m == 0 && name == want_x) {
      ++p;
    } else if (name == want_w) {
      ++m;
    } else {
      throw validation_error("unexpected header column '" + name +
                             "' (expected x1..xp then w1..wm)");
    }
  }

  std::vector<double> time;
  std::vector<int> status;
  std::vector<int> r;
  std::vector<int> s;
  std::vector<double> xs;
  std::vector<double> ws;
  int row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trimmed(line).empty()) continue;
    const std::vector<std::string> f = split_line(line);
    if (f.size() != header.size()) {
      throw validation_error("row " + std::to_string(row) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(f.size()));
    }
    time.push_back(parse_double(trimmed(f[0]), row, "time"));
    status.push_back(parse_int(trimmed(f[1]), row, "status"));
    const int ri = parse_int(trimmed(f[2]), row, "r");
    r.push_back(ri);
    const std::string sfield = trimmed(f[3]);
    if (ri == 1) {
      if (sfield.empty()) {
        throw validation_error("row " + std::to_string(row) + ": s is empty but r = 1");
      }
      s.push_back(parse_int(sfield, row, "s"));
    } else {
      if (!sfield.empty()) {
        throw validation_error("row " + std::to_string(row) + ": s must be empty when r = 0");
      }
      s.push_back(0);  // placeholder, stored as -1 below
    }
    for (int c = 0; c < p; ++c) {
      xs.push_back(parse_double(trimmed(f[static_cast<std::size_t>(4 + c)]), row,
                                "x" + std::to_string(c + 1)));
    }
    for (int c = 0; c < m; ++c) {
      ws.push_back(parse_double(trimmed(f[static_cast<std::size_t>(4 + p + c)]), row,
                                "w" + std::to_string(c + 1)));
    }
  }
  const auto n = static_cast<Eigen::Index>(time.size());
  if (n == 0) throw validation_error("dataset has a header but no rows");

  Dataset d;
  d.time = Eigen::Map<Eigen::VectorXd>(time.data(), n);
  d.status = Eigen::Map<Eigen::VectorXi>(status.data(), n);
  d.observed = Eigen::Map<Eigen::VectorXi>(r.data(), n);
  d.stratum.resize(n);
  d.x.resize(n, p);
  d.w.resize(n, m);
  int max_s = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    d.stratum(i) = d.observed(i) == 1 ? s[static_cast<std::size_t>(i)] - 1 : -1;
    max_s = std::max(max_s, s[static_cast<std::size_t>(i)]);
    for (int c = 0; c < p; ++c) d.x(i, c) = xs[static_cast<std::size_t>(i) * p + c];
    for (int c = 0; c < m; ++c) d.w(i, c) = ws[static_cast<std::size_t>(i) * m + c];
  }
  d.k_strata = opts.k_strata.value_or(std::max(max_s, 1));
  d.tau = opts.tau.value_or(d.time.size() > 0 ? d.time.maxCoeff() : 0.0);

  ValidationOptions vopts;
  vopts.jitter_ties = opts.jitter_ties;
  vopts.jitter_seed = opts.jitter_seed;
  validate_dataset(d, vopts);
  return d;
}

Dataset read_dataset_csv_file(const std::string& path, const CsvReadOptions& opts) {
  std::ifstream is(path);
  if (!is) throw validation_error("cannot open dataset file: " + path);
  return read_dataset_csv(is, opts);
}

void write_dataset_csv(const Dataset& data, std::ostream& os) {
  os << "time,status,r,s";
  for (int c = 0; c < data.p(); ++c) os << ",x" << (c + 1);
  for (int c = 0; c < data.m(); ++c) os << ",w" << (c + 1);
  os << '\n';
  char buf[64];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << buf;
  };
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    put(data.time(i));
    os << ',' << data.status(i) << ',' << data.observed(i) << ',';
    if (data.observed(i) == 1) os << (data.stratum(i) + 1);
    for (int c = 0; c < data.p(); ++c) {
      os << ',';
      put(data.x(i, c));
    }
    for (int c = 0; c < data.m(); ++c) {
      os << ',';
      put(data.w(i, c));
    }
    os << '\n';
  }
}

void write_dataset_csv_file(const Dataset& data, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw validation_error("cannot open output file: " + path);
  write_dataset_csv(data, os);
}

}  // namespace stratcox
