#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "stratcox/complete_case.hpp"
#include "stratcox/csv.hpp"
#include "stratcox/serialize.hpp"

namespace {

const char* kCli = STRATCOX_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string stdout_text;
  std::string stderr_text;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

RunResult run(const std::string& args) {
  const std::string out = "/tmp/stratcox_cli_stdout.txt";
  const std::string err = "/tmp/stratcox_cli_stderr.txt";
  const std::string cmd = std::string(kCli) + " " + args + " >" + out + " 2>" + err;
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WEXITSTATUS(raw);
  r.stdout_text = slurp(out);
  r.stderr_text = slurp(err);
  return r;
}

std::string write_config(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  os << j.dump(2);
  return path;
}

}  // namespace

TEST_CASE("cli simulate: header contract, determinism, config errors") {
  const auto cfg = oracles::test_config(40, 2, 11, 0.8);
  write_config("/tmp/stratcox_sim.json", stratcox::sim_config_to_json(cfg));

  const RunResult r1 =
      run("simulate --config /tmp/stratcox_sim.json --out /tmp/stratcox_d1.csv");
  CHECK(r1.exit_code == 0);
  CHECK(r1.stdout_text.find("event_rate") != std::string::npos);
  std::ifstream csv("/tmp/stratcox_d1.csv");
  std::string header;
  std::getline(csv, header);
  CHECK(header == "time,status,r,s,x1,x2,w1,w2");

  const RunResult r2 =
      run("simulate --config /tmp/stratcox_sim.json --out /tmp/stratcox_d2.csv");
  CHECK(r2.exit_code == 0);
  CHECK(slurp("/tmp/stratcox_d1.csv") == slurp("/tmp/stratcox_d2.csv"));

  const RunResult missing = run("simulate --config /tmp/no_such_config.json --out /tmp/x.csv");
  CHECK(missing.exit_code == 2);
  CHECK(missing.stderr_text.find("/tmp/no_such_config.json") != std::string::npos);
}

TEST_CASE("cli fit: tied times exit 2, full-data fit matches the oracle") {
  {
    std::ofstream os("/tmp/stratcox_tied.csv");
    os << "time,status,r,s,x1\n0.5,1,1,1,0.1\n0.5,1,1,1,0.2\n";
  }
  const RunResult tied = run("fit --data /tmp/stratcox_tied.csv --out /tmp/tied.json");
  CHECK(tied.exit_code == 2);
  CHECK(tied.stderr_text.find("tied event times") != std::string::npos);
  CHECK(run("fit --data /tmp/stratcox_tied.csv --out /tmp/tied.json --jitter-ties").exit_code ==
        0);

  const auto cfg = oracles::full_data_config(80, 2, 21);
  const stratcox::Dataset d = oracles::valid_dataset(cfg);
  stratcox::write_dataset_csv_file(d, "/tmp/stratcox_full.csv");
  const RunResult fit = run(
      "fit --data /tmp/stratcox_full.csv --out /tmp/stratcox_fit.json --variance "
      "--em-tol 1e-11");
  CHECK(fit.exit_code == 0);
  const auto doc = nlohmann::json::parse(slurp("/tmp/stratcox_fit.json"));
  CHECK(doc["converged"].get<bool>());

  const stratcox::CompleteFit cc = stratcox::fit_complete_case(d, oracles::tight_fit_config());
  const auto beta = doc["estimates"]["beta"];
  for (int c = 0; c < 2; ++c) {
    CHECK(std::abs(beta[c].get<double>() - cc.beta_pl(c)) < 1e-5);
  }
  // SE columns populated and the lambda table present on the grid
  CHECK(doc["variance"]["se_beta"].size() == 2);
  CHECK(doc["variance"]["lambda_tables"].size() == 2);
  CHECK(doc["variance"]["lambda_tables"][0]["rows"].size() >= 1);
}

TEST_CASE("cli mc: smoke run, coverage range, determinism") {
  stratcox::McConfig mc;
  mc.sim = oracles::test_config(100, 2, 404, 1.0);
  mc.fit = stratcox::FitConfig{};
  mc.workers = 2;
  write_config("/tmp/stratcox_mc.json", stratcox::mc_config_to_json(mc));

  const RunResult r1 =
      run("mc --config /tmp/stratcox_mc.json --reps 2 --out /tmp/stratcox_mc1.csv");
  CHECK(r1.exit_code == 0);
  const RunResult r2 =
      run("mc --config /tmp/stratcox_mc.json --reps 2 --out /tmp/stratcox_mc2.csv");
  CHECK(slurp("/tmp/stratcox_mc1.csv") == slurp("/tmp/stratcox_mc2.csv"));

  std::ifstream csv("/tmp/stratcox_mc1.csv");
  std::string line;
  std::getline(csv, line);
  CHECK(line == "param,true,mean,bias,emp_sd,mean_se,coverage");
  while (std::getline(csv, line)) {
    const auto pos = line.rfind(',');
    const double cov = std::stod(line.substr(pos + 1));
    CHECK(cov >= 0.0);
    CHECK(cov <= 1.0);
  }
  // provenance sidecars
  const auto meta = nlohmann::json::parse(slurp("/tmp/stratcox_mc1.csv.meta.json"));
  CHECK(meta["tool"]["version"] == "0.1.0");
  CHECK(meta["reps"] == 2);
}
