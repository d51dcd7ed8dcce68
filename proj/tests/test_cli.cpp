#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dpmle/json_io.hpp"

#ifndef DPMLE_CLI_PATH
#error "DPMLE_CLI_PATH must be defined"
#endif
#ifndef DPMLE_SCHEMA_DIR
#error "DPMLE_SCHEMA_DIR must be defined"
#endif

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using dpmle::check_schema;

const std::string kCli = DPMLE_CLI_PATH;
const std::string kSchemas = DPMLE_SCHEMA_DIR;

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args, const std::string& dir) {
  const std::string out_file = dir + "/cmd_output.txt";
  const std::string cmd = "cd " + dir + " && " + kCli + " " + args + " > " + out_file + " 2>&1";
  const int rc = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string fresh_dir(const std::string& name) {
  const std::string dir = "/tmp/dpmle_cli_tests/" + name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

}  // namespace

TEST_CASE("simulate writes data and truth, reproducibly") {
  const std::string dir = fresh_dir("simulate");
  auto r = run("simulate --scenario 1 --T 200 --seed 7", dir);
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(dir + "/scenario1_data.csv"));
  REQUIRE(fs::exists(dir + "/scenario1_truth.json"));

  // row count: header + T rows
  std::ifstream in(dir + "/scenario1_data.csv");
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 201);

  // byte-identical rerun
  auto r2 = run("simulate --scenario 1 --T 200 --seed 7 --out-data second.csv --out-truth second.json",
                dir);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(dir + "/scenario1_data.csv") == slurp(dir + "/second.csv"));
  CHECK(slurp(dir + "/scenario1_truth.json") == slurp(dir + "/second.json"));

  // truth validates against the shipped schema
  check_schema(load_json(dir + "/scenario1_truth.json"),
               load_json(kSchemas + "/truth.schema.json"));
}

TEST_CASE("simulate scenario 3 emits ten series") {
  const std::string dir = fresh_dir("sim3");
  auto r = run("simulate --scenario 3 --T 50 --seed 7", dir);
  CHECK(r.exit_code == 0);
  const json truth = load_json(dir + "/scenario3_truth.json");
  CHECK(truth["M"] == 10);
  CHECK(truth["state_paths"].size() == 10);
}

TEST_CASE("fit mle writes a schema-valid report") {
  const std::string dir = fresh_dir("fitmle");
  REQUIRE(run("simulate --scenario 1 --T 400 --seed 3", dir).exit_code == 0);
  auto r = run("fit --input scenario1_data.csv --method mle --orders 2,3 --restarts 3 --seed 5 "
               "--output fit.json",
               dir);
  CHECK(r.exit_code == 0);
  const json fit = load_json(dir + "/fit.json");
  check_schema(fit, load_json(kSchemas + "/fit_result.schema.json"));
  CHECK(fit["method"] == "mle");
  CHECK(fit["orders"].size() == 2);
  CHECK(fit["decoded"]["viterbi"].size() == 1);
  CHECK(fit["decoded"]["viterbi"][0].size() == 400);
}

TEST_CASE("fit dpmle writes a schema-valid report") {
  const std::string dir = fresh_dir("fitdpmle");
  REQUIRE(run("simulate --scenario 1 --T 400 --seed 3", dir).exit_code == 0);
  auto r = run("fit --input scenario1_data.csv --method dpmle --n-upper 3 --draws 3 "
               "--restarts 3 --dpmle-restarts 2 --seed 5 --output fit.json",
               dir);
  CHECK(r.exit_code == 0);
  const json fit = load_json(dir + "/fit.json");
  check_schema(fit, load_json(kSchemas + "/fit_result.schema.json"));
  CHECK(fit["dpmle"]["n_hat"].get<int>() >= 1);
  CHECK(fit["dpmle"]["penalty"].contains("lambda"));
}

TEST_CASE("corrupt CSV exits with the parse code and leaves no output") {
  const std::string dir = fresh_dir("corrupt");
  {
    std::ofstream f(dir + "/bad.csv");
    f << "series_id,t,y,tod\n";
    f << "a,1,definitely_not_a_number,1\n";
  }
  auto r = run("fit --input bad.csv --method mle --orders 2 --restarts 1 --seed 1 "
               "--output fit.json",
               dir);
  CHECK(r.exit_code == 3);
  CHECK(!fs::exists(dir + "/fit.json"));
}

TEST_CASE("missing input exits with the I/O code") {
  const std::string dir = fresh_dir("missing");
  auto r = run("fit --input nope.csv --method mle --orders 2 --seed 1", dir);
  CHECK(r.exit_code == 5);
}

TEST_CASE("bad configuration exits with the config code") {
  const std::string dir = fresh_dir("badcfg");
  REQUIRE(run("simulate --scenario 1 --T 100 --seed 3", dir).exit_code == 0);
  auto r = run("fit --input scenario1_data.csv --method nonsense --seed 1", dir);
  CHECK(r.exit_code == 2);
  auto r2 = run("simulate --scenario 9 --T 100 --seed 3", dir);
  CHECK(r2.exit_code == 2);
}

TEST_CASE("preprocess splits at long gaps and reports a summary") {
  const std::string dir = fresh_dir("prep");
  {
    std::ofstream f(dir + "/track.csv");
    f << "id,timestamp,lat,lon\n";
    // 8 hourly fixes, a 13-hour hole, 8 more
    for (int i = 0; i < 8; ++i)
      f << "n1,2017-08-01T" << (i < 10 ? "0" : "") << i << ":00:00Z,70." << i << ",-80.0\n";
    for (int i = 21; i < 24; ++i) f << "n1,2017-08-01T" << i << ":00:00Z,70." << i << ",-80.0\n";
    for (int i = 0; i < 5; ++i)
      f << "n1,2017-08-02T0" << i << ":00:00Z,71." << i << ",-80.0\n";
  }
  auto r = run("preprocess --input track.csv --output steps.csv", dir);
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("segments kept: 2") != std::string::npos);
  REQUIRE(fs::exists(dir + "/steps.csv"));
  std::ifstream in(dir + "/steps.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "segment_id,hour,step_km,angle_rad");
}

TEST_CASE("preprocess rejects an already-processed file with a schema message") {
  const std::string dir = fresh_dir("prep2");
  {
    std::ofstream f(dir + "/steps.csv");
    f << "segment_id,hour,step_km,angle_rad\n";
    f << "a-1,2017-08-01T00:00:00Z,1.0,\n";
  }
  auto r = run("preprocess --input steps.csv --output out.csv", dir);
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("id,timestamp,lat,lon") != std::string::npos);
}

TEST_CASE("benchmark accepts --replicates 100 in a dry run and honors small runs") {
  const std::string dir = fresh_dir("bench");
  auto dry = run("benchmark --scenarios 1 --methods bic --T 5000 --replicates 100 --seed 4 "
                 "--dry-run",
                 dir);
  CHECK(dry.exit_code == 0);
  CHECK(dry.output.find("100 replicate(s)") != std::string::npos);

  auto r = run("benchmark --scenarios 1 --methods aic,bic --T 300 --replicates 2 --orders 2,3 "
               "--restarts 2 --seed 4 --out-prefix b",
               dir);
  CHECK(r.exit_code == 0);
  REQUIRE(fs::exists(dir + "/b_report.json"));
  REQUIRE(fs::exists(dir + "/b_long.csv"));
  const json rep = load_json(dir + "/b_report.json");
  check_schema(rep, load_json(kSchemas + "/benchmark_report.schema.json"));
  // per-cell counts sum to the replicate count
  for (const auto& cell : rep["cells"]) {
    int total = cell["failures"].get<int>();
    for (const auto& [key, val] : cell["order_counts"].items()) total += val.get<int>();
    CHECK(total == 2);
  }
  // identical rerun gives identical outcomes
  auto r2 = run("benchmark --scenarios 1 --methods aic,bic --T 300 --replicates 2 --orders 2,3 "
                "--restarts 2 --seed 4 --out-prefix c",
                dir);
  CHECK(r2.exit_code == 0);
  CHECK(slurp(dir + "/b_long.csv") == slurp(dir + "/c_long.csv"));

  auto formatted = run("report --input b_long.csv", dir);
  CHECK(formatted.exit_code == 0);
  CHECK(formatted.output.find("bic") != std::string::npos);
}

TEST_CASE("the out-dir environment variable sets the default output directory") {
  const std::string dir = fresh_dir("envdir");
  fs::create_directories(dir + "/sub");
  const std::string cmd = "cd " + dir + " && DPMLE_OUT_DIR=" + dir + "/sub " + kCli +
                          " simulate --scenario 1 --T 60 --seed 2 > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  CHECK(fs::exists(dir + "/sub/scenario1_data.csv"));
}
