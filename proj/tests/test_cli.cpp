#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "ecaml_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    std::ofstream(d / "small.json") << R"({"train": {"iterations": 40, "eval_every": 20},
                                          "data": {"samples_per_class": 12}})";
    std::ofstream(d / "typo.json") << R"({"train": {"iterationz": 40}})";
    std::ofstream(d / "nan.json") << R"({"train": {"iterations": 40, "lr": 1e200}, "loss": {"kind": "npair"}})";
    return d;
  }();
  return dir;
}

// Runs the CLI with stdout and stderr captured to files; returns the exit code.
int run(const std::string& args, std::string* out = nullptr) {
  fs::path so = workdir() / "stdout.txt", se = workdir() / "stderr.txt";
  std::string cmd = std::string("\"") + ECAML_CLI + "\" " + args + " >" + so.string() + " 2>" + se.string();
  int status = std::system(cmd.c_str());
  if (out) {
    std::ifstream in(so);
    std::stringstream ss;
    ss << in.rdbuf();
    *out = ss.str();
  }
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string w(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("usage errors exit 2") {
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  CHECK(run("train") == 2);
  CHECK(run("train --out " + w("x") + " --config " + w("missing.json")) == 2);
  CHECK(run("train --out " + w("typo") + " --config " + w("typo.json")) == 2);
  CHECK(run("ablate --out " + w("y") + " --lambdas 0,1 --dims 8") == 2);
  CHECK(run("ablate --out " + w("y") + " --lambdas 1,2") == 2);
  CHECK(run("ablate --out " + w("y") + " --lambdas 0,abc") == 2);
  CHECK(run("train --help") == 0);
}

TEST_CASE("gen-data, train and eval round trip") {
  const std::string cfg = " --config " + w("small.json");
  REQUIRE(run("gen-data" + cfg + " --out " + w("data.csv")) == 0);
  // Overwriting without --force is a usage error.
  CHECK(run("gen-data" + cfg + " --out " + w("data.csv")) == 2);
  CHECK(run("gen-data" + cfg + " --out " + w("data.csv") + " --force") == 0);

  REQUIRE(run("train" + cfg + " --data " + w("data.csv") + " --out " + w("run_a") + " --seed 7") == 0);
  for (const char* f : {"history.csv", "summary.json", "weights.csv"}) CHECK(fs::exists(workdir() / "run_a" / f));
  CHECK(run("train" + cfg + " --data " + w("data.csv") + " --out " + w("run_a") + " --seed 7") == 2);
  REQUIRE(run("train" + cfg + " --data " + w("data.csv") + " --out " + w("run_b") + " --seed 7") == 0);
  CHECK(slurp(workdir() / "run_a" / "history.csv") == slurp(workdir() / "run_b" / "history.csv"));
  CHECK(slurp(workdir() / "run_a" / "weights.csv") == slurp(workdir() / "run_b" / "weights.csv"));

  std::string report;
  REQUIRE(run("eval --run " + w("run_a") + " --data " + w("data.csv"), &report) == 0);
  json doc = json::parse(report);
  json summary = json::parse(slurp(workdir() / "run_a" / "summary.json"));
  CHECK(doc.at("retrieval").at("recall_at").at("1") == summary.at("final").at("unseen_r1"));
  CHECK(doc.at("clustering").at("nmi") == summary.at("final").at("nmi"));
  CHECK(doc.at("seen_r1") == summary.at("final").at("seen_r1"));

  CHECK(run("train" + cfg + " --data " + w("no_such.csv") + " --out " + w("run_c")) == 1);
  CHECK(run("train --config " + w("nan.json") + " --out " + w("run_nan")) == 1);
}

TEST_CASE("verify exits 0 on a passing suite and writes JSON") {
  std::string out;
  REQUIRE(run("verify --fuzz 1000 --seed 1", &out) == 0);
  json doc = json::parse(out);
  CHECK(doc.at("ok") == true);
  CHECK(doc.at("fuzz") == 1000);
  CHECK(!doc.at("properties").empty());
}

TEST_CASE("ablate and report") {
  const std::string cfg = " --config " + w("small.json");
  REQUIRE(run("ablate" + cfg + " --out " + w("abl") + " --lambdas 0,0.01,0.1,1 --seed 2 --jobs 2") == 0);
  std::string csv = slurp(workdir() / "abl" / "ablation.csv");
  std::size_t lines = 0;
  for (char c : csv) lines += c == '\n';
  CHECK(lines == 5);
  CHECK(fs::exists(workdir() / "abl" / "summary.json"));

  REQUIRE(run("ablate" + cfg + " --out " + w("abl1") + " --lambdas 0,0.01,0.1,1 --seed 2 --jobs 1") == 0);
  CHECK(slurp(workdir() / "abl1" / "ablation.csv") == csv);

  REQUIRE(run("report " + w("abl") + " --out " + w("rep")) == 0);
  std::string rep = slurp(workdir() / "rep" / "report.csv");
  lines = 0;
  for (char c : rep) lines += c == '\n';
  CHECK(lines == 5);
  std::string svg = slurp(workdir() / "rep" / "r1_curves.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("unseen") != std::string::npos);
  CHECK(run("report " + w("does_not_exist") + " --out " + w("rep2")) != 0);
}
