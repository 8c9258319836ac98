#include <catch2/catch_amalgamated.hpp>

#include <itl_pursuit/cli.hpp>

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace itl_pursuit;
using nlohmann::json;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) {
  int n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("help exits cleanly and names the subcommands") {
  const CliRun r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("recover") != std::string::npos);
  CHECK(r.out.find("bench") != std::string::npos);
  CHECK(r.out.find("psweep") != std::string::npos);
  CHECK(r.out.find("classify") != std::string::npos);
}

TEST_CASE("bad invocations are usage errors") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({"bench", "--no-such-flag"}).code == 1);
  CHECK(cli({"bench", "--noise", "nope", "--m", "10", "--n", "20",
             "--sparsity", "2", "--trials", "1"})
            .code == 1);
  CHECK(cli({"recover", "--solver", "nope"}).code == 1);
  CHECK(cli({"bench", "--preset", "nope"}).code == 1);
}

TEST_CASE("each command speaks only its own format") {
  CHECK(cli({"recover", "--format", "csv"}).code == 1);
  CHECK(cli({"bench", "--format", "json"}).code == 1);
  const CliRun ok = cli({"recover", "--format", "json", "--m", "20", "--n",
                         "40", "--sparsity", "2", "--seed", "3"});
  CHECK(ok.code == 0);
}

TEST_CASE("an unwritable output path is a hard error") {
  const CliRun r = cli({"bench", "--m", "10", "--n", "20", "--sparsity", "2",
                        "--trials", "1", "--solver", "omp", "--out",
                        "/no-such-directory/x.csv"});
  CHECK(r.code == 2);
  CHECK(r.err.find("cannot open output path") != std::string::npos);
}

TEST_CASE("recover emits a complete json report") {
  const CliRun r = cli({"recover", "--m", "30", "--n", "60", "--sparsity", "3",
                        "--noise", "none", "--seed", "5"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["schema_version"] == 1);
  CHECK(j["report"]["solver"] == "inok");
  CHECK(j["report"]["noise"] == "none");
  CHECK(j["report"]["seed"] == 5);
  CHECK(j["report"]["recovery_error"].get<double>() < 1e-8);
  CHECK(j["report"]["support_exact"] == true);
  CHECK(j["solution"]["support"].size() == 3);
  CHECK(j["solution"]["coefficients"].size() == 3);
  CHECK(j["solution"]["converged"] == true);
  CHECK(j["manifest"]["command"] == "recover");
}

TEST_CASE("recover repairs missing data at the default problem size") {
  const CliRun r = cli({"recover", "--noise", "missing", "--seed", "1"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["report"]["recovery_error"].get<double>() < 1e-4);
  CHECK(j["report"]["support_exact"] == true);
}

TEST_CASE("bench emits one csv row per trial") {
  const CliRun r =
      cli({"bench", "--m", "30", "--n", "60", "--sparsity", "3", "--trials",
           "2", "--noise", "chi2,missing", "--solver", "omp,inok", "--seed",
           "5"});
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out) == 1 + 2 * 2 * 2);
  CHECK(r.out.rfind("solver,noise,trial,recovery_error,support_exact,"
                    "runtime_ms,seed\n",
                    0) == 0);
}

TEST_CASE("bench csv is byte-stable across reruns and thread counts") {
  const std::vector<std::string> base = {
      "bench", "--m",     "30",   "--n",    "60",   "--sparsity", "3",
      "--trials", "3",    "--noise", "chi2", "--solver", "omp,inok",
      "--seed", "7"};
  const CliRun a = cli(base);
  const CliRun b = cli(base);
  std::vector<std::string> threaded = base;
  threaded.push_back("--threads");
  threaded.push_back("4");
  const CliRun c = cli(threaded);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out == c.out);
}

TEST_CASE("runtimes appear in the csv only under the timings flag") {
  const CliRun plain =
      cli({"bench", "--m", "30", "--n", "60", "--sparsity", "3", "--trials",
           "1", "--noise", "chi2", "--solver", "omp", "--seed", "2"});
  REQUIRE(plain.code == 0);
  // every data row carries a zero runtime field
  std::istringstream lines(plain.out);
  std::string line;
  std::getline(lines, line);  // header
  while (std::getline(lines, line)) {
    const auto last_comma = line.rfind(',');
    const auto prev_comma = line.rfind(',', last_comma - 1);
    CHECK(line.substr(prev_comma + 1, last_comma - prev_comma - 1) == "0");
  }

  const CliRun timed =
      cli({"bench", "--m", "30", "--n", "60", "--sparsity", "3", "--trials",
           "1", "--noise", "chi2", "--solver", "omp", "--seed", "2",
           "--timings"});
  REQUIRE(timed.code == 0);
  CHECK(timed.out != plain.out);
}

TEST_CASE("psweep walks the whole p grid") {
  const CliRun r = cli({"psweep", "--m", "20", "--n", "40", "--sparsity", "2",
                        "--trials", "2", "--noise", "chi2", "--seed", "3"});
  REQUIRE(r.code == 0);
  CHECK(count_lines(r.out) == 1 + 10);
  CHECK(r.out.rfind("p,noise,mean_recovery_error,std_recovery_error,trials\n",
                    0) == 0);
  CHECK(r.out.find("\n1.1,chi2,") != std::string::npos);
  CHECK(r.out.find("\n2,chi2,") != std::string::npos);
}

TEST_CASE("classify summarizes the occlusion demo as json") {
  const CliRun r = cli({"classify", "--trials", "4", "--solver", "omp",
                        "--seed", "9"});
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["schema_version"] == 1);
  CHECK(j["task"]["classes"] == 3);
  CHECK(j["results"]["trials"] == 4);
  int total = 0;
  for (const auto& row : j["results"]["confusion"])
    for (const auto& cell : row) total += cell.get<int>();
  CHECK(total == 4);
  const double acc = j["results"]["accuracy"].get<double>();
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(j["manifest"]["command"] == "classify");
}

TEST_CASE("the environment seed fills in when the flag is absent") {
  ::setenv("ITL_PURSUIT_SEED", "77", 1);
  const CliRun env = cli({"recover", "--m", "20", "--n", "40", "--sparsity",
                          "2", "--noise", "none"});
  REQUIRE(env.code == 0);
  CHECK(json::parse(env.out)["report"]["seed"] == 77);

  const CliRun flag = cli({"recover", "--m", "20", "--n", "40", "--sparsity",
                           "2", "--noise", "none", "--seed", "5"});
  ::unsetenv("ITL_PURSUIT_SEED");
  REQUIRE(flag.code == 0);
  CHECK(json::parse(flag.out)["report"]["seed"] == 5);
}

TEST_CASE("file output writes the data and a manifest sidecar") {
  const auto dir = std::filesystem::temp_directory_path() / "itl_cli_test";
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / "bench.csv";

  const CliRun r = cli({"bench", "--m", "30", "--n", "60", "--sparsity", "3",
                        "--trials", "2", "--noise", "chi2", "--solver", "omp",
                        "--seed", "11", "--out", csv_path.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("wrote") != std::string::npos);

  const std::string csv = slurp(csv_path);
  CHECK(csv.rfind("solver,noise,trial,", 0) == 0);
  CHECK(count_lines(csv) == 1 + 2);

  const json man = json::parse(slurp(dir / "bench.csv.manifest.json"));
  CHECK(man["command"] == "bench");
  CHECK(man["seed"] == 11);
  CHECK(man["parameters"]["solvers"] == "omp");

  std::filesystem::remove_all(dir);
}
