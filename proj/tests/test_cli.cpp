#include "doctest.h"
#include "json.hpp"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

const std::string kData = NLSGD_TEST_DATA;

Result cli(const std::string& args) {
  const std::string err_path = "cli_stderr.txt";
  const std::string cmd = std::string(NLSGD_CLI) + " " + args + " 2>" + err_path;
  Result r{-1, "", ""};
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), static_cast<int>(buf.size()), pipe)) r.out += buf.data();
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream err(err_path);
  std::stringstream ss;
  ss << err.rdbuf();
  r.err = ss.str();
  std::remove(err_path.c_str());
  return r;
}

nlohmann::json last_error_json(const std::string& err) {
  std::istringstream lines(err);
  std::string line, last;
  while (std::getline(lines, line)) {
    if (!line.empty() && line[0] == '{') last = line;
  }
  return nlohmann::json::parse(last);
}

const std::string kMse =
    "mse --problem quadratic:4:1 --nonlinearity sign --noise heavytail:2.05 --schedule poly:a=1,delta=1 "
    "--steps 500 --paths 6";

}  // namespace

TEST_CASE("help lists subcommands and flags") {
  auto r = cli("--help");
  CHECK(r.code == 0);
  for (const char* sub : {"run", "mse", "avar", "theory", "parse-data", "figure1", "figure2", "linear-variance-demo"}) {
    CHECK(r.out.find(sub) != std::string::npos);
  }
  r = cli("mse --help");
  CHECK(r.code == 0);
  for (const char* flag : {"--out", "--format", "--seed", "--steps", "--paths", "--threads", "--config", "--problem",
                           "--nonlinearity", "--schedule", "--noise", "--oracle"}) {
    CHECK(r.out.find(flag) != std::string::npos);
  }
  r = cli("figure2 --help");
  CHECK(r.out.find("--random-hessian") != std::string::npos);
}

TEST_CASE("unknown flags and bad values are configuration errors") {
  auto r = cli(kMse + " --bogus 3");
  CHECK(r.code == 1);
  CHECK(last_error_json(r.err)["error"]["kind"] == "config");

  r = cli("mse --problem quadratic:4:1 --nonlinearity sigmoid --schedule poly:a=1,delta=1");
  CHECK(r.code == 1);
  const auto msg = last_error_json(r.err)["error"]["message"].get<std::string>();
  CHECK(msg.find("nonlinearity") != std::string::npos);

  r = cli(kMse + " --format xml");
  CHECK(r.code == 1);
  r = cli("");
  CHECK(r.code == 1);
}

TEST_CASE("runtime failures exit with 2") {
  const auto r = cli("mse --problem quadratic-file:/nonexistent.json --nonlinearity sign --schedule poly:a=1,delta=1");
  CHECK(r.code == 2);
  CHECK(last_error_json(r.err)["error"]["kind"] == "runtime");
}

TEST_CASE("mse CSV output, reproducibility and thread independence") {
  const auto a = cli(kMse + " --seed 9 --threads 1");
  REQUIRE(a.code == 0);
  CHECK(a.out.rfind("t,mse_mean,mse_stderr,overflow_count\n", 0) == 0);
  CHECK(a.err.find("problem = quadratic:4:1") != std::string::npos);
  const auto b = cli(kMse + " --seed 9 --threads 3");
  CHECK(a.out == b.out);
  const auto c = cli(kMse + " --seed 10 --threads 1");
  CHECK(a.out != c.out);
}

TEST_CASE("config file with flag overrides") {
  const std::string path = "cli_config.cfg";
  {
    std::ofstream out(path);
    out << "problem = quadratic:4:1\nnonlinearity = tanh\nschedule = poly:a=1,delta=1\nnoise = gaussian:1\n"
           "steps = 300\npaths = 3\n";
  }
  const auto r = cli("mse --config " + path + " --nonlinearity clip:1 --format json");
  std::remove(path.c_str());
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["config"]["nonlinearity"] == "clip:1");
  CHECK(doc["config"]["steps"] == 300);
  CHECK(doc["points"].size() > 2);
  CHECK(doc["fingerprint"] == doc["config"]["fingerprint"]);
}

TEST_CASE("single run and avar") {
  auto r = cli("run --problem quadratic-iso:3:1 --nonlinearity sign --noise heavytail:3 --schedule poly:a=5,delta=1 "
               "--steps 100 --checkpoints 0,50,100 --stream 2");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("t,sq_error,f_gap,overflow\n0,", 0) == 0);
  r = cli("avar --problem quadratic-iso:3:1 --nonlinearity sign --noise heavytail:3 --schedule poly:a=5,delta=1 "
          "--steps 100 --paths 4 --format json");
  REQUIRE(r.code == 0);
  CHECK(nlohmann::json::parse(r.out)["avar"].size() > 3);
  r = cli("avar --problem quadratic-iso:3:1 --nonlinearity sign --schedule poly:a=5,delta=0.75 --steps 100");
  CHECK(r.code == 1);
}

TEST_CASE("theory report") {
  auto r = cli("theory --nonlinearity sign --noise heavytail:2.05 --a 10 --hessian identity:16");
  REQUIRE(r.code == 0);
  auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["per_entry_avar"].get<double>() == doctest::Approx(5.0));
  CHECK(doc["linear_sgd_avar"] == "inf");
  r = cli("theory --nonlinearity clip:1 --noise heavytail:3 --problem quadratic:4:1");
  REQUIRE(r.code == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc["sigma_psi_sq"].get<double>() == doctest::Approx(0.386294361));
  CHECK(cli("theory --nonlinearity normalize --hessian identity:2").code == 1);
  CHECK(cli("theory --nonlinearity sign").code == 1);
  CHECK(cli("theory --nonlinearity sign --hessian ones:3").code == 1);
}

TEST_CASE("parse-data") {
  auto r = cli("parse-data " + kData + "/sample.libsvm --summary");
  REQUIRE(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["n"] == 120);
  CHECK(doc["d"] == 8);
  r = cli("parse-data " + kData + "/sample.libsvm --dims 12 --scale unit-norm");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("#") == std::string::npos);
  const std::string bad = "cli_bad.libsvm";
  {
    std::ofstream out(bad);
    out << "+1 1:1\n1 3:4 2:5\n";
  }
  r = cli("parse-data " + bad);
  std::remove(bad.c_str());
  CHECK(r.code == 1);
  const auto msg = last_error_json(r.err)["error"]["message"].get<std::string>();
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(msg.find("column 3") != std::string::npos);
  CHECK(cli("parse-data " + kData + "/sample.libsvm --scale log").code == 1);
}

TEST_CASE("canned experiments at small scale") {
  auto r = cli("figure1 --steps 200 --paths 3 --format json");
  REQUIRE(r.code == 0);
  auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["sign"]["config"]["nonlinearity"] == "sign");
  CHECK(r.err.find("nonlinearity = identity") != std::string::npos);

  r = cli("figure2 --steps 200 --paths 3");
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("t,avar,theory\n", 0) == 0);
  r = cli("figure2 --a 0.2 --steps 10 --paths 1");
  CHECK(r.code == 1);

  r = cli("linear-variance-demo --steps 300 --paths 5");
  REQUIRE(r.code == 0);
  doc = nlohmann::json::parse(r.out);
  CHECK(doc.contains("identity"));
  CHECK(doc.contains("zero_noise"));
}
