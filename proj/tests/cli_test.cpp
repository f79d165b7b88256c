#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

const fs::path kOut = fs::temp_directory_path() / "mppi-lab-cli-test";

int run(const std::string& args) {
  const std::string cmd =
      std::string(MPPI_LAB_EXE) + " " + args + " > " + (kOut / "log.txt").string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  fs::create_directories(kOut);
  CHECK(run("") == 2);
  CHECK(run("frobnicate quartic") == 2);
  CHECK(run("solve") == 2);
  CHECK(run("solve no-such-scenario") == 2);
  CHECK(run("solve quartic --samples -3") == 2);
  CHECK(run("accept --only no-such-criterion --out-dir " + kOut.string()) == 2);
  CHECK(run("solve quartic --config /nonexistent.ini") == 2);
  CHECK(run("solve quartic --init-control 0.1,0.2 --out-dir " + kOut.string()) == 2);
  const auto log = lines(kOut / "log.txt");
  REQUIRE_FALSE(log.empty());
  CHECK(log[0].find("init_control") != std::string::npos);
}

TEST_CASE("numeric failures exit with 3") {
  fs::create_directories(kOut);
  // a flat density at beta = 10 reaches the pdf grid edge
  CHECK(run("pdf-curve quartic --beta-list 10 --out-dir " + kOut.string()) == 3);
}

TEST_CASE("solve writes the iterate history") {
  fs::remove_all(kOut);
  fs::create_directories(kOut);
  REQUIRE(run("solve quartic --iterations 1 --samples 2000 --out-dir " + kOut.string()) == 0);
  const auto csv = lines(kOut / "solve-quartic.csv");
  REQUIRE(csv.size() == 3);
  CHECK(csv[0].find("config_hash=") != std::string::npos);
  CHECK(csv[0].find("seed=1") != std::string::npos);
  CHECK(fs::exists(kOut / "run-solve-quartic.json"));

  REQUIRE(run("solve arctan2 --iterations 10 --seed 1 --out-dir " + kOut.string()) == 0);
  const auto arctan = lines(kOut / "solve-arctan2.csv");
  REQUIRE(arctan.size() == 12);
  // columns j,beta,lambda,u_0,u_1,value,control_error,...
  std::string last = arctan.back();
  for (int skip = 0; skip < 6; ++skip) last = last.substr(last.find(',') + 1);
  CHECK(std::stod(last.substr(0, last.find(','))) <= 1e-2);
}

TEST_CASE("config file and flag precedence") {
  fs::create_directories(kOut);
  {
    std::ofstream ini(kOut / "cfg.ini");
    ini << "[solver]\nsamples = 1000\niterations = 3\nseed = 4\n";
  }
  REQUIRE(run("solve quartic --config " + (kOut / "cfg.ini").string() +
              " --iterations 2 --out-dir " + kOut.string()) == 0);
  const auto csv = lines(kOut / "solve-quartic.csv");
  CHECK(csv.size() == 4);  // flag beats file: 2 iterations
  CHECK(csv[0].find("seed=4") != std::string::npos);
}
