// mppi-lab <solve|bias-sweep|pdf-curve|compare|accept> <scenario> [flags]
//
// Settings precedence: registered scenario defaults < --config file < flags.
// Exit codes: 0 ok, 1 criterion failure, 2 usage error, 3 numeric/oracle error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "mppi_lab/acceptance.hpp"
#include "mppi_lab/experiments.hpp"

namespace fs = std::filesystem;
using namespace mppi_lab;

namespace {

constexpr int kOk = 0;
constexpr int kCriterionFailure = 1;
constexpr int kUsage = 2;
constexpr int kNumeric = 3;

struct Flags {
  std::string command;
  std::string scenario;
  std::string config;
  std::string out_dir = "out";
  std::string only;
  std::optional<int> samples;
  std::optional<int> iterations;
  std::optional<double> shrink_factor;
  std::optional<double> lambda0;
  std::optional<double> sigma0;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<std::string> mode;
  std::vector<double> beta_list;
  std::vector<double> init_control;
};

ScenarioSpec resolve(const Flags& f) {
  ScenarioSpec spec = find_scenario(f.scenario);
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw Error(ErrorCode::kConfig, "cannot read config " + f.config);
    std::stringstream text;
    text << in.rdbuf();
    spec = merge_ini(spec, text.str());
  }
  if (f.samples) spec.samples = *f.samples;
  if (f.iterations) spec.iterations = *f.iterations;
  if (f.shrink_factor) spec.shrink_factor = *f.shrink_factor;
  if (f.lambda0) spec.lambda0 = *f.lambda0;
  if (f.sigma0) spec.sigma0 = *f.sigma0;
  if (f.seed) spec.seed = *f.seed;
  if (f.workers) spec.workers = *f.workers;
  if (f.mode) spec.mode = *f.mode;
  if (!f.init_control.empty()) spec.init_control = f.init_control;
  if (!f.beta_list.empty()) {
    spec.betas = f.beta_list;
    spec.pdf_betas = f.beta_list;
  }
  return spec;
}

void report(const RunRecord& rec) {
  for (const auto& line : rec.summary) std::cout << line << '\n';
  for (const auto& v : rec.verdicts) {
    std::cout << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << '\n';
  }
  for (const auto& path : rec.outputs) std::cout << "wrote " << path << '\n';
}

int run_accept(const Flags& f) {
  const auto results = run_acceptance(f.only, &std::cout);
  nlohmann::json j = nlohmann::json::array();
  int failed = 0;
  for (const auto& r : results) {
    j.push_back({{"name", r.name}, {"passed", r.passed}, {"errored", r.errored},
                 {"detail", r.detail}, {"seconds", r.seconds}});
    if (!r.passed) ++failed;
  }
  fs::create_directories(f.out_dir);
  const fs::path path = fs::path(f.out_dir) / "accept.json";
  std::ofstream(path) << j.dump(2) << '\n';
  std::cout << results.size() - failed << "/" << results.size()
            << " criteria passed; report " << path.string() << '\n';
  return failed == 0 ? kOk : kCriterionFailure;
}

int dispatch(const Flags& f) {
  if (f.command == "accept") return run_accept(f);
  if (f.scenario.empty()) {
    throw Error(ErrorCode::kContractViolation,
                f.command + " needs a scenario; registered: " + [] {
                  std::string s;
                  for (const auto& n : scenario_names()) s += n + " ";
                  return s;
                }());
  }
  const ScenarioSpec spec = resolve(f);
  const fs::path out = f.out_dir;
  RunRecord rec;
  if (f.command == "solve") {
    rec = cmd_solve(spec, out);
  } else if (f.command == "bias-sweep") {
    rec = cmd_bias_sweep(spec, out);
  } else if (f.command == "pdf-curve") {
    rec = cmd_pdf_curve(spec, out);
  } else {
    rec = cmd_compare(spec, out);
  }
  write_run_record(rec, out);
  report(rec);
  return rec.all_passed() ? kOk : kCriterionFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MPPI suboptimality lab"};
  Flags f;
  app.add_option("command", f.command, "solve | bias-sweep | pdf-curve | compare | accept")
      ->required()
      ->check(CLI::IsMember({"solve", "bias-sweep", "pdf-curve", "compare", "accept"}));
  app.add_option("scenario", f.scenario, "registered scenario name");
  app.add_option("--config", f.config, "INI file overriding scenario defaults");
  app.add_option("--samples", f.samples, "samples per iteration M")->check(CLI::PositiveNumber);
  app.add_option("--iterations", f.iterations, "iterations I")->check(CLI::PositiveNumber);
  app.add_option("--shrink-factor", f.shrink_factor, "nu in (0, 1)");
  app.add_option("--lambda0", f.lambda0, "initial temperature");
  app.add_option("--sigma0", f.sigma0, "initial per-step variance");
  app.add_option("--seed", f.seed, "master seed");
  app.add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--beta-list", f.beta_list, "comma-separated betas")->delimiter(',');
  app.add_option("--init-control", f.init_control, "comma-separated initial mean")
      ->delimiter(',');
  app.add_option("--mode", f.mode, "bias-sweep mode")
      ->check(CLI::IsMember({"exact", "sampled"}));
  app.add_option("--out-dir", f.out_dir, "output directory");
  app.add_option("--only", f.only, "accept: criterion name or group");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  try {
    return dispatch(f);
  } catch (const Error& e) {
    std::cerr << "mppi-lab: " << to_string(e.code()) << ": " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::kContractViolation:
      case ErrorCode::kUnknownScenario:
      case ErrorCode::kConfig:
        return kUsage;
      default:
        return kNumeric;
    }
  } catch (const std::exception& e) {
    std::cerr << "mppi-lab: " << e.what() << '\n';
    return kNumeric;
  }
}
