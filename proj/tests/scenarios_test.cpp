#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mppi_lab/experiments.hpp"
#include "mppi_lab/scenarios.hpp"

using namespace mppi_lab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mppi-lab-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// The constructed quartic landscape: a secondary local minimum at U = -1/2
// with J = 1/4, found by a local grid search of J(U, 0).
bool quartic_landscape_holds(const ScenarioSpec& spec) {
  const OcpInstance inst = build_instance(spec);
  const auto j = [&](const VectorRef& u) {
    return value_of(inst, ControlTrajectory(1, 1, Eigen::VectorXd(u)));
  };
  try {
    const GridMinimum m = grid_minimize(j, SearchBox::uniform(1, -0.7, -0.45), {});
    return std::abs(m.argmin[0] + 0.5) <= 1e-6 && std::abs(m.value - 0.25) <= 1e-9;
  } catch (const Error&) {
    return false;
  }
}

}  // namespace

TEST_CASE("registry contents") {
  const auto names = scenario_names();
  for (const char* required : {"quartic", "affine2", "arctan2", "lq1", "sym2"}) {
    CHECK(std::find(names.begin(), names.end(), required) != names.end());
  }
  try {
    find_scenario("nope");
    FAIL("expected unknown-scenario");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUnknownScenario);
    CHECK(std::string(e.what()).find("quartic") != std::string::npos);
  }
}

TEST_CASE("quartic scenario has the constructed landscape") {
  const OcpInstance inst = build_instance(find_scenario("quartic"));
  for (double u : {-0.7, -0.5, -0.4, -0.1, 0.0, 0.3}) {
    const ControlTrajectory ut(1, 1, Eigen::VectorXd::Constant(1, u));
    CHECK(value_of(inst, ut) ==
          doctest::Approx(20 * std::pow(u, 4) + 24 * std::pow(u, 3) + 8 * u * u));
  }
  CHECK(quartic_landscape_holds(find_scenario("quartic")));
}

TEST_CASE("tampered cubic coefficient breaks the quartic landscape check") {
  ScenarioSpec tampered = find_scenario("quartic");
  // c3 = 150 instead of 144, i.e. terminal cubic coefficient 150 / 6
  tampered.terminal_params[3] = 25.0;
  CHECK_FALSE(quartic_landscape_holds(tampered));
  // the global minimizer is untouched, so only the landscape check notices
  const OracleSolution d = det_ocp_oracle(build_instance(tampered), oracle_box(tampered));
  CHECK(std::abs(d.minimizer[0]) <= d.certified_tolerance);
}

TEST_CASE("INI round trip and validation") {
  for (const auto& name : scenario_names()) {
    CAPTURE(name);
    const ScenarioSpec s = find_scenario(name);
    CHECK(from_ini(to_ini(s)) == s);
  }
  ScenarioSpec s = find_scenario("quartic");
  s.init_control = {0.6};
  s.shrink_factor = 0.1 + 0.2;  // not exactly representable in short decimal
  CHECK(from_ini(to_ini(s)) == s);

  const ScenarioSpec merged =
      merge_ini(find_scenario("arctan2"), "[solver]\nsamples = 500\nseed = 9\n");
  CHECK(merged.samples == 500);
  CHECK(merged.seed == 9);
  CHECK(merged.dynamics == "arctan");

  for (const char* bad : {"[solver]\nsamplez = 5\n", "[extra]\nkey = 1\n",
                          "[solver]\nsamples = many\n"}) {
    CAPTURE(bad);
    try {
      merge_ini(s, bad);
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
  }

  ScenarioSpec wrong = find_scenario("quartic");
  wrong.dynamics = "teleport";
  CHECK_THROWS_AS(build_instance(wrong), Error);
  wrong = find_scenario("arctan2");
  wrong.init_control = {1.0};
  CHECK_THROWS_AS(solver_config(wrong, build_instance(wrong)), Error);
}

TEST_CASE("config hash is deterministic and sensitive") {
  const ScenarioSpec a = find_scenario("affine2");
  CHECK(config_hash(a) == config_hash(find_scenario("affine2")));
  CHECK(config_hash(a).size() == 16);
  ScenarioSpec b = a;
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("solve CSVs are byte-identical across runs") {
  ScenarioSpec spec = find_scenario("affine2");
  spec.samples = 20000;
  const fs::path d1 = scratch("solve-a"), d2 = scratch("solve-b");
  cmd_solve(spec, d1);
  spec.workers = 4;  // worker count is not part of the result
  cmd_solve(spec, d2);
  const std::string a = slurp(d1 / "solve-affine2.csv");
  const std::string b = slurp(d2 / "solve-affine2.csv");
  // the preamble hashes the config, which includes the worker count
  CHECK(a.substr(a.find('\n')) == b.substr(b.find('\n')));
  CHECK(a.rfind("# scenario=affine2 config_hash=", 0) == 0);

  spec.workers = 1;
  cmd_solve(spec, d2);
  CHECK(slurp(d2 / "solve-affine2.csv") == a);
}

TEST_CASE("solve with one iteration writes one row") {
  ScenarioSpec spec = find_scenario("quartic");
  spec.iterations = 1;
  spec.samples = 5000;
  const fs::path d = scratch("solve-one");
  const RunRecord rec = cmd_solve(spec, d);
  std::ifstream in(d / "solve-quartic.csv");
  std::string line;
  int rows = 0;
  std::getline(in, line);
  CHECK(line.rfind("# ", 0) == 0);
  std::getline(in, line);
  CHECK(line.rfind("j,beta,lambda,u_0,value", 0) == 0);
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 1);
  CHECK(rec.all_passed());
}

TEST_CASE("exact bias sweep at a single beta is the Gibbs-mean error") {
  ScenarioSpec spec = find_scenario("quartic");
  spec.betas = {0.05};
  const OracleSolution det = det_oracle_cached(spec);
  const BiasSweep sweep = bias_sweep(spec, det);
  REQUIRE(sweep.points.size() == 1);
  GibbsOptions o;
  o.beta = 0.05;
  o.box = oracle_box(spec);
  const double g = gibbs_mean(build_instance(spec), o).mean[0];
  CHECK(sweep.points[0].control_error == doctest::Approx(std::abs(g - det.minimizer[0])));
  CHECK_FALSE(sweep.control_fit.has_value());
  CHECK_FALSE(sweep.warnings.empty());
}

TEST_CASE("sampled standard errors shrink with the sample count") {
  ScenarioSpec spec = find_scenario("quartic");
  spec.mode = "sampled";
  spec.betas = {0.5};
  const OracleSolution det = det_oracle_cached(spec);
  spec.samples = 1000;
  const double small = bias_sweep(spec, det).points[0].control_se;
  spec.samples = 100000;
  const double large = bias_sweep(spec, det).points[0].control_se;
  CHECK(small / large > 6.0);
  CHECK(small / large < 16.0);
}

TEST_CASE("pdf-curve output is normalized") {
  ScenarioSpec spec = find_scenario("quartic");
  spec.pdf_betas = {1.0, 0.1};
  const fs::path d = scratch("pdf");
  const RunRecord rec = cmd_pdf_curve(spec, d);
  int curves = 0;
  for (const auto& out : rec.outputs) {
    if (out.find(".csv") == std::string::npos) continue;
    ++curves;
    std::ifstream in(out);
    std::string line;
    double prev_w = 0, prev_q = 0, mass = 0;
    bool first = true;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || !(std::isdigit(line[0]) || line[0] == '-')) continue;
      const auto comma = line.find(',');
      // strtod, not stod: subnormal tail densities are valid values
      const double w = std::strtod(line.c_str(), nullptr);
      const double q = std::strtod(line.c_str() + comma + 1, nullptr);
      if (!first) mass += 0.5 * (q + prev_q) * (w - prev_w);
      first = false;
      prev_w = w;
      prev_q = q;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(curves == 2);
}

TEST_CASE("symmetric scenario: every oracle returns zero") {
  const Comparison c = compare_solutions(find_scenario("sym2"));
  CHECK(c.det.minimizer.values().cwiseAbs().maxCoeff() <= c.det.certified_tolerance);
  CHECK(c.ols.minimizer.values().cwiseAbs().maxCoeff() <= c.ols.certified_tolerance);
  CHECK(c.cls.minimizer.values().cwiseAbs().maxCoeff() <= c.cls.certified_tolerance);
}
