#ifndef MPPI_LAB_EXPERIMENTS_HPP_
#define MPPI_LAB_EXPERIMENTS_HPP_

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mppi_lab/mppi.hpp"
#include "mppi_lab/oracles.hpp"
#include "mppi_lab/scenarios.hpp"

namespace mppi_lab {

struct Verdict {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunRecord {
  std::string scenario;
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> outputs;
  double wall_time = 0.0;
  std::vector<Verdict> verdicts;
  std::vector<std::string> summary;

  bool all_passed() const;
};

// run-<command>-<scenario>.json in out_dir; appends itself to outputs
void write_run_record(RunRecord& rec, const std::filesystem::path& out_dir);

// DET oracle for the scenario; read from / written to
// <cache_dir>/det-<config hash>.json when cache_dir is given.
OracleSolution det_oracle_cached(
    const ScenarioSpec& spec,
    const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

struct BiasPoint {
  double beta = 0.0;
  Eigen::VectorXd estimate;
  double control_error = 0.0;  // ||U(beta) - U*_det||_2
  double value_gap = 0.0;      // J(U(beta), 0) - V_det
  double control_se = 0.0;     // sampled mode only
  double value_se = 0.0;
};

struct BiasSweep {
  std::vector<BiasPoint> points;
  std::optional<SlopeFit> control_fit;
  std::optional<SlopeFit> value_fit;
  std::vector<std::string> warnings;
  double seconds = 0.0;
};

// exact: gibbs_mean per beta. sampled: one standard MPPI step from U = 0 per
// (beta, seed), averaged over spec.seeds with standard errors.
BiasSweep bias_sweep(const ScenarioSpec& spec, const OracleSolution& det);

// Writes the CSV preamble: "# scenario=... config_hash=... seed=..." then
// the header row.
void write_csv_preamble(std::ostream& out, const ScenarioSpec& spec,
                        const std::string& header);

RunRecord cmd_solve(const ScenarioSpec& spec,
                    const std::filesystem::path& out_dir);
RunRecord cmd_bias_sweep(const ScenarioSpec& spec,
                         const std::filesystem::path& out_dir);
RunRecord cmd_pdf_curve(const ScenarioSpec& spec,
                        const std::filesystem::path& out_dir);

struct Comparison {
  OracleSolution det;
  OracleSolution ols;
  OracleSolution cls;
  SolveReport deterministic;  // shrinking-noise iterates
  Eigen::VectorXd standard_u;  // one standard MPPI step at beta = 1
  Eigen::VectorXd standard_se;
  bool input_affine = false;
};

Comparison compare_solutions(const ScenarioSpec& spec);

// Input-affine scenarios assert |u0(standard MPPI) - u0(CLS)| <= 3 (SE +
// tol); general ones assert the shrinking-noise endpoint is within 1e-2 of DET.
RunRecord cmd_compare(const ScenarioSpec& spec,
                      const std::filesystem::path& out_dir);

}  // namespace mppi_lab

#endif  // MPPI_LAB_EXPERIMENTS_HPP_
