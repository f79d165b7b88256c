#ifndef MPPI_LAB_SCENARIOS_HPP_
#define MPPI_LAB_SCENARIOS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mppi_lab/mppi.hpp"
#include "mppi_lab/oracles.hpp"
#include "mppi_lab/problem.hpp"

namespace mppi_lab {

// Scalar scenario description; every field maps to one `key = value` line of
// the INI form under [problem], [solver], [oracle] or [sweep].
//
// dynamics:  integrator   x+ = x + u + w
//            sine-drift   x+ = x - a sin(b x) + u + w,  params (a, b)
//            arctan       x+ = x + arctan(u + w)
// terminal:  polynomial   E = sum_k p_k x^k,            params (p_0, p_1, ...)
//            shifted-sextic E = (x - c)^6 + t x,        params (c, t)
struct ScenarioSpec {
  std::string name;

  std::string dynamics = "integrator";
  std::vector<double> dynamics_params;
  std::string terminal = "polynomial";
  std::vector<double> terminal_params;
  int horizon = 1;
  double x0 = 0.0;
  double r = 1.0;       // control weight
  double lambda = 1.0;  // CLS temperature
  double sigma = 1.0;   // per-step noise variance

  int samples = 100000;
  int iterations = 10;
  double shrink_factor = 0.70710678118654752;
  double lambda0 = 1.0;
  double sigma0 = 1.0;
  std::uint64_t seed = 1;
  int workers = 1;
  std::vector<double> init_control;  // empty: zero trajectory

  double box_lo = -2.0;
  double box_hi = 2.0;
  int grid_points = 401;
  int quadrature_order = 20;  // OLS, per noise dimension
  int cls_quadrature_order = 40;
  int cls_grid_points = 801;
  long ols_max_evaluations = 20'000'000;
  double gibbs_tol = 1e-10;

  std::vector<double> betas;
  std::vector<std::uint64_t> seeds;
  std::string mode = "exact";
  std::vector<double> pdf_betas;
  double pdf_lo = -1.5;
  double pdf_hi = 1.5;
  int pdf_points = 3001;

  friend bool operator==(const ScenarioSpec&, const ScenarioSpec&) = default;
};

std::vector<std::string> scenario_names();

// Throws kUnknownScenario listing the registered names.
ScenarioSpec find_scenario(const std::string& name);

// Throws kConfig on unknown dynamics/terminal kinds or bad parameter counts.
OcpInstance build_instance(const ScenarioSpec& spec);

MppiConfig solver_config(const ScenarioSpec& spec, const OcpInstance& inst);
SearchBox oracle_box(const ScenarioSpec& spec);

// Lossless INI round trip (doubles written with 17 significant digits).
// Parsing rejects unknown sections and keys with kConfig.
std::string to_ini(const ScenarioSpec& spec);
ScenarioSpec from_ini(const std::string& text);
// Keys present in `text` override `base`; unknown keys rejected.
ScenarioSpec merge_ini(const ScenarioSpec& base, const std::string& text);

// FNV-1a of to_ini(spec), 16 hex digits.
std::string config_hash(const ScenarioSpec& spec);

std::vector<double> logspace(double lo, double hi, int count);

}  // namespace mppi_lab

#endif  // MPPI_LAB_SCENARIOS_HPP_
