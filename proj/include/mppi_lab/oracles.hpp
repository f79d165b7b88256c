#ifndef MPPI_LAB_ORACLES_HPP_
#define MPPI_LAB_ORACLES_HPP_

#include <Eigen/Core>

#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mppi_lab/problem.hpp"
#include "mppi_lab/trajectory.hpp"

namespace mppi_lab {

// Axis-aligned search box over the flat control trajectory.
struct SearchBox {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static SearchBox uniform(int dim, double lo, double hi);
};

struct GridOptions {
  int points_per_axis = 401;
  int refinement_depth = 40;
  double min_step = 1e-7;
  // caps points_per_axis^dim * evaluation cost
  long max_evaluations = 4'000'000;
};

// u*_k(x) on a state grid for stage k >= 1 of the closed-loop problem.
struct PolicyTable {
  int stage = 1;
  Eigen::VectorXd states;
  Eigen::VectorXd controls;
  Eigen::VectorXd values;
  int boundary_hits = 0;  // grid states whose inner argmin sat on the box edge

  double control_at(double x) const;
};

struct OracleSolution {
  ControlTrajectory minimizer;  // for CLS: u0* then the policy along x_nominal
  double value = 0.0;
  std::string method;
  double certified_tolerance = 0.0;
  int grid_points_per_axis = 0;
  double final_step = 0.0;
  int quadrature_order = 0;
  // |V(Q) - V(2Q)| at the minimizer, OLS only
  double quadrature_change = 0.0;
  std::vector<PolicyTable> policies;
};

// Dense grid scan of f over the box followed by coordinate refinement with
// step halving. Throws kBoundaryHit when the argmin lies on the box boundary.
struct GridMinimum {
  Eigen::VectorXd argmin;
  double value = 0.0;
  int points_per_axis = 0;
  double final_step = 0.0;
};
GridMinimum grid_minimize(const std::function<double(const VectorRef&)>& f,
                          const SearchBox& box, const GridOptions& options,
                          long cost_per_evaluation = 1);

// argmin_U J(U, 0); needs N*n_u <= 4.
OracleSolution det_ocp_oracle(const OcpInstance& inst, const SearchBox& box,
                              const GridOptions& options = {});

// argmin_U E_W J(U, W) with W ~ N(0, sigma) by tensor Gauss-Hermite;
// needs N*n_w <= 3. The grid budget is divided by the node count.
OracleSolution ols_ocp_oracle(const OcpInstance& inst, int quadrature_order,
                              const SearchBox& box,
                              const GridOptions& options = {});

struct ClsOptions {
  int quadrature_order = 40;
  double first_lo = -4.0;  // search interval for u0
  double first_hi = 4.0;
  double policy_lo = -12.0;  // search interval for u_k, k >= 1
  double policy_hi = 12.0;
  int grid_points = 801;
  int scan_points = 201;
  // re-solve with 2x quadrature order and on a 2x refined state grid; the
  // certified tolerance is twice the sum of both changes
  bool certify = true;
};

// Backward induction for scalar state/control/noise and N <= 2: value tables
// V_k on state grids auto-sized to the quadrature-reachable set, cubic
// spline interpolation between grid points, then u0* by forward
// minimization. Throws kGridExtent if an evaluation leaves a grid.
OracleSolution cls_ocp_oracle(const OcpInstance& inst,
                              const ClsOptions& options = {});

struct GibbsOptions {
  double beta = 1.0;
  double lambda0 = 1.0;
  SearchBox box;  // integration box over W
  double abs_tol = 1e-10;
  int max_depth = 18;
};

struct GibbsResult {
  ControlTrajectory mean;
  double error_estimate = 0.0;
  Eigen::VectorXd mode;  // argmin of the exponent
};

// E[W] under q*(W) ~ exp(-[S(W) + lambda0/2 W' Sigma0^-1 W] / (beta^2
// lambda0)) by adaptive Gauss-Kronrod quadrature (nested in 2-D); needs
// N*n_u <= 2. Throws kIntegrationBudget if abs_tol is not reached.
GibbsResult gibbs_mean(const OcpInstance& inst, const GibbsOptions& options);

// (W, q*_beta(W)) on a uniform scalar grid, trapezoid-normalized. Throws
// kGridExtent when the boundary density exceeds 1e-8 of the peak.
std::vector<std::pair<double, double>> optimal_density_curve(
    const OcpInstance& inst, double beta, double lambda0,
    const std::vector<double>& grid);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of log-residuals
  int used = 0;
  std::vector<std::string> warnings;
};

// Least-squares line through (log beta, log error) for beta in [lo, hi].
// Nonpositive errors are skipped with a warning; fewer than 4 usable points
// throws kInsufficientData.
SlopeFit slope_fit(const std::vector<std::pair<double, double>>& points,
                   double window_lo = 0.0,
                   double window_hi = std::numeric_limits<double>::infinity());

}  // namespace mppi_lab

#endif  // MPPI_LAB_ORACLES_HPP_
