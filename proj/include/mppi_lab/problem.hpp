#ifndef MPPI_LAB_PROBLEM_HPP_
#define MPPI_LAB_PROBLEM_HPP_

#include <Eigen/Core>

#include <functional>
#include <vector>

#include "mppi_lab/covariance.hpp"
#include "mppi_lab/trajectory.hpp"

namespace mppi_lab {

using VectorRef = Eigen::Ref<const Eigen::VectorXd>;

enum class DynamicsKind { kGeneral, kInputAffine };

// x+ = f(x, u, w). Models are immutable after construction and safe to share
// across threads.
struct DynamicsModel {
  using StepFn = std::function<StateVector(const StateVector&, const VectorRef&,
                                           const VectorRef&)>;
  using VectorMap = std::function<Eigen::VectorXd(const StateVector&)>;
  using MatrixMap = std::function<Eigen::MatrixXd(const StateVector&)>;

  int state_dim = 0;
  int control_dim = 0;
  int noise_dim = 0;
  DynamicsKind kind = DynamicsKind::kGeneral;
  StepFn step;

  // input-affine parts x+ = drift(x) + B(x) u + G(x) w; empty for kGeneral.
  // G is the noise input for unit-covariance noise.
  VectorMap drift;
  MatrixMap control_input;
  MatrixMap noise_input;

  static DynamicsModel general(int nx, int nu, int nw, StepFn step);
  // step is composed from the parts, so the affine identity holds exactly
  static DynamicsModel input_affine(int nx, int nu, int nw, VectorMap drift,
                                    MatrixMap control_input,
                                    MatrixMap noise_input);
};

// L(x, u) = c(x) + 1/2 u^T R(x) u, terminal cost E(x).
struct CostModel {
  using ScalarMap = std::function<double(const StateVector&)>;

  ScalarMap state_cost;
  DynamicsModel::MatrixMap control_weight;
  ScalarMap terminal_cost;
  bool constant_weight = true;

  static CostModel make(ScalarMap state_cost, Eigen::MatrixXd control_weight,
                        ScalarMap terminal_cost);

  double stage(const StateVector& x, const VectorRef& u) const;
};

struct OcpInstance {
  DynamicsModel dynamics;
  CostModel cost;
  int horizon = 1;
  StateVector initial_state;
  CovarianceSpec sigma;
  double lambda = 1.0;

  int control_size() const { return horizon * dynamics.control_dim; }
  int noise_size() const { return horizon * dynamics.noise_dim; }

  // throws kContractViolation on inconsistent dimensions or lambda <= 0
  void validate() const;
};

ControlTrajectory zero_controls(const OcpInstance& inst);
NoiseTrajectory zero_noise(const OcpInstance& inst);

// States x_0..x_N of x_{k+1} = f(x_k, u_k, w_k), x_0 = initial state.
// Throws kNumericOverflow naming the step if a state goes non-finite.
std::vector<StateVector> rollout(const OcpInstance& inst,
                                 const ControlTrajectory& u,
                                 const NoiseTrajectory& w);

// J(U, W) = sum_k L(x_k, u_k) + E(x_N)
double overall_cost(const OcpInstance& inst, const ControlTrajectory& u,
                    const NoiseTrajectory& w);

// S(V) = E(x_N) + sum_k c(x_k) along x_{k+1} = f(x_k, v_k, 0)
double path_cost(const OcpInstance& inst, const NoiseTrajectory& v);

// Non-throwing path cost for hot sampling loops: returns +inf when the
// rollout or the cost goes non-finite. v must have length N*n_u.
double path_cost_or_inf(const OcpInstance& inst, const VectorRef& v);

// Non-throwing overall cost on flat vectors; +inf when non-finite.
double overall_cost_or_inf(const OcpInstance& inst, const VectorRef& u,
                           const VectorRef& w);

struct Assumption1Report {
  bool holds = false;
  double max_residual = 0.0;
  StateVector worst_state;
};

// Checks ||lambda B R^{-1} B^T - G G^T||_F <= tol at every probe state.
Assumption1Report check_assumption1(const DynamicsModel& dyn,
                                    const CostModel& cost, double lambda,
                                    const std::vector<StateVector>& probes,
                                    double tol = 1e-8);

// Quasi-random (Sobol) probe states in the box [lo, hi].
std::vector<StateVector> probe_states(const StateVector& lo,
                                      const StateVector& hi, int count = 100);

// x+ = f~(x) + Bbar(x)(ubar + wbar), Bbar = B R^{-1/2}, u = R^{-1/2} ubar,
// wbar ~ N(0, lambda I), identity control weight.
struct CanonicalForm {
  DynamicsModel dynamics;
  CostModel cost;
  double noise_variance = 1.0;

  std::function<Eigen::VectorXd(const StateVector&, const VectorRef&)>
      control_to_canonical;
  std::function<Eigen::VectorXd(const StateVector&, const VectorRef&)>
      control_from_canonical;
  // maps a unit-covariance original noise step w to wbar with Bbar wbar = G w
  std::function<Eigen::VectorXd(const StateVector&, const VectorRef&)>
      noise_to_canonical;
};

// Throws kUnsupportedModel for general dynamics and kTransformationInvalid
// when lambda B R^-1 B^T = G G^T fails beyond tol at any probe state.
CanonicalForm to_canonical(const DynamicsModel& dyn, const CostModel& cost,
                           double lambda,
                           const std::vector<StateVector>& probes,
                           double tol = 1e-8);

// Maps a matched original trajectory pair (U, W) to (Ubar, Wbar) along the
// original rollout, so both forms visit the same states.
std::pair<ControlTrajectory, NoiseTrajectory> canonical_trajectories(
    const OcpInstance& original, const CanonicalForm& form,
    const ControlTrajectory& u, const NoiseTrajectory& w);

// Symmetric matrix power via eigendecomposition (p = 1/2 or -1/2 here).
Eigen::MatrixXd symmetric_power(const Eigen::MatrixXd& m, double p);

}  // namespace mppi_lab

#endif  // MPPI_LAB_PROBLEM_HPP_
