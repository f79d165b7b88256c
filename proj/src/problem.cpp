#include "mppi_lab/problem.hpp"

#include <Eigen/Dense>
#include <boost/random/sobol.hpp>
#include <boost/random/uniform_01.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace mppi_lab {

DynamicsModel DynamicsModel::general(int nx, int nu, int nw, StepFn step) {
  require(nx >= 1 && nu >= 1 && nw >= 1, "dynamics dimensions must be >= 1");
  DynamicsModel m;
  m.state_dim = nx;
  m.control_dim = nu;
  m.noise_dim = nw;
  m.kind = DynamicsKind::kGeneral;
  m.step = std::move(step);
  return m;
}

DynamicsModel DynamicsModel::input_affine(int nx, int nu, int nw,
                                          VectorMap drift,
                                          MatrixMap control_input,
                                          MatrixMap noise_input) {
  require(nx >= 1 && nu >= 1 && nw >= 1, "dynamics dimensions must be >= 1");
  DynamicsModel m;
  m.state_dim = nx;
  m.control_dim = nu;
  m.noise_dim = nw;
  m.kind = DynamicsKind::kInputAffine;
  m.step = [drift, control_input, noise_input](const StateVector& x,
                                               const VectorRef& u,
                                               const VectorRef& w) {
    StateVector next = drift(x);
    next.noalias() += control_input(x) * u;
    next.noalias() += noise_input(x) * w;
    return next;
  };
  m.drift = std::move(drift);
  m.control_input = std::move(control_input);
  m.noise_input = std::move(noise_input);
  return m;
}

CostModel CostModel::make(ScalarMap state_cost, Eigen::MatrixXd control_weight,
                          ScalarMap terminal_cost) {
  require(control_weight.rows() == control_weight.cols() &&
              control_weight.rows() >= 1,
          "control weight must be square");
  CostModel c;
  c.state_cost = std::move(state_cost);
  c.control_weight = [r = std::move(control_weight)](const StateVector&) {
    return r;
  };
  c.terminal_cost = std::move(terminal_cost);
  c.constant_weight = true;
  return c;
}

double CostModel::stage(const StateVector& x, const VectorRef& u) const {
  return state_cost(x) + 0.5 * u.dot(control_weight(x) * u);
}

void OcpInstance::validate() const {
  require(horizon >= 1, "horizon must be >= 1");
  require(lambda > 0.0 && std::isfinite(lambda), "lambda must be > 0");
  require(initial_state.size() == dynamics.state_dim,
          "initial state dimension != n_x");
  require(initial_state.allFinite(), "initial state must be finite");
  require(static_cast<bool>(dynamics.step), "dynamics step is empty");
  require(cost.state_cost && cost.control_weight && cost.terminal_cost,
          "cost model is incomplete");
  require(sigma.step_dim() == dynamics.noise_dim,
          "covariance step dimension != n_w");
  require(sigma.horizon() == horizon, "covariance horizon != N");
}

ControlTrajectory zero_controls(const OcpInstance& inst) {
  return ControlTrajectory(inst.horizon, inst.dynamics.control_dim);
}

NoiseTrajectory zero_noise(const OcpInstance& inst) {
  return NoiseTrajectory(inst.horizon, inst.dynamics.noise_dim);
}

namespace {

void check_dims(const OcpInstance& inst, const ControlTrajectory& u,
                const NoiseTrajectory& w) {
  require(u.horizon() == inst.horizon &&
              u.step_dim() == inst.dynamics.control_dim,
          "control trajectory does not match N*n_u");
  require(w.horizon() == inst.horizon &&
              w.step_dim() == inst.dynamics.noise_dim,
          "noise trajectory does not match N*n_w");
}

void check_state(const StateVector& x, int k) {
  if (!x.allFinite()) {
    throw Error(ErrorCode::kNumericOverflow,
                "rollout produced a non-finite state at step " +
                    std::to_string(k),
                k);
  }
}

}  // namespace

std::vector<StateVector> rollout(const OcpInstance& inst,
                                 const ControlTrajectory& u,
                                 const NoiseTrajectory& w) {
  check_dims(inst, u, w);
  std::vector<StateVector> states;
  states.reserve(inst.horizon + 1);
  states.push_back(inst.initial_state);
  for (int k = 0; k < inst.horizon; ++k) {
    StateVector next = inst.dynamics.step(states.back(), u.step(k), w.step(k));
    require(next.size() == inst.dynamics.state_dim,
            "dynamics returned a state of wrong dimension");
    check_state(next, k);
    states.push_back(std::move(next));
  }
  return states;
}

double overall_cost(const OcpInstance& inst, const ControlTrajectory& u,
                    const NoiseTrajectory& w) {
  const auto states = rollout(inst, u, w);
  double total = 0.0;
  for (int k = 0; k < inst.horizon; ++k) {
    total += inst.cost.stage(states[k], u.step(k));
  }
  total += inst.cost.terminal_cost(states.back());
  if (!std::isfinite(total)) {
    throw Error(ErrorCode::kNumericOverflow,
                "overall cost is non-finite at terminal step " +
                    std::to_string(inst.horizon),
                inst.horizon);
  }
  return total;
}

double path_cost(const OcpInstance& inst, const NoiseTrajectory& v) {
  require(v.horizon() == inst.horizon &&
              v.step_dim() == inst.dynamics.control_dim,
          "path cost input must have length N*n_u");
  const Eigen::VectorXd zero_w = Eigen::VectorXd::Zero(inst.dynamics.noise_dim);
  StateVector x = inst.initial_state;
  double total = 0.0;
  for (int k = 0; k < inst.horizon; ++k) {
    total += inst.cost.state_cost(x);
    x = inst.dynamics.step(x, v.step(k), zero_w);
    check_state(x, k);
  }
  total += inst.cost.terminal_cost(x);
  if (!std::isfinite(total)) {
    throw Error(ErrorCode::kNumericOverflow,
                "path cost is non-finite at terminal step " +
                    std::to_string(inst.horizon),
                inst.horizon);
  }
  return total;
}

double path_cost_or_inf(const OcpInstance& inst, const VectorRef& v) {
  const int nu = inst.dynamics.control_dim;
  const Eigen::VectorXd zero_w = Eigen::VectorXd::Zero(inst.dynamics.noise_dim);
  StateVector x = inst.initial_state;
  double total = 0.0;
  for (int k = 0; k < inst.horizon; ++k) {
    total += inst.cost.state_cost(x);
    x = inst.dynamics.step(x, v.segment(k * nu, nu), zero_w);
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  }
  total += inst.cost.terminal_cost(x);
  return std::isfinite(total) ? total
                              : std::numeric_limits<double>::infinity();
}

double overall_cost_or_inf(const OcpInstance& inst, const VectorRef& u,
                           const VectorRef& w) {
  const int nu = inst.dynamics.control_dim;
  const int nw = inst.dynamics.noise_dim;
  StateVector x = inst.initial_state;
  double total = 0.0;
  for (int k = 0; k < inst.horizon; ++k) {
    total += inst.cost.stage(x, u.segment(k * nu, nu));
    x = inst.dynamics.step(x, u.segment(k * nu, nu), w.segment(k * nw, nw));
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
  }
  total += inst.cost.terminal_cost(x);
  return std::isfinite(total) ? total
                              : std::numeric_limits<double>::infinity();
}

Eigen::MatrixXd symmetric_power(const Eigen::MatrixXd& m, double p) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  require(eig.info() == Eigen::Success && eig.eigenvalues().minCoeff() > 0.0,
          "matrix power needs a symmetric positive-definite matrix");
  const Eigen::VectorXd d = eig.eigenvalues().array().pow(p);
  return eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
}

Assumption1Report check_assumption1(const DynamicsModel& dyn,
                                    const CostModel& cost, double lambda,
                                    const std::vector<StateVector>& probes,
                                    double tol) {
  if (dyn.kind != DynamicsKind::kInputAffine) {
    throw Error(ErrorCode::kUnsupportedModel,
                "the noise-on-control check needs input-affine dynamics");
  }
  require(lambda > 0.0, "lambda must be > 0");
  require(!probes.empty(), "the noise-on-control check needs probe states");
  Assumption1Report report;
  report.max_residual = -1.0;
  for (const auto& x : probes) {
    const Eigen::MatrixXd b = dyn.control_input(x);
    const Eigen::MatrixXd g = dyn.noise_input(x);
    const Eigen::MatrixXd r = cost.control_weight(x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(r);
    require(eig.eigenvalues().minCoeff() > 0.0, "R(x) must be positive definite");
    const Eigen::MatrixXd lhs =
        lambda * b * r.ldlt().solve(b.transpose());
    const double residual = (lhs - g * g.transpose()).norm();
    if (residual > report.max_residual) {
      report.max_residual = residual;
      report.worst_state = x;
    }
  }
  report.holds = report.max_residual <= tol;
  return report;
}

std::vector<StateVector> probe_states(const StateVector& lo,
                                      const StateVector& hi, int count) {
  require(lo.size() == hi.size() && lo.size() >= 1, "probe box dimension");
  require(count >= 1, "probe count must be >= 1");
  const auto dim = static_cast<std::size_t>(lo.size());
  std::vector<StateVector> out;
  out.reserve(count);
  boost::random::sobol engine(dim);
  boost::random::uniform_01<double> unit;
  for (int i = 0; i < count; ++i) {
    StateVector x(lo.size());
    for (Eigen::Index d = 0; d < lo.size(); ++d) {
      x[d] = lo[d] + unit(engine) * (hi[d] - lo[d]);
    }
    out.push_back(std::move(x));
  }
  return out;
}

CanonicalForm to_canonical(const DynamicsModel& dyn, const CostModel& cost,
                           double lambda,
                           const std::vector<StateVector>& probes,
                           double tol) {
  const auto report = check_assumption1(dyn, cost, lambda, probes, tol);
  if (!report.holds) {
    throw Error(ErrorCode::kTransformationInvalid,
                "noise-on-control condition lambda B R^-1 B^T = G G^T violated: residual " +
                    std::to_string(report.max_residual) + " > tol " +
                    std::to_string(tol));
  }
  const auto drift = dyn.drift;
  const auto b = dyn.control_input;
  const auto g = dyn.noise_input;
  const auto r = cost.control_weight;

  auto b_bar = [b, r](const StateVector& x) -> Eigen::MatrixXd {
    return b(x) * symmetric_power(r(x), -0.5);
  };

  CanonicalForm form;
  form.noise_variance = lambda;
  // the canonical noise enters through Bbar with covariance lambda I
  form.dynamics = DynamicsModel::input_affine(dyn.state_dim, dyn.control_dim,
                                              dyn.control_dim, drift, b_bar,
                                              b_bar);
  form.cost.state_cost = cost.state_cost;
  form.cost.terminal_cost = cost.terminal_cost;
  form.cost.constant_weight = true;
  form.cost.control_weight = [nu = dyn.control_dim](const StateVector&) {
    return Eigen::MatrixXd::Identity(nu, nu);
  };
  form.control_to_canonical = [r](const StateVector& x, const VectorRef& u) {
    return Eigen::VectorXd(symmetric_power(r(x), 0.5) * u);
  };
  form.control_from_canonical = [r](const StateVector& x,
                                    const VectorRef& ubar) {
    return Eigen::VectorXd(symmetric_power(r(x), -0.5) * ubar);
  };
  form.noise_to_canonical = [b_bar, g](const StateVector& x,
                                       const VectorRef& w) {
    const Eigen::MatrixXd bb = b_bar(x);
    return Eigen::VectorXd(
        bb.completeOrthogonalDecomposition().solve(g(x) * w));
  };
  return form;
}

std::pair<ControlTrajectory, NoiseTrajectory> canonical_trajectories(
    const OcpInstance& original, const CanonicalForm& form,
    const ControlTrajectory& u, const NoiseTrajectory& w) {
  const auto states = rollout(original, u, w);
  const int nu = original.dynamics.control_dim;
  Eigen::VectorXd ubar(original.horizon * nu);
  Eigen::VectorXd wbar(original.horizon * nu);
  for (int k = 0; k < original.horizon; ++k) {
    ubar.segment(k * nu, nu) = form.control_to_canonical(states[k], u.step(k));
    wbar.segment(k * nu, nu) = form.noise_to_canonical(states[k], w.step(k));
  }
  return {ControlTrajectory(original.horizon, nu, std::move(ubar)),
          NoiseTrajectory(original.horizon, nu, std::move(wbar))};
}

}  // namespace mppi_lab
