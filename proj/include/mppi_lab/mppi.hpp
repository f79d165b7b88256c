#ifndef MPPI_LAB_MPPI_HPP_
#define MPPI_LAB_MPPI_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mppi_lab/covariance.hpp"
#include "mppi_lab/problem.hpp"
#include "mppi_lab/sampling.hpp"
#include "mppi_lab/trajectory.hpp"

namespace mppi_lab {

// omega_m = exp(-(S_m - psi) / lambda) / eta, psi = min_m S_m.
// Non-finite costs get zero weight and are counted in `rejected`.
struct WeightVector {
  Eigen::VectorXd omega;
  double offset = 0.0;      // psi
  double normalizer = 0.0;  // eta
  int rejected = 0;

  double effective_sample_size() const;
  double entropy() const;
  double max_weight() const;
};

WeightVector softmin_weights(std::span<const double> costs, double lambda);

struct StepOptions {
  int samples = 100000;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  int workers = 1;
};

struct StepResult {
  ControlTrajectory mean;
  WeightVector weights;
  // self-normalized importance-sampling standard error of each component
  Eigen::VectorXd standard_error;
  double best_cost = 0.0;
};

// One MPPI update around `mean` from an explicit batch: corrected costs
// S(U_hat + W^m) + lambda W^m' Sigma_bar^-1 U_hat, softmin weights, and
// U_hat + sum_m omega_m W^m.
StepResult mppi_update(const OcpInstance& inst, const ControlTrajectory& mean,
                       const SampleBatch& batch, const CovarianceSpec& cov,
                       double lambda, int workers = 1);

// Draws a batch from N(0, cov) and applies mppi_update.
StepResult standard_mppi_step(const OcpInstance& inst,
                              const ControlTrajectory& mean,
                              const CovarianceSpec& cov, double lambda,
                              const StepOptions& options);

struct MppiConfig {
  int samples = 100000;
  int iterations = 10;
  double shrink_factor = 0.70710678118654752;  // sqrt(2)/2
  double lambda0 = 1.0;
  CovarianceSpec sigma0;  // scale must be 1
  ControlTrajectory initial_mean;
  std::uint64_t seed = 0;
  int workers = 1;

  // lambda0 = 1, Sigma0 = lambda0 R(x0)^{-1}, zero initial mean
  static MppiConfig defaults_for(const OcpInstance& inst);

  void validate(const OcpInstance& inst) const;
};

struct IterateRecord {
  int iteration = 0;
  double beta = 1.0;
  double lambda = 1.0;
  ControlTrajectory mean;  // U_hat after this iteration
  double value = 0.0;      // J(U_hat, 0)
  double best_cost = 0.0;
  double effective_sample_size = 0.0;
  double max_weight = 0.0;
  double weight_entropy = 0.0;
  int rejected = 0;
  Eigen::VectorXd standard_error;
};

// Evolving state of the shrinking loop: beta = nu^j, lambda = beta^2 lambda0.
struct SolverState {
  ControlTrajectory mean;
  int iteration = 0;
  double beta = 1.0;
  double lambda = 1.0;
  std::vector<IterateRecord> history;
};

struct SolveReport {
  ControlTrajectory solution;
  double value = 0.0;  // recomputed as J(solution, 0)
  std::vector<IterateRecord> history;
  double weight_entropy = 0.0;  // final iteration
  double max_weight = 0.0;      // final iteration
  int rejected_samples = 0;     // all iterations
  std::vector<std::string> warnings;
};

SolverState initial_state(const OcpInstance& inst, const MppiConfig& cfg);

// Performs iteration state.iteration of the deterministic MPPI loop and
// appends its record to the history.
void advance(SolverState& state, const OcpInstance& inst,
             const MppiConfig& cfg, std::vector<std::string>* warnings);

SolveReport deterministic_mppi_solve(const OcpInstance& inst,
                                     const MppiConfig& cfg);

struct ClsEstimate {
  Eigen::VectorXd control;
  Eigen::VectorXd standard_error;
};

// Softmin-weighted w_0 under uncontrolled sampling (U_hat = 0) of the
// canonical form. Requires input-affine dynamics satisfying lambda B R^-1 B^T = G G^T with
// the instance's sampling covariance; throws kTransformationInvalid otherwise.
ClsEstimate cls_mppi_u0(const OcpInstance& inst, const StepOptions& options,
                        const std::vector<StateVector>& probes);

// J(U, 0)
double value_of(const OcpInstance& inst, const ControlTrajectory& u);

}  // namespace mppi_lab

#endif  // MPPI_LAB_MPPI_HPP_
