#include "mppi_lab/mppi.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mppi_lab/parallel.hpp"

namespace mppi_lab {

double WeightVector::effective_sample_size() const {
  return 1.0 / omega.squaredNorm();
}

double WeightVector::entropy() const {
  double h = 0.0;
  for (double w : omega) {
    if (w > 0.0) h -= w * std::log(w);
  }
  return h;
}

double WeightVector::max_weight() const { return omega.maxCoeff(); }

WeightVector softmin_weights(std::span<const double> costs, double lambda) {
  require(lambda > 0.0 && std::isfinite(lambda),
          "softmin temperature lambda must be > 0");
  require(!costs.empty(), "softmin needs at least one cost");
  WeightVector out;
  out.omega = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(costs.size()));
  double psi = std::numeric_limits<double>::infinity();
  for (double s : costs) {
    if (std::isfinite(s)) {
      psi = std::min(psi, s);
    } else {
      ++out.rejected;
    }
  }
  if (out.rejected == static_cast<int>(costs.size())) {
    throw Error(ErrorCode::kNoValidSamples,
                "all " + std::to_string(costs.size()) +
                    " sample costs are non-finite");
  }
  double eta = 0.0;
  for (std::size_t m = 0; m < costs.size(); ++m) {
    if (!std::isfinite(costs[m])) continue;
    const double e = std::exp(-(costs[m] - psi) / lambda);
    out.omega[static_cast<Eigen::Index>(m)] = e;
    eta += e;
  }
  out.omega /= eta;
  out.offset = psi;
  out.normalizer = eta;
  return out;
}

StepResult mppi_update(const OcpInstance& inst, const ControlTrajectory& mean,
                       const SampleBatch& batch, const CovarianceSpec& cov,
                       double lambda, int workers) {
  const int dim = inst.control_size();
  require(inst.dynamics.noise_dim == inst.dynamics.control_dim,
          "MPPI needs noise on the control channel (n_w == n_u)");
  require(mean.size() == dim, "mean trajectory does not match N*n_u");
  require(cov.lifted_dim() == dim && batch.noises.cols() == dim,
          "sampling covariance does not match N*n_u");

  // lambda Sigma_bar^{-1} U_hat, shared by every sample
  const Eigen::VectorXd correction_dir = lambda * cov.solve(mean.values());
  const std::size_t count = static_cast<std::size_t>(batch.count());
  std::vector<double> costs(count);
  parallel_for(count, workers, [&](std::size_t begin, std::size_t end) {
    Eigen::VectorXd v(dim);
    for (std::size_t m = begin; m < end; ++m) {
      const auto w = batch.noises.row(static_cast<Eigen::Index>(m)).transpose();
      v = mean.values() + w;
      costs[m] = path_cost_or_inf(inst, v) + w.dot(correction_dir);
    }
  });

  StepResult out;
  out.weights = softmin_weights(costs, lambda);
  out.best_cost = out.weights.offset;

  Eigen::VectorXd shift = Eigen::VectorXd::Zero(dim);
  for (std::size_t m = 0; m < count; ++m) {
    const double w = out.weights.omega[static_cast<Eigen::Index>(m)];
    if (w != 0.0) {
      shift += w * batch.noises.row(static_cast<Eigen::Index>(m)).transpose();
    }
  }
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (std::size_t m = 0; m < count; ++m) {
    const double w = out.weights.omega[static_cast<Eigen::Index>(m)];
    if (w != 0.0) {
      const Eigen::VectorXd d =
          batch.noises.row(static_cast<Eigen::Index>(m)).transpose() - shift;
      var += (w * w) * d.cwiseProduct(d);
    }
  }
  out.standard_error = var.cwiseSqrt();
  out.mean = ControlTrajectory(mean.horizon(), mean.step_dim(),
                               mean.values() + shift);
  return out;
}

StepResult standard_mppi_step(const OcpInstance& inst,
                              const ControlTrajectory& mean,
                              const CovarianceSpec& cov, double lambda,
                              const StepOptions& options) {
  require(options.samples >= 1, "sample count must be >= 1");
  const SampleBatch batch = draw_batch(cov, options.samples, options.seed,
                                       options.iteration, options.workers);
  return mppi_update(inst, mean, batch, cov, lambda, options.workers);
}

MppiConfig MppiConfig::defaults_for(const OcpInstance& inst) {
  const Eigen::MatrixXd r = inst.cost.control_weight(inst.initial_state);
  MppiConfig cfg{
      .sigma0 = CovarianceSpec(r.inverse(), inst.horizon),
      .initial_mean = zero_controls(inst),
  };
  return cfg;
}

void MppiConfig::validate(const OcpInstance& inst) const {
  require(samples >= 2, "MPPI needs M >= 2 samples");
  require(iterations >= 1, "MPPI needs I >= 1 iterations");
  require(shrink_factor > 0.0 && shrink_factor < 1.0,
          "shrink factor must lie in (0, 1)");
  require(lambda0 > 0.0 && std::isfinite(lambda0), "lambda0 must be > 0");
  require(sigma0.scale() == 1.0, "initial covariance must carry scale 1");
  require(sigma0.lifted_dim() == inst.control_size(),
          "initial covariance does not match N*n_u");
  require(initial_mean.size() == inst.control_size(),
          "initial mean does not match N*n_u");
  require(workers >= 1, "workers must be >= 1");
}

SolverState initial_state(const OcpInstance& inst, const MppiConfig& cfg) {
  cfg.validate(inst);
  SolverState state;
  state.mean = cfg.initial_mean;
  state.iteration = 0;
  state.beta = 1.0;
  state.lambda = cfg.lambda0;
  return state;
}

void advance(SolverState& state, const OcpInstance& inst,
             const MppiConfig& cfg, std::vector<std::string>* warnings) {
  const int j = state.iteration;
  state.beta = std::pow(cfg.shrink_factor, j);
  const double scale = state.beta * state.beta;
  state.lambda = scale * cfg.lambda0;
  const CovarianceSpec cov = cfg.sigma0.with_scale(scale);

  StepOptions options{.samples = cfg.samples,
                      .seed = cfg.seed,
                      .iteration = static_cast<std::uint64_t>(j),
                      .workers = cfg.workers};
  StepResult step =
      standard_mppi_step(inst, state.mean, cov, state.lambda, options);
  state.mean = step.mean;

  IterateRecord rec;
  rec.iteration = j;
  rec.beta = state.beta;
  rec.lambda = state.lambda;
  rec.mean = state.mean;
  rec.value = value_of(inst, state.mean);
  rec.best_cost = step.best_cost;
  rec.effective_sample_size = step.weights.effective_sample_size();
  rec.max_weight = step.weights.max_weight();
  rec.weight_entropy = step.weights.entropy();
  rec.rejected = step.weights.rejected;
  rec.standard_error = step.standard_error;
  if (warnings != nullptr && rec.effective_sample_size < 0.01 * cfg.samples) {
    std::ostringstream msg;
    msg << "iteration " << j << ": effective sample size "
        << rec.effective_sample_size << " < 1% of M=" << cfg.samples;
    warnings->push_back(msg.str());
  }
  state.history.push_back(std::move(rec));
  ++state.iteration;
}

SolveReport deterministic_mppi_solve(const OcpInstance& inst,
                                     const MppiConfig& cfg) {
  inst.validate();
  SolverState state = initial_state(inst, cfg);
  SolveReport report;
  for (int j = 0; j < cfg.iterations; ++j) {
    advance(state, inst, cfg, &report.warnings);
  }
  report.solution = state.mean;
  report.value = value_of(inst, report.solution);
  for (const auto& rec : state.history) report.rejected_samples += rec.rejected;
  report.weight_entropy = state.history.back().weight_entropy;
  report.max_weight = state.history.back().max_weight;
  report.history = std::move(state.history);
  return report;
}

ClsEstimate cls_mppi_u0(const OcpInstance& inst, const StepOptions& options,
                        const std::vector<StateVector>& probes) {
  inst.validate();
  if (inst.dynamics.kind != DynamicsKind::kInputAffine) {
    throw Error(ErrorCode::kUnsupportedModel,
                "closed-loop MPPI needs input-affine dynamics");
  }
  // The noise-on-control condition is stated for unit-covariance noise: fold the sampling
  // covariance into G.
  DynamicsModel unit_noise = inst.dynamics;
  const Eigen::MatrixXd noise_factor = inst.sigma.cholesky();
  unit_noise.noise_input = [g = inst.dynamics.noise_input,
                            noise_factor](const StateVector& x) {
    return Eigen::MatrixXd(g(x) * noise_factor);
  };
  const auto report =
      check_assumption1(unit_noise, inst.cost, inst.lambda, probes);
  if (!report.holds) {
    throw Error(ErrorCode::kTransformationInvalid,
                "noise-on-control condition lambda B R^-1 B^T = G G^T violated (residual " +
                    std::to_string(report.max_residual) +
                    "); closed-loop MPPI does not apply");
  }
  const CanonicalForm form =
      to_canonical(unit_noise, inst.cost, inst.lambda, probes);
  const int nu = inst.dynamics.control_dim;
  OcpInstance canonical{
      .dynamics = form.dynamics,
      .cost = form.cost,
      .horizon = inst.horizon,
      .initial_state = inst.initial_state,
      .sigma = CovarianceSpec(
          Eigen::MatrixXd::Identity(nu, nu) * form.noise_variance,
          inst.horizon),
      .lambda = inst.lambda,
  };
  const StepResult step =
      standard_mppi_step(canonical, zero_controls(canonical), canonical.sigma,
                         canonical.lambda, options);
  ClsEstimate out;
  out.control =
      form.control_from_canonical(inst.initial_state, step.mean.step(0));
  const Eigen::MatrixXd back = symmetric_power(
      inst.cost.control_weight(inst.initial_state), -0.5);
  out.standard_error =
      (back.cwiseAbs() * step.standard_error.head(nu)).eval();
  return out;
}

double value_of(const OcpInstance& inst, const ControlTrajectory& u) {
  return overall_cost(inst, u, zero_noise(inst));
}

}  // namespace mppi_lab
