#include "mppi_lab/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>

#include "mppi_lab/experiments.hpp"
#include "mppi_lab/sampling.hpp"

namespace mppi_lab {
namespace {

using Clock = std::chrono::steady_clock;

std::string sci(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Quartic exact sweep, shared by the two order criteria.
const BiasSweep& quartic_sweep() {
  static std::optional<BiasSweep> sweep;
  if (!sweep) {
    ScenarioSpec spec = find_scenario("quartic");
    spec.mode = "exact";
    spec.lambda0 = 1.0;
    spec.betas = logspace(0.02, 0.2, 8);
    const auto t0 = Clock::now();
    const OracleSolution det = det_oracle_cached(spec);
    sweep = bias_sweep(spec, det);
    sweep->seconds = seconds_since(t0);
  }
  return *sweep;
}

CriterionResult control_order() {
  const BiasSweep& s = quartic_sweep();
  const double slope = s.control_fit->slope;
  const bool ok = slope >= 1.9 && slope <= 2.1 && s.seconds < 30.0;
  return {"control-bias-order", ok, false,
          "slope " + sci(slope) + " (need [1.9, 2.1]), sweep " + sci(s.seconds) +
              " s (need < 30)"};
}

CriterionResult value_order() {
  const BiasSweep& s = quartic_sweep();
  const double slope = s.value_fit->slope;
  const bool ok = slope >= 3.8 && slope <= 4.2 && s.seconds < 30.0;
  return {"value-gap-order", ok, false,
          "slope " + sci(slope) + " (need [3.8, 4.2]), sweep " + sci(s.seconds) +
              " s (need < 30)"};
}

GibbsOptions gibbs_options(const ScenarioSpec& spec, double beta) {
  GibbsOptions opt;
  opt.beta = beta;
  opt.lambda0 = spec.lambda0;
  opt.box = oracle_box(spec);
  opt.abs_tol = spec.gibbs_tol;
  return opt;
}

CriterionResult laplace_prefactor() {
  const ScenarioSpec spec = find_scenario("quartic");
  const OcpInstance inst = build_instance(spec);
  constexpr double kPrefactor = -0.28125;
  bool ok = true;
  std::string detail;
  for (double beta : {0.05, 0.035, 0.02, 0.01}) {
    const double ratio = gibbs_mean(inst, gibbs_options(spec, beta)).mean[0] / (beta * beta);
    const double rel = std::abs(ratio / kPrefactor - 1.0);
    ok = ok && rel <= 0.05;
    detail += "beta=" + sci(beta) + ": " + sci(ratio) + " (" + sci(100 * rel) + "%); ";
  }
  return {"laplace-prefactor", ok, false, detail + "need within 5% of -0.28125"};
}

CriterionResult small_beta_limit() {
  constexpr double kBeta = 1e-3;
  std::string detail;
  bool ok = true;

  const ScenarioSpec quartic = find_scenario("quartic");
  const OracleSolution qdet = det_oracle_cached(quartic);
  const double qerr = std::abs(
      gibbs_mean(build_instance(quartic), gibbs_options(quartic, kBeta)).mean[0] -
      qdet.minimizer[0]);
  ok = ok && qerr <= 1e-5;
  detail += "quartic exact err " + sci(qerr) + " (need <= 1e-5); ";

  const ScenarioSpec arctan = find_scenario("arctan2");
  const OcpInstance inst = build_instance(arctan);
  const OracleSolution adet = det_oracle_cached(arctan);
  const double aerr =
      (gibbs_mean(inst, gibbs_options(arctan, kBeta)).mean.values() -
       adet.minimizer.values())
          .cwiseAbs()
          .maxCoeff();
  ok = ok && aerr <= 1e-4;
  detail += "arctan2 exact err " + sci(aerr) + " (need <= 1e-4); ";

  // corrected estimator sampled around U*_det; unbiased for the same mean
  const double scale = kBeta * kBeta;
  const CovarianceSpec cov = CovarianceSpec::scalar(arctan.sigma0, arctan.horizon, scale);
  const SampleBatch batch = draw_batch(cov, 1000000, arctan.seed, 0);
  const StepResult step =
      mppi_update(inst, adet.minimizer, batch, cov, scale * arctan.lambda0, 1);
  const Eigen::VectorXd diff = (step.mean.values() - adet.minimizer.values()).cwiseAbs();
  const Eigen::VectorXd band = (3.0 * step.standard_error).array() + 1e-4;
  const bool sampled_ok = (diff.array() <= band.array()).all();
  ok = ok && sampled_ok;
  detail += "arctan2 sampled M=1e6 err " + sci(diff.maxCoeff()) + " (band " +
            sci(band.minCoeff()) + ")";
  return {"small-beta-limit", ok, false, detail};
}

CriterionResult q_linear() {
  const auto t0 = Clock::now();
  ScenarioSpec spec = find_scenario("arctan2");
  spec.samples = 100000;
  spec.iterations = 10;
  spec.shrink_factor = std::sqrt(0.5);
  const OcpInstance inst = build_instance(spec);
  const OracleSolution det = det_oracle_cached(spec);
  const SolveReport report = deterministic_mppi_solve(inst, solver_config(spec, inst));
  const double secs = seconds_since(t0);
  std::vector<double> err, floor;
  for (const auto& it : report.history) {
    err.push_back((it.mean.values() - det.minimizer.values()).norm());
    floor.push_back(it.standard_error.norm());
  }
  bool ok = true;
  std::string ratios;
  int checked = 0;
  for (std::size_t j = 0; j + 1 < err.size(); ++j) {
    if (err[j] <= 10.0 * floor[j]) continue;
    const double r = err[j + 1] / err[j];
    ok = ok && r >= 0.3 && r <= 0.7;
    ratios += sci(r) + " ";
    ++checked;
  }
  ok = ok && checked > 0 && err.back() <= 1e-2 && secs < 60.0;
  return {"q-linear-convergence", ok, false,
          "ratios [" + ratios + "] (need [0.3, 0.7]), final error " + sci(err.back()) +
              " (need <= 1e-2), " + sci(secs) + " s (need < 60)"};
}

CriterionResult affine_closed_loop() {
  const ScenarioSpec spec = find_scenario("affine2");
  const OcpInstance inst = build_instance(spec);
  ClsOptions cls;
  cls.quadrature_order = spec.cls_quadrature_order;
  cls.grid_points = spec.cls_grid_points;
  const OracleSolution oracle = cls_ocp_oracle(inst, cls);
  const StepOptions so{.samples = 1000000, .seed = spec.seed, .iteration = 0, .workers = 1};
  const ClsEstimate est = cls_mppi_u0(
      inst, so,
      probe_states(StateVector::Constant(1, -3.0), StateVector::Constant(1, 3.0)));
  const double diff = std::abs(est.control[0] - oracle.minimizer[0]);
  const double band = 3.0 * (est.standard_error[0] + oracle.certified_tolerance);
  return {"affine-closed-loop", diff <= band, false,
          "standard MPPI u0 " + sci(est.control[0]) + " (SE " + sci(est.standard_error[0]) +
              "), CLS oracle u0 " + sci(oracle.minimizer[0]) + " (tol " +
              sci(oracle.certified_tolerance) + "), |diff| " + sci(diff) + " vs band " +
              sci(band)};
}

CriterionResult certainty_equivalence() {
  const ScenarioSpec spec = find_scenario("lq1");
  const OcpInstance inst = build_instance(spec);
  GridOptions grid;
  grid.points_per_axis = spec.grid_points;
  const double det = det_ocp_oracle(inst, oracle_box(spec), grid).minimizer[0];
  const double ols =
      ols_ocp_oracle(inst, spec.quadrature_order, oracle_box(spec), grid).minimizer[0];
  const double cls = cls_ocp_oracle(inst).minimizer[0];
  const double spread = std::max({det, ols, cls}) - std::min({det, ols, cls});
  return {"certainty-equivalence", spread <= 1e-6, false,
          "u0 det " + sci(det) + ", ols " + sci(ols) + ", cls " + sci(cls) + ", spread " +
              sci(spread) + " (need <= 1e-6)"};
}

CriterionResult is_invariance() {
  const ScenarioSpec spec = find_scenario("quartic");
  const OcpInstance inst = build_instance(spec);
  constexpr double kBeta = 0.5;
  const double scale = kBeta * kBeta;
  const CovarianceSpec cov = CovarianceSpec::scalar(spec.sigma0, 1, scale);
  const ControlTrajectory shifted(1, 1, Eigen::VectorXd::Constant(1, 0.3));
  const ControlTrajectory zero = zero_controls(inst);
  constexpr int kReplicates = 20;
  std::vector<double> a, b;
  for (int r = 0; r < kReplicates; ++r) {
    const StepOptions sa{.samples = 100000, .seed = 1 + std::uint64_t(r)};
    const StepOptions sb{.samples = 100000, .seed = 1001 + std::uint64_t(r)};
    a.push_back(standard_mppi_step(inst, shifted, cov, scale * spec.lambda0, sa).mean[0]);
    b.push_back(standard_mppi_step(inst, zero, cov, scale * spec.lambda0, sb).mean[0]);
  }
  auto stats = [](const std::vector<double>& v) {
    const auto n = static_cast<double>(v.size());
    double m = 0.0;
    for (double x : v) m += x;
    m /= n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, std::sqrt(ss / (n - 1.0) / n)};
  };
  const auto [ma, sea] = stats(a);
  const auto [mb, seb] = stats(b);
  const double band = 3.0 * std::hypot(sea, seb);
  return {"importance-sampling-invariance", std::abs(ma - mb) <= band, false,
          "corrected (U=0.3) " + sci(ma) + " +- " + sci(sea) + ", plain (U=0) " + sci(mb) +
              " +- " + sci(seb) + ", |diff| " + sci(std::abs(ma - mb)) + " vs 3 SE " +
              sci(band)};
}

CriterionResult canonical_equivalence() {
  constexpr double kR = 4.0;
  constexpr double kLambda = 4.0;
  const DynamicsModel dyn = DynamicsModel::input_affine(
      1, 1, 1,
      [](const StateVector& x) {
        return Eigen::VectorXd::Constant(1, x[0] - 0.5 * std::sin(3.0 * x[0]));
      },
      [](const StateVector&) { return Eigen::MatrixXd::Identity(1, 1); },
      [](const StateVector&) { return Eigen::MatrixXd::Identity(1, 1); });
  const CostModel cost = CostModel::make(
      [](const StateVector& x) { return x[0] * x[0]; }, Eigen::MatrixXd::Constant(1, 1, kR),
      [](const StateVector& x) { return std::pow(x[0] - 1.0, 6) + x[0]; });
  constexpr int kHorizon = 3;
  const OcpInstance original{.dynamics = dyn,
                             .cost = cost,
                             .horizon = kHorizon,
                             .initial_state = StateVector::Constant(1, -1.0),
                             .sigma = CovarianceSpec::scalar(1.0, kHorizon),
                             .lambda = kLambda};
  const auto probes =
      probe_states(StateVector::Constant(1, -3.0), StateVector::Constant(1, 3.0));
  const CanonicalForm form = to_canonical(dyn, cost, kLambda, probes);
  const OcpInstance canonical{.dynamics = form.dynamics,
                              .cost = form.cost,
                              .horizon = kHorizon,
                              .initial_state = original.initial_state,
                              .sigma = CovarianceSpec::scalar(form.noise_variance, kHorizon),
                              .lambda = kLambda};
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 0.5);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Eigen::VectorXd u(kHorizon), w(kHorizon);
    for (int k = 0; k < kHorizon; ++k) {
      u[k] = normal(rng);
      w[k] = normal(rng);
    }
    const ControlTrajectory ut(kHorizon, 1, u);
    const NoiseTrajectory wt(kHorizon, 1, w);
    const auto [ub, wb] = canonical_trajectories(original, form, ut, wt);
    worst = std::max(worst, std::abs(overall_cost(original, ut, wt) -
                                     overall_cost(canonical, ub, wb)));
  }
  return {"canonical-equivalence", worst <= 1e-10, false,
          "max cost mismatch over 1000 trajectories " + sci(worst) + " (need <= 1e-10)"};
}

CriterionResult property_suites() {
  std::string detail;
  bool ok = true;

  // weight normalization
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 50.0);
  double norm_err = 0.0;
  for (double lambda : {1e-3, 1.0, 1e3}) {
    std::vector<double> costs(5000);
    for (double& c : costs) c = normal(rng);
    norm_err = std::max(norm_err, std::abs(softmin_weights(costs, lambda).omega.sum() - 1.0));
  }
  ok = ok && norm_err <= 1e-12;
  detail += "normalization err " + sci(norm_err) + "; ";

  // offset invariance: dyadic costs and an integer shift are exact in binary
  std::vector<double> costs(4096), shifted(4096);
  std::uniform_int_distribution<int> k(0, 4000);
  for (std::size_t i = 0; i < costs.size(); ++i) {
    costs[i] = k(rng) / 8.0;
    shifted[i] = costs[i] + 1024.0;
  }
  const bool offset_ok =
      softmin_weights(costs, 2.0).omega == softmin_weights(shifted, 2.0).omega;
  ok = ok && offset_ok;
  detail += std::string("offset invariance ") + (offset_ok ? "bit-exact" : "MISMATCH") + "; ";

  // worker-count determinism
  const ScenarioSpec arctan = find_scenario("arctan2");
  const OcpInstance inst = build_instance(arctan);
  const CovarianceSpec cov = CovarianceSpec::scalar(1.0, 2);
  bool det_ok = true;
  Eigen::VectorXd reference;
  for (int workers : {1, 4, 16}) {
    const StepOptions so{.samples = 20000, .seed = 5, .iteration = 3, .workers = workers};
    const Eigen::VectorXd m = standard_mppi_step(inst, zero_controls(inst), cov, 1.0, so)
                                  .mean.values();
    if (reference.size() == 0) {
      reference = m;
    } else {
      det_ok = det_ok && m == reference;
    }
  }
  ok = ok && det_ok;
  detail += std::string("workers 1/4/16 ") + (det_ok ? "bit-identical" : "DIFFER") + "; ";

  // oracle refinement stability
  GridOptions coarse, fine;
  coarse.points_per_axis = 401;
  fine.points_per_axis = 801;
  const OracleSolution d1 = det_ocp_oracle(inst, oracle_box(arctan), coarse);
  const OracleSolution d2 = det_ocp_oracle(inst, oracle_box(arctan), fine);
  const double det_shift =
      (d1.minimizer.values() - d2.minimizer.values()).cwiseAbs().maxCoeff();
  const bool det_stable = det_shift <= d1.certified_tolerance;
  ok = ok && det_stable;
  detail += "DET refine shift " + sci(det_shift) + " vs tol " +
            sci(d1.certified_tolerance) + "; ";

  const ScenarioSpec affine = find_scenario("affine2");
  const OcpInstance ainst = build_instance(affine);
  GridOptions ols_grid = coarse;
  ols_grid.max_evaluations = affine.ols_max_evaluations;
  const OracleSolution ols = ols_ocp_oracle(ainst, affine.quadrature_order,
                                            oracle_box(affine), ols_grid);
  ok = ok && ols.quadrature_change < 1e-8;
  detail += "OLS Q->2Q change " + sci(ols.quadrature_change) + "; ";

  ClsOptions c1, c2;
  c1.quadrature_order = c2.quadrature_order = affine.cls_quadrature_order;
  c1.grid_points = 801;
  c2.grid_points = 1601;
  const OracleSolution s1 = cls_ocp_oracle(ainst, c1);
  const OracleSolution s2 = cls_ocp_oracle(ainst, c2);
  const double cls_shift = std::abs(s1.minimizer[0] - s2.minimizer[0]);
  ok = ok && cls_shift <= s1.certified_tolerance;
  detail += "CLS refine shift " + sci(cls_shift) + " vs tol " + sci(s1.certified_tolerance);
  return {"property-suites", ok, false, detail};
}

}  // namespace

const std::vector<Criterion>& acceptance_criteria() {
  static const std::vector<Criterion> list = {
      {"control-bias-order", "slopes", control_order},
      {"value-gap-order", "slopes", value_order},
      {"laplace-prefactor", "bias", laplace_prefactor},
      {"small-beta-limit", "bias", small_beta_limit},
      {"q-linear-convergence", "solver", q_linear},
      {"affine-closed-loop", "oracles", affine_closed_loop},
      {"certainty-equivalence", "oracles", certainty_equivalence},
      {"importance-sampling-invariance", "solver", is_invariance},
      {"canonical-equivalence", "problem", canonical_equivalence},
      {"property-suites", "properties", property_suites},
  };
  return list;
}

std::vector<CriterionResult> run_acceptance(const std::string& only, std::ostream* log) {
  std::vector<const Criterion*> selected;
  for (const auto& c : acceptance_criteria()) {
    if (only.empty() || only == c.name || only == c.group) selected.push_back(&c);
  }
  if (selected.empty()) {
    std::string names;
    for (const auto& c : acceptance_criteria()) names += " " + c.name;
    throw Error(ErrorCode::kConfig,
                "--only '" + only + "' matches no criterion or group; criteria:" + names);
  }
  std::vector<CriterionResult> results;
  for (const Criterion* c : selected) {
    const auto t0 = Clock::now();
    CriterionResult r;
    try {
      r = c->run();
    } catch (const std::exception& e) {
      r = {c->name, false, true, std::string("error: ") + e.what()};
    }
    r.name = c->name;
    r.seconds = seconds_since(t0);
    if (log != nullptr) *log << format_result(r) << std::endl;
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  s << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed
    << std::setprecision(1) << r.seconds << " s): " << r.detail;
  return s.str();
}

}  // namespace mppi_lab
